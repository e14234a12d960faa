use std::collections::BTreeMap;

use serde_json::{json, Value};
use trendlab_core::hygiene::{
    admit, availability_gate, null_study, split_backtest, Admission, NullStudyConfig, NullTarget, SplitSpec,
    TAIL_THRESHOLD,
};
use trendlab_core::ingest::{
    bundled_keywords, category_counts, load_keyword_fixtures, load_price_csv, load_svi_csv, Generator,
    SyntheticSpec,
};
use trendlab_core::series::weekly_returns;
use trendlab_core::strategy::sweep_k;
use trendlab_core::{BacktestResult, Error, Pipeline, StrategyConfig, TStat};

use crate::output::{to_csv, to_json, write_outputs, RunManifest};
use crate::{BacktestArgs, CliResult, KeywordArgs, NullArgs, SweepArgs};

/// Smallest null study whose summary statistics are worth reporting.
const MIN_TRIALS: usize = NullStudyConfig::MIN_DISTRIBUTIONAL_TRIALS;

fn t_json(t: TStat) -> Value {
    t.value().map_or(Value::Null, Value::from)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn result_csv(result: &BacktestResult) -> Vec<u8> {
    let rows = result.weeks.iter().enumerate().map(|(i, w)| {
        vec![
            w.trade_week.to_string(),
            w.position.get().to_string(),
            num(w.gross),
            num(w.net),
            num(result.cum_gross[i]),
            num(result.cum_net[i]),
        ]
    });
    to_csv(&["trade_week", "position", "gross", "net", "cum_gross", "cum_net"], rows)
}

fn result_summary(result: &BacktestResult) -> Value {
    json!({
        "t_stat_gross": t_json(result.t_stat_gross),
        "t_stat_net": t_json(result.t_stat_net),
        "t_stat_status": result.t_stat_gross.status(),
        "n": result.n,
        "trades": result.trades,
        "total_fees": result.total_fees,
        "cum_gross": result.cum_gross.last().copied().unwrap_or(0.0),
        "cum_net": result.cum_net.last().copied().unwrap_or(0.0),
        "first_trade_week": result.weeks.first().map(|w| w.trade_week.to_string()),
        "last_trade_week": result.weeks.last().map(|w| w.trade_week.to_string()),
    })
}

pub fn backtest(a: BacktestArgs) -> CliResult {
    let config = a.strategy.config();
    config.validate()?;
    let svi = load_svi_csv(&a.svi)?;
    let prices = load_price_csv(&a.prices)?;
    let mut manifest = RunManifest::new("backtest", config, &[&a.svi, &a.prices], a.seed.seed);
    if let Some(keyword) = &a.keyword {
        let fixtures = match &a.keywords {
            Some(path) => load_keyword_fixtures(path)?,
            None => bundled_keywords(),
        };
        let fixture = fixtures
            .iter()
            .find(|f| f.keyword == *keyword)
            .ok_or_else(|| Error::InvalidConfig(format!("keyword {keyword:?} is not in the fixture list")))?;
        if let Admission::Biased { watermark } = admit(fixture, svi.starts()[0], a.allow_anachronistic)? {
            eprintln!("warning: {watermark}");
            manifest.watermark = Some(watermark);
        }
    }
    let returns = weekly_returns(&prices)?;
    let pipeline = Pipeline::new(config)?;
    let result = pipeline.run(&svi, &returns)?;

    let mut summary = result_summary(&result);
    let mut payloads = vec![("result.csv", result_csv(&result))];
    if let Some(date) = a.split {
        let split = SplitSpec::at(date);
        let (is, oos) = split_backtest(&svi, &returns, &pipeline, &split)?;
        summary["split"] = json!({
            "in_sample_end": split.in_sample_end().to_string(),
            "out_of_sample_start": split.out_sample_start().to_string(),
            "in_sample": result_summary(&is),
            "out_of_sample": result_summary(&oos),
        });
        payloads.push(("result_in_sample.csv", result_csv(&is)));
        payloads.push(("result_out_of_sample.csv", result_csv(&oos)));
    }
    if let Some(w) = &manifest.watermark {
        summary["watermark"] = json!(w);
    }
    summary["manifest"] = json!(manifest);
    payloads.push(("summary.json", to_json(&summary)));
    write_outputs(&a.out, &manifest, &payloads)?;
    println!(
        "{} weeks, t_stat_gross {}, t_stat_net {}",
        result.n,
        t_json(result.t_stat_gross),
        t_json(result.t_stat_net)
    );
    Ok(())
}

pub fn sweep(a: SweepArgs) -> CliResult {
    if a.k_min > a.k_max {
        return Err(Error::InvalidConfig(format!("k_min {} exceeds k_max {}", a.k_min, a.k_max)));
    }
    let config = a.strategy.config().with_k(a.k_min);
    config.validate()?;
    let svi = load_svi_csv(&a.svi)?;
    let returns = weekly_returns(&load_price_csv(&a.prices)?)?;
    let rows = sweep_k(&svi, &returns, &config, a.k_min..=a.k_max)?;
    let cell = |t: TStat| t.value().map(num).unwrap_or_default();
    let body = to_csv(
        &["k", "t_stat_gross", "t_stat_net", "n"],
        rows.iter()
            .map(|r| vec![r.k.to_string(), cell(r.t_stat_gross), cell(r.t_stat_net), r.n.to_string()]),
    );
    let manifest = RunManifest::new("sweep", config, &[&a.svi, &a.prices], a.seed.seed);
    write_outputs(&a.out, &manifest, &[("sweep.csv", body)])?;
    println!("{} rows for k in {}..={}", rows.len(), a.k_min, a.k_max);
    Ok(())
}

pub fn nullcheck(a: NullArgs) -> CliResult {
    if a.trials < MIN_TRIALS {
        return Err(Error::InvalidConfig(format!(
            "a null study needs at least {MIN_TRIALS} trials, got {}",
            a.trials
        )));
    }
    let strategy = a.strategy.config();
    strategy.validate()?;
    let mut study = NullStudyConfig::iid(a.trials, strategy.k, a.weeks, a.seed.seed);
    study.strategy = strategy;
    let mut inputs = Vec::new();
    if let Some(path) = &a.prices {
        study.target = NullTarget::Series(weekly_returns(&load_price_csv(path)?)?);
        inputs.push(path.as_path());
    } else {
        study.target = NullTarget::Synthetic(SyntheticSpec::returns(
            a.weeks + strategy.k,
            Generator::IidGaussian,
            0,
            0.0,
            0.02,
        ));
    }
    let result = null_study(&study)?;

    let usable = result.t_stats.len() as f64;
    let mean_limit = 3.0 / usable.sqrt();
    let tail_limit = 3.0 * (0.05 * 0.95 / usable).sqrt();
    let consistent = result.mean.abs() <= mean_limit && (result.frac_above_195 - 0.05).abs() <= tail_limit;
    let manifest = RunManifest::new("nullcheck", strategy, &inputs, a.seed.seed);
    let mut csv = Vec::new();
    result.write_csv(&mut csv).expect("in-memory write");
    let summary = json!({
        "trials": result.trials.len(),
        "degenerate": result.degenerate,
        "mean": result.mean,
        "stdev": result.stdev,
        "frac_above_195": result.frac_above_195,
        "tail_threshold": TAIL_THRESHOLD,
        "top": result.top,
        "bottom": result.bottom,
        "verdict": if consistent { "PASS" } else { "FAIL" },
        "verdict_rule": {
            "max_abs_mean": mean_limit,
            "tail_fraction_range": [0.05 - tail_limit, 0.05 + tail_limit],
        },
        "manifest": manifest,
    });
    write_outputs(&a.out, &manifest, &[("null.csv", csv), ("null_summary.json", to_json(&summary))])?;
    println!(
        "{} trials: mean {:.4}, stdev {}, |t|>{TAIL_THRESHOLD} fraction {:.4}, {}",
        result.trials.len(),
        result.mean,
        result.stdev.map_or("n/a".into(), |s| format!("{s:.4}")),
        result.frac_above_195,
        if consistent { "PASS" } else { "FAIL" }
    );
    Ok(())
}

pub fn keywords(a: KeywordArgs) -> CliResult {
    let fixtures = match &a.fixtures {
        Some(path) => load_keyword_fixtures(path)?,
        None => bundled_keywords(),
    };
    let gate = availability_gate(&fixtures, a.start);
    let counts = |list| -> BTreeMap<&'static str, usize> {
        category_counts(list).into_iter().map(|(c, n)| (c.as_str(), n)).collect()
    };
    for f in &gate.usable {
        println!("usable\t{}\t{}", f.category.as_str(), f.keyword);
    }
    for f in &gate.anachronistic {
        println!("anachronistic\t{}\t{}\t{}", f.category.as_str(), f.keyword, f.availability_date);
    }
    let usable_counts = counts(&gate.usable);
    let late_counts = counts(&gate.anachronistic);
    println!("usable: {}", gate.usable.len());
    for (c, n) in &usable_counts {
        println!("  {c}: {n}");
    }
    println!("anachronistic: {}", gate.anachronistic.len());
    for (c, n) in &late_counts {
        println!("  {c}: {n}");
    }
    if let Some(dir) = &a.out {
        let inputs: Vec<&std::path::Path> = a.fixtures.iter().map(|p| p.as_path()).collect();
        let manifest = RunManifest::new("keywords", StrategyConfig::default(), &inputs, 0);
        let report = json!({
            "start": a.start.to_string(),
            "usable_counts": usable_counts,
            "anachronistic_counts": late_counts,
            "usable": gate.usable,
            "anachronistic": gate.anachronistic,
            "manifest": manifest,
        });
        write_outputs(dir, &manifest, &[("gate.json", to_json(&report))])?;
    }
    Ok(())
}
