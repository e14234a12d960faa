mod common;

use chrono::Duration;
use trendlab_core::hygiene::{
    keyword_set_study, randomization_bug_check, split_backtest, trending_fixture, Arm, Randomization, SplitSpec,
    Verdict,
};
use trendlab_core::ingest::{derive_seed, generate, Generator, SyntheticSpec};
use trendlab_core::series::{logged_view, weekly_returns};
use trendlab_core::strategy::{run_backtest, sweep_k};
use trendlab_core::{Error, Pipeline, StrategyConfig};

use common::{oracle, random_fixture};

#[test]
fn two_hundred_weeks_bitwise_equal_to_reference() {
    let fx = random_fixture(2013, 200);
    let expected = oracle(&fx, 10);
    let got = run_backtest(&fx.engine_svi(), &fx.engine_prices(), &StrategyConfig::default()).unwrap();
    let engine: Vec<_> = got.weeks.iter().map(|w| (w.trade_week, w.gross.to_bits())).collect();
    let reference: Vec<_> = expected.perf.iter().map(|(m, p)| (*m, p.to_bits())).collect();
    assert_eq!(engine, reference);
}

#[test]
fn noise_sweep_stays_in_bounds() {
    let svi = generate(&SyntheticSpec::svi(530, Generator::IidGaussian, 17, 50.0, 10.0)).unwrap();
    let returns = generate(&SyntheticSpec::returns(530, Generator::IidGaussian, 18, 0.0, 0.02)).unwrap();
    let rows = sweep_k(&svi, &returns, &StrategyConfig::default(), 2..=30).unwrap();
    assert_eq!(rows.len(), 29);
    for r in &rows {
        let t = r.t_stat_gross.value().unwrap();
        assert!(t.abs() < 4.0, "k={} t={t}", r.k);
        assert_eq!(r.n, 530 - r.k);
    }
}

#[test]
fn logged_view_boundaries() {
    let svi = generate(&SyntheticSpec::svi(400, Generator::RandomWalk, 3, 50.0, 2.0)).unwrap();
    let as_of = common::d("2010-06-30");
    let mut view = logged_view(&svi, "svi", as_of);
    assert!(view.get(common::d("2010-06-27")).unwrap().is_some());
    assert_eq!(view.log().len(), 1);
    assert!(matches!(view.get(common::d("2010-07-04")), Err(Error::FutureAccess { .. })));
    assert_eq!(view.log().violation_count(), 1);
}

#[test]
fn split_three_hundred_and_one_hundred() {
    let fx = random_fixture(99, 400);
    let svi = fx.engine_svi();
    let returns = weekly_returns(&fx.engine_prices()).unwrap();
    let pipeline = Pipeline::new(StrategyConfig::default()).unwrap();
    let whole = pipeline.run(&svi, &returns).unwrap();
    // boundary on the trade week paired with search week 300
    let boundary = svi.starts()[300] + Duration::days(8);
    let (is, oos) = split_backtest(&svi, &returns, &pipeline, &SplitSpec::at(boundary)).unwrap();
    assert!(is.weeks.iter().all(|w| w.trade_week < boundary));
    assert!(oos.weeks.iter().all(|w| w.trade_week >= boundary));
    let expected_out = whole.weeks.iter().filter(|w| w.trade_week >= boundary).count();
    assert_eq!(oos.n, expected_out);
    let joined: Vec<f64> = is.gross_returns().into_iter().chain(oos.gross_returns()).collect();
    assert_eq!(joined, whole.gross_returns());
}

#[test]
fn unlagged_baseline_trips_shuffled_return_arm() {
    let fx = trending_fixture(10, 24, 8).unwrap();
    let bad = Pipeline::with_unlagged_baseline(StrategyConfig::default()).unwrap();
    let report = randomization_bug_check(&fx.svi, &fx.returns, &bad, 500, 1, Randomization::Shuffle).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    let arm = report.arms.iter().find(|a| a.arm == Arm::ShuffledReturns).unwrap();
    assert!(!arm.pass, "mean {}", arm.mean);
}

#[test]
fn correct_pipeline_passes_on_noise() {
    let svi = generate(&SyntheticSpec::svi(490, Generator::RandomWalk, 5, 50.0, 3.0)).unwrap();
    let returns = generate(&SyntheticSpec::returns(490, Generator::IidGaussian, 6, 0.002, 0.02)).unwrap();
    let good = Pipeline::new(StrategyConfig::default()).unwrap();
    let report = randomization_bug_check(&svi, &returns, &good, 500, 2, Randomization::Shuffle).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{:?}", report.arms.iter().map(|a| a.mean).collect::<Vec<_>>());
}

#[test]
fn null_keyword_sets_have_unremarkable_extremes() {
    // four keyword-like sets scored against one market series
    let index = generate(&SyntheticSpec::returns(490, Generator::IidGaussian, derive_seed(4, 4), 0.001, 0.025))
        .unwrap();
    let sets = keyword_set_study(&[200, 100, 100, 100], &index, StrategyConfig::default(), 77).unwrap();
    assert_eq!(sets.iter().map(|s| s.set_size).sum::<usize>(), 500);
    let mean_best = sets.iter().map(|s| s.max_abs).sum::<f64>() / sets.len() as f64;
    assert!((2.0..=3.0).contains(&mean_best), "{mean_best}");
    for s in &sets {
        assert_eq!(s.best.len(), 3);
        assert!(s.best.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.worst.windows(2).all(|w| w[0] <= w[1]));
    }
}
