//! Backtest hygiene: null calibration, randomisation bug checks, causality
//! audits, keyword availability gating and in/out-of-sample splits.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{derive_seed, generate, Generator, KeywordFixture, SyntheticSpec};
use crate::series::{gt_week_for, weekly_returns, AccessLog, DailyPriceSeries, Unit, WeekKind, WeeklySeries};
use crate::stats::{mean_sd, BacktestResult, TStat};
use crate::strategy::{Pipeline, StrategyConfig};

/// |z| threshold whose two-sided tail is about 5% for a standard normal.
pub const TAIL_THRESHOLD: f64 = 1.95;

/// Returns the strategy is scored against in a null study.
#[derive(Debug, Clone, PartialEq)]
pub enum NullTarget {
    /// Same returns for every trial.
    Series(WeeklySeries),
    /// Fresh returns per trial.
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullStudyConfig {
    pub n_trials: usize,
    /// Search-series template; the seed is replaced per trial. When the target
    /// is a fixed series, start and length are fitted to it.
    pub generator: SyntheticSpec,
    pub strategy: StrategyConfig,
    pub target: NullTarget,
    pub master_seed: u64,
}

impl NullStudyConfig {
    /// Below this many trials summary statistics are not meaningful.
    pub const MIN_DISTRIBUTIONAL_TRIALS: usize = 100;

    /// Gaussian search noise against iid Gaussian returns.
    pub fn iid(n_trials: usize, k: usize, weeks: usize, master_seed: u64) -> Self {
        Self {
            n_trials,
            generator: SyntheticSpec::svi(weeks + k, Generator::IidGaussian, 0, 50.0, 10.0),
            strategy: StrategyConfig::default().with_k(k),
            target: NullTarget::Synthetic(SyntheticSpec::returns(weeks + k, Generator::IidGaussian, 0, 0.0, 0.02)),
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("a null study needs at least one trial".into()));
        }
        if self.generator.kind != WeekKind::GtWeek {
            return Err(Error::InvalidConfig("null generator must produce search weeks".into()));
        }
        self.strategy.validate()
    }

    fn fitted_generator(&self) -> SyntheticSpec {
        match &self.target {
            NullTarget::Synthetic(_) => self.generator,
            NullTarget::Series(r) => {
                let first = r.starts()[0];
                let last = *r.starts().last().expect("non-empty");
                let span = ((last - first).num_days() / 7) as usize + 1;
                SyntheticSpec {
                    start: gt_week_for(first) - Duration::weeks(self.strategy.k as i64),
                    length_weeks: span + self.strategy.k,
                    ..self.generator
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub t_stat: TStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudyResult {
    pub trials: Vec<TrialOutcome>,
    /// t statistics of the non-degenerate trials, in trial order.
    pub t_stats: Vec<f64>,
    pub degenerate: usize,
    pub mean: f64,
    /// `None` with fewer than two usable trials.
    pub stdev: Option<f64>,
    pub frac_above_195: f64,
    /// Three largest (trial, z), descending.
    pub top: Vec<(usize, f64)>,
    /// Three smallest (trial, z), ascending.
    pub bottom: Vec<(usize, f64)>,
}

impl NullStudyResult {
    fn from_trials(trials: Vec<TrialOutcome>) -> Result<Self> {
        let usable: Vec<(usize, f64)> = trials
            .iter()
            .filter_map(|t| t.t_stat.value().map(|z| (t.trial, z)))
            .collect();
        if usable.is_empty() {
            return Err(Error::DegenerateStudy { trials: trials.len() });
        }
        let t_stats: Vec<f64> = usable.iter().map(|(_, z)| *z).collect();
        let n = t_stats.len();
        let (mean, sd) = mean_sd(&t_stats);
        let above = t_stats.iter().filter(|z| z.abs() > TAIL_THRESHOLD).count();
        let mut sorted = usable.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top = sorted.iter().take(3).copied().collect();
        let bottom = sorted.iter().rev().take(3).copied().collect();
        Ok(Self {
            degenerate: trials.len() - n,
            trials,
            mean,
            stdev: (n >= 2).then_some(sd),
            frac_above_195: above as f64 / n as f64,
            top,
            bottom,
            t_stats,
        })
    }

    /// Largest |z| over all usable trials.
    pub fn max_abs(&self) -> f64 {
        self.t_stats.iter().fold(0.0, |m, z| m.max(z.abs()))
    }

    /// `trial,seed,t_stat`; degenerate trials have an empty `t_stat`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "seed", "t_stat"])?;
        for t in &self.trials {
            let z = t.t_stat.value().map(|z| z.to_string()).unwrap_or_default();
            w.write_record([t.trial.to_string(), t.seed.to_string(), z])?;
        }
        w.flush()
    }
}

/// Runs the strategy on `n_trials` independent synthetic search series.
pub fn null_study(config: &NullStudyConfig) -> Result<NullStudyResult> {
    config.validate()?;
    let pipeline = Pipeline::new(config.strategy)?;
    let generator = config.fitted_generator();
    let trials: Vec<TrialOutcome> = (0..config.n_trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.master_seed, trial as u64);
            let svi = generate(&generator.with_seed(seed))?;
            let outcome = match &config.target {
                NullTarget::Series(r) => pipeline.run(&svi, r),
                NullTarget::Synthetic(spec) => {
                    let r = generate(&spec.with_seed(derive_seed(seed, u64::MAX)))?;
                    pipeline.run(&svi, &r)
                }
            };
            let t_stat = match outcome {
                Ok(res) => res.t_stat_gross,
                Err(Error::NoVariance) => TStat::NoVariance,
                Err(e) => return Err(e),
            };
            Ok(TrialOutcome { trial, seed, t_stat })
        })
        .collect::<Result<_>>()?;
    NullStudyResult::from_trials(trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Real search data against permuted returns.
    ShuffledReturns,
    /// Permuted search data against real returns.
    ShuffledSvi,
    Both,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::ShuffledReturns, Arm::ShuffledSvi, Arm::Both];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Randomization {
    /// Permute the observed values.
    #[default]
    Shuffle,
    /// Replace by iid Gaussian draws with the observed mean and sd.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub t_stats: Vec<f64>,
    pub degenerate: usize,
    pub mean: f64,
    /// Allowed |mean|, `3 / sqrt(usable trials)`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugCheckReport {
    pub arms: Vec<ArmResult>,
    pub verdict: Verdict,
}

fn randomize(series: &WeeklySeries, mode: Randomization, rng: &mut ChaCha8Rng) -> Result<WeeklySeries> {
    let mut values = series.values().to_vec();
    match mode {
        Randomization::Shuffle => values.shuffle(rng),
        Randomization::Gaussian => {
            let (mean, sd) = mean_sd(&values);
            let sd = if sd.is_finite() { sd } else { 0.0 };
            let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for v in &mut values {
                *v = normal.sample(rng);
                if series.unit() == Unit::SviPoints {
                    *v = v.clamp(0.0, 100.0);
                }
            }
        }
    }
    series.with_values(values)
}

/// Randomisation check: if the pipeline still "performs" once either input
/// is replaced by noise, it is reading information it should not have.
///
/// Each arm runs `n_trials` backtests; an arm passes when the mean t
/// statistic lies within `3 / sqrt(n)` of zero.
pub fn randomization_bug_check(
    svi: &WeeklySeries,
    returns: &WeeklySeries,
    pipeline: &Pipeline,
    n_trials: usize,
    master_seed: u64,
    mode: Randomization,
) -> Result<BugCheckReport> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("bug check needs at least one trial per arm".into()));
    }
    // fail fast on inputs the pipeline cannot run at all
    match pipeline.run(svi, returns) {
        Ok(_) | Err(Error::NoVariance) => {}
        Err(e) => return Err(e),
    }
    let arms = Arm::ALL
        .iter()
        .enumerate()
        .map(|(arm_index, &arm)| {
            let arm_seed = derive_seed(master_seed, arm_index as u64);
            let outcomes: Vec<TStat> = (0..n_trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(arm_seed, trial as u64));
                    let s = match arm {
                        Arm::ShuffledReturns => svi.clone(),
                        _ => randomize(svi, mode, &mut rng)?,
                    };
                    let r = match arm {
                        Arm::ShuffledSvi => returns.clone(),
                        _ => randomize(returns, mode, &mut rng)?,
                    };
                    Ok(match pipeline.run(&s, &r) {
                        Ok(res) => res.t_stat_gross,
                        Err(Error::NoVariance) => TStat::NoVariance,
                        Err(e) => return Err(e),
                    })
                })
                .collect::<Result<_>>()?;
            let t_stats: Vec<f64> = outcomes.iter().filter_map(|t| t.value()).collect();
            let degenerate = outcomes.len() - t_stats.len();
            let (mean, threshold, pass) = if t_stats.is_empty() {
                (f64::NAN, f64::NAN, false)
            } else {
                let mean = t_stats.iter().sum::<f64>() / t_stats.len() as f64;
                let threshold = 3.0 / (t_stats.len() as f64).sqrt();
                (mean, threshold, mean.abs() <= threshold)
            };
            Ok(ArmResult {
                arm,
                t_stats,
                degenerate,
                mean,
                threshold,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if arms.iter().all(|a| a.pass) { Verdict::Pass } else { Verdict::Fail };
    Ok(BugCheckReport { arms, verdict })
}

pub fn randomization_bug_check_prices(
    svi: &WeeklySeries,
    prices: &DailyPriceSeries,
    config: &StrategyConfig,
    n_trials: usize,
    master_seed: u64,
) -> Result<BugCheckReport> {
    let returns = weekly_returns(prices)?;
    randomization_bug_check(svi, &returns, &Pipeline::new(*config)?, n_trials, master_seed, Randomization::Shuffle)
}

/// A steadily rising, integer-quantised search series on a rising market.
///
/// The search level climbs 4 points every `2k` weeks and is flat in between,
/// as a slowly growing keyword looks once rounded to whole points. With the
/// correct lag the strategy is short for exactly half of every step cycle, so
/// its positions carry no net market exposure. Any change to the baseline
/// window shifts that balance, which a drifting market then turns into
/// persistent "performance" under randomisation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendingFixture {
    pub svi: WeeklySeries,
    pub returns: WeeklySeries,
    pub k: usize,
}

pub fn trending_fixture(k: usize, cycles: usize, seed: u64) -> Result<TrendingFixture> {
    if k == 0 || cycles == 0 || 4 * cycles > 100 {
        return Err(Error::InvalidConfig("trending fixture needs k >= 1 and 1..=25 cycles".into()));
    }
    let period = 2 * k;
    let n = k + period * cycles;
    let svi_values: Vec<f64> = (0..n).map(|t| (4 * ((t + k) / period)) as f64).collect();
    let svi = WeeklySeries::contiguous(
        WeekKind::GtWeek,
        Unit::SviPoints,
        NaiveDate::from_ymd_opt(2004, 1, 4).expect("valid date"),
        svi_values,
    )?;
    let ret_spec = SyntheticSpec {
        start: svi.starts()[0] + Duration::days(8),
        ..SyntheticSpec::returns(n, Generator::IidGaussian, seed, 0.003, 0.02)
    };
    let returns = generate(&ret_spec)?;
    Ok(TrendingFixture { svi, returns, k })
}

/// Outcome of running a backtest entirely through logged views.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    pub log: AccessLog,
    pub violations: usize,
    /// Audited positions equal the fast path's positions.
    pub matches_fast_path: bool,
    pub result: BacktestResult,
}

pub fn causality_audit(svi: &WeeklySeries, returns: &WeeklySeries, pipeline: &Pipeline) -> Result<CausalityReport> {
    let (signals, mut log) = pipeline.audited_signals(svi, "svi")?;
    let fast = pipeline.signals(svi)?;
    let matches_fast_path = fast.len() == signals.len()
        && fast
            .iter()
            .zip(&signals)
            .all(|(a, b)| a.gt_week == b.gt_week && a.position == b.position);
    let result = pipeline.run_signals(svi, &signals, returns)?;
    // settlement reads: each return is read when its trade week closes
    for w in &result.weeks {
        let friday = w.trade_week + Duration::days(4);
        let mut view = crate::series::logged_view(returns, "returns", friday);
        let _ = view.get(w.trade_week);
        log.absorb(view.into_log());
    }
    Ok(CausalityReport {
        violations: log.violation_count(),
        log,
        matches_fast_path,
        result,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub usable: Vec<KeywordFixture>,
    pub anachronistic: Vec<KeywordFixture>,
}

/// Splits fixtures into those known before `backtest_start` and those that are not.
pub fn availability_gate(fixtures: &[KeywordFixture], backtest_start: NaiveDate) -> GateReport {
    let (anachronistic, usable) = fixtures
        .iter()
        .cloned()
        .partition(|f| f.availability_date >= backtest_start);
    GateReport { usable, anachronistic }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admission {
    Clean,
    /// Allowed by explicit override; every output must carry this watermark.
    Biased { watermark: String },
}

pub fn admit(fixture: &KeywordFixture, backtest_start: NaiveDate, allow_anachronistic: bool) -> Result<Admission> {
    if fixture.availability_date < backtest_start {
        return Ok(Admission::Clean);
    }
    if !allow_anachronistic {
        return Err(Error::Anachronistic {
            keyword: fixture.keyword.clone(),
            available: fixture.availability_date,
            start: backtest_start,
        });
    }
    Ok(Admission::Biased {
        watermark: format!(
            "BIASED: keyword {:?} was only available from {}, after the backtest start {}",
            fixture.keyword, fixture.availability_date, backtest_start
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    in_sample_end: NaiveDate,
    out_sample_start: NaiveDate,
}

impl SplitSpec {
    pub fn new(in_sample_end: NaiveDate, out_sample_start: NaiveDate) -> Result<Self> {
        if out_sample_start <= in_sample_end {
            return Err(Error::InvalidSplit(format!(
                "out-of-sample start {out_sample_start} must be after in-sample end {in_sample_end}"
            )));
        }
        Ok(Self {
            in_sample_end,
            out_sample_start,
        })
    }

    /// Split at the first Monday on or after `date`; the in-sample period
    /// ends the day before.
    pub fn at(date: NaiveDate) -> Self {
        let ahead = (7 - date.weekday().num_days_from_monday() as i64) % 7;
        let out_sample_start = date + Duration::days(ahead);
        Self {
            in_sample_end: out_sample_start - Duration::days(1),
            out_sample_start,
        }
    }

    pub fn in_sample_end(&self) -> NaiveDate {
        self.in_sample_end
    }

    pub fn out_sample_start(&self) -> NaiveDate {
        self.out_sample_start
    }
}

/// Independent in-sample and out-of-sample backtests.
///
/// Return weeks are assigned by their Monday..Friday span and never cross
/// the boundary. Out-of-sample signals may use search values from before
/// the boundary to warm up their baseline; search data is exogenous and
/// nothing is fitted in-sample.
pub fn split_backtest(
    svi: &WeeklySeries,
    returns: &WeeklySeries,
    pipeline: &Pipeline,
    split: &SplitSpec,
) -> Result<(BacktestResult, BacktestResult)> {
    for &monday in returns.starts() {
        let friday = monday + Duration::days(4);
        if monday <= split.in_sample_end && friday > split.in_sample_end
            || monday < split.out_sample_start && friday >= split.out_sample_start
        {
            return Err(Error::InvalidSplit(format!("trade week {monday} straddles the split boundary")));
        }
    }
    let signals = pipeline.signals(svi)?;
    let first = returns.starts().first().copied().ok_or(Error::EmptySeries)?;
    let last = returns.starts().last().copied().ok_or(Error::EmptySeries)?;
    let in_returns = returns.restrict(first, split.in_sample_end - Duration::days(4));
    let out_returns = returns.restrict(split.out_sample_start, last);
    let segment = |r: &WeeklySeries| -> Result<BacktestResult> {
        if r.is_empty() {
            return Err(Error::InsufficientHistory { needed: 2, available: 0 });
        }
        pipeline.run_signals(svi, &signals, r).map_err(|e| match e {
            Error::NoOverlap => Error::InsufficientHistory { needed: 2, available: 0 },
            other => other,
        })
    };
    Ok((segment(&in_returns)?, segment(&out_returns)?))
}

/// Per-set extremes in the layout of a keyword t-stat table: the three best
/// and three worst t statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetExtremes {
    pub set_size: usize,
    pub best: Vec<f64>,
    pub worst: Vec<f64>,
    pub max_abs: f64,
}

impl From<&NullStudyResult> for SetExtremes {
    fn from(r: &NullStudyResult) -> Self {
        Self {
            set_size: r.trials.len(),
            best: r.top.iter().map(|x| x.1).collect(),
            worst: r.bottom.iter().map(|x| x.1).collect(),
            max_abs: r.max_abs(),
        }
    }
}

/// Null keyword sets of the given sizes scored against one shared return
/// series, the way a list of keywords is scored against one index.
pub fn keyword_set_study(
    set_sizes: &[usize],
    returns: &WeeklySeries,
    strategy: StrategyConfig,
    master_seed: u64,
) -> Result<Vec<SetExtremes>> {
    set_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = NullStudyConfig {
                n_trials: n,
                generator: SyntheticSpec::svi(1, Generator::IidGaussian, 0, 50.0, 10.0),
                strategy,
                target: NullTarget::Series(returns.clone()),
                master_seed: derive_seed(master_seed, i as u64),
            };
            null_study(&cfg).map(|r| SetExtremes::from(&r))
        })
        .collect()
}
