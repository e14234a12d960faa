//! The search-volume surprise strategy.
//!
//! For week `t` the baseline is the mean of the `k` search values ending at
//! `t`. The surprise compares the current value with the previous week's
//! baseline, and the contrarian position for the next trade week is short
//! after a positive surprise, long otherwise.

use std::ops::RangeInclusive;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{
    align, logged_view, weekly_returns, AccessLog, DailyPriceSeries, LoggedView, WeekKind, WeeklySeries,
};
use crate::stats::{BacktestResult, CostModel, TStat, WeekRecord};

/// Unit-notional position: -1 short, 0 flat, +1 long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct Position(i8);

impl Position {
    pub const SHORT: Position = Position(-1);
    pub const FLAT: Position = Position(0);
    pub const LONG: Position = Position(1);

    pub fn new(value: i8) -> Result<Self> {
        match value {
            -1..=1 => Ok(Position(value)),
            _ => Err(Error::InvalidConfig(format!("position must be -1, 0 or 1, got {value}"))),
        }
    }

    pub fn get(self) -> i8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn flipped(self) -> Self {
        Position(-self.0)
    }
}

impl TryFrom<i8> for Position {
    type Error = Error;

    fn try_from(value: i8) -> Result<Self> {
        Position::new(value)
    }
}

impl From<Position> for i8 {
    fn from(p: Position) -> i8 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Short iff `v_t > baseline`, long otherwise (equality goes long).
    #[default]
    Reference,
    /// Flat when `|delta| <= epsilon`, else `-sign(delta)`.
    Deadband,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Baseline window length in weeks.
    pub k: usize,
    pub tie_policy: TiePolicy,
    /// Dead-band half-width in search points; ignored by the reference policy.
    pub epsilon: f64,
    pub invert: bool,
    /// Cost per trade in basis points.
    pub cost_bps: f64,
    pub cost_model: CostModel,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            k: 10,
            tie_policy: TiePolicy::Reference,
            epsilon: 0.0,
            invert: false,
            cost_bps: 2.0,
            cost_model: CostModel::RoundTrip,
        }
    }
}

impl StrategyConfig {
    pub fn with_k(self, k: usize) -> Self {
        Self { k, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.cost_bps.is_finite() && self.cost_bps >= 0.0) {
            return Err(Error::InvalidConfig(format!("cost_bps must be >= 0, got {}", self.cost_bps)));
        }
        Ok(())
    }
}

/// One week of signal: the search value, the baseline it is compared with,
/// the surprise and the position held during the following trade week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub gt_week: NaiveDate,
    pub v: f64,
    pub baseline_prev: f64,
    pub delta: f64,
    pub position: Position,
}

/// Mean of each length-`k` window, `out[j] = mean(values[j..j + k])`.
///
/// Sliding sum with Neumaier compensation so long series do not drift.
fn window_means(values: &[f64], k: usize) -> Vec<f64> {
    if values.len() < k {
        return Vec::new();
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |x: f64| {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        sum + comp
    };
    let kf = k as f64;
    let mut out = Vec::with_capacity(values.len() - k + 1);
    let mut total = 0.0;
    for &x in &values[..k] {
        total = add(x);
    }
    out.push(total / kf);
    for i in k..values.len() {
        add(values[i]);
        total = add(-values[i - k]);
        out.push(total / kf);
    }
    out
}

/// Right-aligned `k`-week mean; entry `j` of the result is labelled with week `j + k - 1`.
pub fn rolling_baseline(svi: &WeeklySeries, k: usize) -> Result<WeeklySeries> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if svi.len() < k {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: svi.len(),
        });
    }
    let means = window_means(svi.values(), k);
    WeeklySeries::new(svi.kind(), svi.unit(), svi.starts()[k - 1..].to_vec(), means)
}

/// Which baseline the surprise is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineLag {
    /// `delta_t = v_t - baseline_{t-1}`.
    #[default]
    Previous,
    /// `delta_t = v_t - baseline_t`: the window includes `v_t` itself.
    /// Only for fault-injection checks of the hygiene tooling.
    Disabled,
}

fn surprise_with(svi: &WeeklySeries, k: usize, lag: BaselineLag) -> Result<Vec<SignalRecord>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if svi.kind() != WeekKind::GtWeek {
        return Err(Error::InvalidConfig("surprise expects a search-week series".into()));
    }
    let needed = match lag {
        BaselineLag::Previous => k + 1,
        BaselineLag::Disabled => k,
    };
    if svi.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: svi.len(),
        });
    }
    let values = svi.values();
    let means = window_means(values, k);
    // means[j] covers values[j..j+k]; for week t the lagged baseline is means[t-k]
    let offset = match lag {
        BaselineLag::Previous => k,
        BaselineLag::Disabled => k - 1,
    };
    Ok((offset..values.len())
        .map(|t| {
            let baseline = means[t - offset];
            SignalRecord {
                gt_week: svi.starts()[t],
                v: values[t],
                baseline_prev: baseline,
                delta: values[t] - baseline,
                position: Position::FLAT,
            }
        })
        .collect())
}

/// Surprise for every week with a previous baseline; positions are left flat.
pub fn surprise(svi: &WeeklySeries, k: usize) -> Result<Vec<SignalRecord>> {
    surprise_with(svi, k, BaselineLag::Previous)
}

pub fn position_for(record: &SignalRecord, config: &StrategyConfig) -> Position {
    let raw = match config.tie_policy {
        TiePolicy::Reference => {
            if record.v > record.baseline_prev {
                Position::SHORT
            } else {
                Position::LONG
            }
        }
        TiePolicy::Deadband => {
            if record.delta.abs() <= config.epsilon {
                Position::FLAT
            } else if record.delta > 0.0 {
                Position::SHORT
            } else {
                Position::LONG
            }
        }
    };
    if config.invert {
        raw.flipped()
    } else {
        raw
    }
}

pub fn positions(records: &[SignalRecord], config: &StrategyConfig) -> Vec<SignalRecord> {
    records
        .iter()
        .map(|r| SignalRecord {
            position: position_for(r, config),
            ..*r
        })
        .collect()
}

/// Signal construction plus backtest, with an optional injected fault.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    config: StrategyConfig,
    lag: BaselineLag,
}

impl Pipeline {
    pub fn new(config: StrategyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lag: BaselineLag::Previous,
        })
    }

    /// Deliberately broken pipeline whose baseline window includes the current week.
    pub fn with_unlagged_baseline(config: StrategyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lag: BaselineLag::Disabled,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn baseline_lag(&self) -> BaselineLag {
        self.lag
    }

    pub fn signals(&self, svi: &WeeklySeries) -> Result<Vec<SignalRecord>> {
        let records = surprise_with(svi, self.config.k, self.lag)?;
        Ok(positions(&records, &self.config))
    }

    /// Same signals as [`Pipeline::signals`], computed week by week through
    /// logged views.
    ///
    /// The current value is read through a view ending on the Saturday that
    /// closes week `t`; the baseline, which belongs to week `t - 1`, is read
    /// through a view ending the day before week `t` starts. Reads past either
    /// horizon are logged as violations and the computation continues with
    /// the stored value so the whole run is audited.
    pub fn audited_signals(&self, svi: &WeeklySeries, series_id: &str) -> Result<(Vec<SignalRecord>, AccessLog)> {
        let k = self.config.k;
        let first = match self.lag {
            BaselineLag::Previous => k,
            BaselineLag::Disabled => k - 1,
        };
        if svi.len() <= first {
            return Err(Error::InsufficientHistory {
                needed: first + 1,
                available: svi.len(),
            });
        }
        let mut log = AccessLog::default();
        let mut records = Vec::with_capacity(svi.len() - first);
        let read = |view: &mut LoggedView<'_>, date: NaiveDate| -> f64 {
            match view.get(date) {
                Ok(Some(v)) => v,
                _ => svi.get(date).unwrap_or(f64::NAN),
            }
        };
        for t in first..svi.len() {
            let label = svi.label(t);
            let mut decision = logged_view(svi, series_id, label.end());
            let v = read(&mut decision, label.start());
            let mut history = logged_view(svi, series_id, label.start() - Duration::days(1));
            let window_end = match self.lag {
                BaselineLag::Previous => t - 1,
                BaselineLag::Disabled => t,
            };
            let mut sum = 0.0;
            for j in window_end + 1 - k..=window_end {
                sum += read(&mut history, svi.starts()[j]);
            }
            let baseline = sum / k as f64;
            log.absorb(decision.into_log());
            log.absorb(history.into_log());
            let rec = SignalRecord {
                gt_week: label.start(),
                v,
                baseline_prev: baseline,
                delta: v - baseline,
                position: Position::FLAT,
            };
            records.push(SignalRecord {
                position: position_for(&rec, &self.config),
                ..rec
            });
        }
        Ok((records, log))
    }

    pub fn run(&self, svi: &WeeklySeries, returns: &WeeklySeries) -> Result<BacktestResult> {
        let signals = self.signals(svi)?;
        self.run_signals(svi, &signals, returns)
    }

    /// Backtest precomputed signals for `svi` against `returns`.
    pub fn run_signals(
        &self,
        svi: &WeeklySeries,
        signals: &[SignalRecord],
        returns: &WeeklySeries,
    ) -> Result<BacktestResult> {
        let pairs = align(svi, returns)?;
        let first_signal = match signals.first() {
            Some(s) => s.gt_week,
            None => {
                return Err(Error::InsufficientHistory {
                    needed: self.config.k + 1,
                    available: svi.len(),
                })
            }
        };
        // signals are contiguous weekly records starting at first_signal
        let weeks: Vec<WeekRecord> = pairs
            .iter()
            .filter(|p| p.gt_week >= first_signal)
            .filter_map(|p| {
                let idx = ((p.gt_week - first_signal).num_days() / 7) as usize;
                signals.get(idx).map(|s| {
                    debug_assert_eq!(s.gt_week, p.gt_week);
                    WeekRecord::new(p.gt_week, p.trade_week, s.position, returns.values()[p.return_index])
                })
            })
            .collect();
        if weeks.len() < 2 {
            return Err(Error::InsufficientHistory {
                needed: 2,
                available: weeks.len(),
            });
        }
        BacktestResult::from_weeks(weeks, self.config.cost_bps, self.config.cost_model)
    }
}

pub fn run_backtest_on_returns(
    svi: &WeeklySeries,
    returns: &WeeklySeries,
    config: &StrategyConfig,
) -> Result<BacktestResult> {
    Pipeline::new(*config)?.run(svi, returns)
}

/// Full pipeline from daily prices.
pub fn run_backtest(
    svi: &WeeklySeries,
    prices: &DailyPriceSeries,
    config: &StrategyConfig,
) -> Result<BacktestResult> {
    let returns = weekly_returns(prices)?;
    run_backtest_on_returns(svi, &returns, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub t_stat_gross: TStat,
    pub t_stat_net: TStat,
    pub n: usize,
    /// Set when this `k` could not be backtested (not enough history).
    pub gap: Option<String>,
}

/// One backtest per `k`, other settings fixed. Rows are ordered by `k`.
pub fn sweep_k(
    svi: &WeeklySeries,
    returns: &WeeklySeries,
    base: &StrategyConfig,
    ks: RangeInclusive<usize>,
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::InvalidConfig("empty k range".into()));
    }
    base.with_k(*ks.start()).validate()?;
    let ks: Vec<usize> = ks.collect();
    ks.par_iter()
        .map(|&k| match run_backtest_on_returns(svi, returns, &base.with_k(k)) {
            Ok(r) => Ok(SweepRow {
                k,
                t_stat_gross: r.t_stat_gross,
                t_stat_net: r.t_stat_net,
                n: r.n,
                gap: None,
            }),
            Err(e @ Error::InsufficientHistory { .. }) => Ok(SweepRow {
                k,
                t_stat_gross: TStat::InsufficientData,
                t_stat_net: TStat::InsufficientData,
                n: 0,
                gap: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect()
}
