//! Performance statistics and transaction-cost accounting.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::Position;

/// One-sample t statistic `mean / sd * sqrt(n)` with the `n - 1` standard deviation.
pub fn t_stat(returns: &[f64]) -> Result<f64> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientData { n });
    }
    if returns.iter().all(|&x| x == returns[0]) {
        return Err(Error::NoVariance);
    }
    let (mean, sd) = mean_sd(returns);
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::NoVariance);
    }
    Ok(mean / sd * (n as f64).sqrt())
}

/// Sample mean and `n - 1` standard deviation (two-pass).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// A t statistic that may be undefined for degenerate inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TStat {
    Value(f64),
    InsufficientData,
    NoVariance,
}

impl TStat {
    pub fn of(returns: &[f64]) -> Self {
        match t_stat(returns) {
            Ok(z) => TStat::Value(z),
            Err(Error::NoVariance) => TStat::NoVariance,
            Err(_) => TStat::InsufficientData,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            TStat::Value(z) => Some(z),
            _ => None,
        }
    }

    pub fn status(self) -> &'static str {
        match self {
            TStat::Value(_) => "ok",
            TStat::InsufficientData => "InsufficientData",
            TStat::NoVariance => "NoVariance",
        }
    }
}

/// How trades are counted for fees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Enter at Monday's close and exit at Friday's close every active week:
    /// two trades per unit of position, flat over weekends.
    #[default]
    RoundTrip,
    /// Trade only when the position changes; the final position is closed
    /// after the last week.
    HoldThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    pub gt_week: NaiveDate,
    pub trade_week: NaiveDate,
    pub position: Position,
    pub gross: f64,
    pub fee: f64,
    pub net: f64,
}

impl WeekRecord {
    pub fn new(gt_week: NaiveDate, trade_week: NaiveDate, position: Position, weekly_return: f64) -> Self {
        let gross = position.as_f64() * weekly_return;
        Self {
            gt_week,
            trade_week,
            position,
            gross,
            fee: 0.0,
            net: gross,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    /// Units of notional traded.
    pub trades: u64,
    pub total_fees: f64,
}

fn fee_for(units: u64, cost_bps: f64) -> f64 {
    // integer units times bps, divided last, so 2 bps x 2 trades is exactly 0.0004
    units as f64 * cost_bps / 10_000.0
}

/// Fills `fee` and `net` for every week.
pub fn apply_costs(weeks: &mut [WeekRecord], cost_bps: f64, model: CostModel) -> Result<CostSummary> {
    if !(cost_bps.is_finite() && cost_bps >= 0.0) {
        return Err(Error::InvalidConfig(format!("cost_bps must be >= 0, got {cost_bps}")));
    }
    let mut trades = 0u64;
    let mut prev = 0i64;
    let last = weeks.len().saturating_sub(1);
    for (i, week) in weeks.iter_mut().enumerate() {
        let pos = week.position.get() as i64;
        let units = match model {
            CostModel::RoundTrip => 2 * pos.unsigned_abs(),
            CostModel::HoldThrough => {
                let mut u = (pos - prev).unsigned_abs();
                if i == last {
                    u += pos.unsigned_abs();
                }
                u
            }
        };
        prev = pos;
        trades += units;
        week.fee = fee_for(units, cost_bps);
        week.net = week.gross - week.fee;
    }
    Ok(CostSummary {
        trades,
        total_fees: fee_for(trades, cost_bps),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Running arithmetic sum.
    #[default]
    Sum,
    /// Running product of `1 + r`, minus one.
    Compound,
}

pub fn cumulate(returns: &[f64], mode: Accumulation) -> Vec<f64> {
    match mode {
        Accumulation::Sum => returns
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect(),
        Accumulation::Compound => returns
            .iter()
            .scan(1.0, |acc, r| {
                *acc *= 1.0 + r;
                Some(*acc - 1.0)
            })
            .collect(),
    }
}

/// Per-week strategy outcome plus summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub weeks: Vec<WeekRecord>,
    pub t_stat_gross: TStat,
    pub t_stat_net: TStat,
    pub n: usize,
    pub cum_gross: Vec<f64>,
    pub cum_net: Vec<f64>,
    pub total_fees: f64,
    pub trades: u64,
}

impl BacktestResult {
    pub fn from_weeks(mut weeks: Vec<WeekRecord>, cost_bps: f64, model: CostModel) -> Result<Self> {
        let costs = apply_costs(&mut weeks, cost_bps, model)?;
        let gross: Vec<f64> = weeks.iter().map(|w| w.gross).collect();
        let net: Vec<f64> = weeks.iter().map(|w| w.net).collect();
        Ok(Self {
            t_stat_gross: TStat::of(&gross),
            t_stat_net: TStat::of(&net),
            n: weeks.len(),
            cum_gross: cumulate(&gross, Accumulation::Sum),
            cum_net: cumulate(&net, Accumulation::Sum),
            total_fees: costs.total_fees,
            trades: costs.trades,
            weeks,
        })
    }

    pub fn gross_returns(&self) -> Vec<f64> {
        self.weeks.iter().map(|w| w.gross).collect()
    }

    pub fn net_returns(&self) -> Vec<f64> {
        self.weeks.iter().map(|w| w.net).collect()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.weeks.iter().map(|w| w.position).collect()
    }
}
