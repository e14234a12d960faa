//! Search-volume surprise backtesting and the hygiene checks that keep such
//! backtests honest.
//!
//! Search data arrives in Sunday..Saturday weeks, trading happens in
//! Monday..Friday weeks, and a signal computed from search week `t` is traded
//! in the trade week that starts eight days after it.

pub mod error;
pub mod hygiene;
pub mod ingest;
pub mod series;
pub mod stats;
pub mod strategy;

pub use error::{Error, ErrorClass, Result};
pub use series::{DailyPriceSeries, Unit, WeekKind, WeekLabel, WeeklySeries};
pub use stats::{BacktestResult, CostModel, TStat};
pub use strategy::{Pipeline, Position, StrategyConfig, TiePolicy};
