//! Weekly and daily time-series containers plus the calendar rules that keep
//! search data and returns apart in time.
//!
//! Two week conventions coexist. Search-volume weeks run Sunday to Saturday
//! and are labelled by their Sunday. Trade weeks run Monday close to Friday
//! close and are labelled by their Monday. A search week starting on Sunday
//! `d` is paired with the trade week starting on Monday `d + 8`, the first
//! full trading week that begins after the search week has closed.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days between a search week's Sunday and the Monday of the trade week it
/// predicts.
pub const SIGNAL_TO_TRADE_DAYS: i64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeekKind {
    /// Sunday..Saturday search-volume week.
    GtWeek,
    /// Monday..Friday trading week.
    TradeWeek,
}

impl WeekKind {
    pub fn start_weekday(self) -> Weekday {
        match self {
            WeekKind::GtWeek => Weekday::Sun,
            WeekKind::TradeWeek => Weekday::Mon,
        }
    }

    /// Offset from the label date to the last calendar day the week covers.
    pub fn span_days(self) -> i64 {
        match self {
            WeekKind::GtWeek => 6,
            WeekKind::TradeWeek => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekLabel {
    start: NaiveDate,
    kind: WeekKind,
}

impl WeekLabel {
    pub fn new(start: NaiveDate, kind: WeekKind) -> Result<Self> {
        if start.weekday() != kind.start_weekday() {
            return Err(Error::CalendarViolation {
                date: start,
                reason: format!(
                    "week must start on {:?}, got {:?}",
                    kind.start_weekday(),
                    start.weekday()
                ),
            });
        }
        Ok(Self { start, kind })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn kind(&self) -> WeekKind {
        self.kind
    }

    /// Last calendar day covered (Saturday for search weeks, Friday for trade weeks).
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.kind.span_days())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    SviPoints,
    SimpleReturn,
}

/// Date-labelled weekly scalar series.
///
/// Labels are strictly increasing and all start on the weekday required by
/// the series kind. Search-week series must be contiguous; trade-week series
/// may skip weeks that had too few trading days to define a return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    kind: WeekKind,
    unit: Unit,
    starts: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl WeeklySeries {
    pub fn new(
        kind: WeekKind,
        unit: Unit,
        starts: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if starts.len() != values.len() {
            return Err(Error::InvalidConfig(format!(
                "{} labels but {} values",
                starts.len(),
                values.len()
            )));
        }
        for (i, &start) in starts.iter().enumerate() {
            WeekLabel::new(start, kind)?;
            if i > 0 {
                let prev = starts[i - 1];
                if start == prev {
                    return Err(Error::DuplicateLabel { date: start });
                }
                if start < prev {
                    return Err(Error::OrderViolation { row: i, date: start });
                }
                let gap = (start - prev).num_days();
                if kind == WeekKind::GtWeek && gap != 7 {
                    return Err(Error::CalendarViolation {
                        date: start,
                        reason: format!("missing search week(s) before this label ({gap} days gap)"),
                    });
                }
            }
        }
        for (&date, &value) in starts.iter().zip(&values) {
            let ok = match unit {
                Unit::SviPoints => (0.0..=100.0).contains(&value),
                Unit::SimpleReturn => value.is_finite(),
            };
            if !ok {
                return Err(Error::RangeViolation { date, value });
            }
        }
        Ok(Self {
            kind,
            unit,
            starts,
            values,
        })
    }

    /// Search-volume series labelled by Sundays.
    pub fn svi(starts: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        Self::new(WeekKind::GtWeek, Unit::SviPoints, starts, values)
    }

    /// Weekly simple returns labelled by Mondays.
    pub fn returns(starts: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        Self::new(WeekKind::TradeWeek, Unit::SimpleReturn, starts, values)
    }

    /// Contiguous series starting at `first`, one label every 7 days.
    pub fn contiguous(kind: WeekKind, unit: Unit, first: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let starts = (0..values.len())
            .map(|i| first + Duration::weeks(i as i64))
            .collect();
        Self::new(kind, unit, starts, values)
    }

    pub fn kind(&self) -> WeekKind {
        self.kind
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn starts(&self) -> &[NaiveDate] {
        &self.starts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self, index: usize) -> WeekLabel {
        WeekLabel {
            start: self.starts[index],
            kind: self.kind,
        }
    }

    pub fn index_of(&self, start: NaiveDate) -> Option<usize> {
        self.starts.binary_search(&start).ok()
    }

    pub fn get(&self, start: NaiveDate) -> Option<f64> {
        self.index_of(start).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.starts.iter().copied().zip(self.values.iter().copied())
    }

    /// Same labels, new values (validated against the unit).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.kind, self.unit, self.starts.clone(), values)
    }

    /// Entries whose label lies in `[from, to]`.
    pub fn restrict(&self, from: NaiveDate, to: NaiveDate) -> Self {
        let lo = self.starts.partition_point(|d| *d < from);
        let hi = self.starts.partition_point(|d| *d <= to);
        let (lo, hi) = (lo, hi.max(lo));
        Self {
            kind: self.kind,
            unit: self.unit,
            starts: self.starts[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }

    /// Shift every label by whole weeks, keeping values.
    pub fn shift_weeks(&self, weeks: i64) -> Self {
        Self {
            kind: self.kind,
            unit: self.unit,
            starts: self.starts.iter().map(|d| *d + Duration::weeks(weeks)).collect(),
            values: self.values.clone(),
        }
    }
}

/// Daily close prices on trading days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPriceSeries {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl DailyPriceSeries {
    pub fn new(dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::InvalidConfig(format!(
                "{} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::OrderViolation {
                    row: i + 1,
                    date: w[1],
                });
            }
        }
        for (&date, &value) in dates.iter().zip(&closes) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidPrice { date, value });
            }
        }
        Ok(Self { dates, closes })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }
}

fn monday_of(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

/// Monday-to-Friday simple returns, one per trade week.
///
/// Each week's return runs from the close of its first trading day on or
/// after Monday to the close of its last trading day on or before Friday, so
/// holiday weeks still produce a return. Weeks with fewer than two trading
/// days are omitted. Weekend-dated rows are ignored.
pub fn weekly_returns(prices: &DailyPriceSeries) -> Result<WeeklySeries> {
    if prices.is_empty() {
        return Err(Error::EmptySeries);
    }
    // (first close, last close, trading days) per Monday
    let mut weeks: BTreeMap<NaiveDate, (f64, f64, usize)> = BTreeMap::new();
    for (&date, &close) in prices.dates.iter().zip(&prices.closes) {
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::InvalidPrice { date, value: close });
        }
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            continue;
        }
        weeks
            .entry(monday_of(date))
            .and_modify(|(_, last, n)| {
                *last = close;
                *n += 1;
            })
            .or_insert((close, close, 1));
    }
    let (starts, values): (Vec<_>, Vec<_>) = weeks
        .into_iter()
        .filter(|(_, (_, _, n))| *n >= 2)
        .map(|(monday, (first, last, _))| (monday, last / first - 1.0))
        .unzip();
    if starts.is_empty() {
        return Err(Error::EmptySeries);
    }
    WeeklySeries::returns(starts, values)
}

/// One search week paired with the trade week it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub gt_week: NaiveDate,
    pub trade_week: NaiveDate,
    pub svi_index: usize,
    pub return_index: usize,
}

pub fn trade_week_for(gt_week: NaiveDate) -> NaiveDate {
    gt_week + Duration::days(SIGNAL_TO_TRADE_DAYS)
}

pub fn gt_week_for(trade_week: NaiveDate) -> NaiveDate {
    trade_week - Duration::days(SIGNAL_TO_TRADE_DAYS)
}

/// Pairs each search week with the trade week starting eight days later.
///
/// Only weeks present on both sides are paired; the result is ordered by
/// search week.
pub fn align(svi: &WeeklySeries, returns: &WeeklySeries) -> Result<Vec<AlignedPair>> {
    if svi.is_empty() || returns.is_empty() {
        return Err(Error::EmptySeries);
    }
    if svi.kind() != WeekKind::GtWeek || returns.kind() != WeekKind::TradeWeek {
        return Err(Error::InvalidConfig(
            "align expects a search-week series and a trade-week series".into(),
        ));
    }
    let pairs: Vec<AlignedPair> = svi
        .starts()
        .iter()
        .enumerate()
        .filter_map(|(svi_index, &gt_week)| {
            let trade_week = trade_week_for(gt_week);
            returns.index_of(trade_week).map(|return_index| AlignedPair {
                gt_week,
                trade_week,
                svi_index,
                return_index,
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub requested: NaiveDate,
    pub series_id: String,
    pub as_of: NaiveDate,
    pub allowed: bool,
}

/// Append-only record of reads made through logged views.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLog {
    reads: Vec<AccessRecord>,
}

impl AccessLog {
    pub fn reads(&self) -> &[AccessRecord] {
        &self.reads
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn violations(&self) -> impl Iterator<Item = &AccessRecord> {
        self.reads.iter().filter(|r| !r.allowed)
    }

    pub fn violation_count(&self) -> usize {
        self.violations().count()
    }

    pub fn absorb(&mut self, other: AccessLog) {
        self.reads.extend(other.reads);
    }
}

/// Read-restricted view over a series: nothing labelled after `as_of` may be read.
#[derive(Debug)]
pub struct LoggedView<'a> {
    series: &'a WeeklySeries,
    series_id: String,
    as_of: NaiveDate,
    log: AccessLog,
}

pub fn logged_view<'a>(
    series: &'a WeeklySeries,
    series_id: impl Into<String>,
    as_of: NaiveDate,
) -> LoggedView<'a> {
    LoggedView {
        series,
        series_id: series_id.into(),
        as_of,
        log: AccessLog::default(),
    }
}

impl LoggedView<'_> {
    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    /// Value labelled `date`, `Ok(None)` if there is no such entry.
    ///
    /// Every call is logged. A read past the horizon returns
    /// [`Error::FutureAccess`].
    pub fn get(&mut self, date: NaiveDate) -> Result<Option<f64>> {
        let allowed = date <= self.as_of;
        self.log.reads.push(AccessRecord {
            requested: date,
            series_id: self.series_id.clone(),
            as_of: self.as_of,
            allowed,
        });
        if !allowed {
            return Err(Error::FutureAccess {
                series_id: self.series_id.clone(),
                requested: date,
                as_of: self.as_of,
            });
        }
        Ok(self.series.get(date))
    }

    pub fn log(&self) -> &AccessLog {
        &self.log
    }

    pub fn into_log(self) -> AccessLog {
        self.log
    }
}
