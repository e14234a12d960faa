//! File loading, validation and synthetic series generation.
//!
//! Formats:
//! - search volume: header `week_start,value`, ISO dates (Sundays), integers 0..=100
//! - prices: header `date,close`, ISO dates ascending, positive decimals
//! - keyword fixtures: header `keyword,category,source_url,availability_date`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{DailyPriceSeries, Unit, WeekKind, WeeklySeries};

const SVI_HEADER: [&str; 2] = ["week_start", "value"];
const PRICE_HEADER: [&str; 2] = ["date", "close"];
const KEYWORD_HEADER: [&str; 4] = ["keyword", "category", "source_url", "availability_date"];

static BUNDLED_KEYWORDS: &str = include_str!("../data/keywords.csv");

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

fn format_err(row: usize, message: impl Into<String>) -> Error {
    Error::FormatError {
        row,
        message: message.into(),
    }
}

/// Parsed CSV rows with their 1-based line numbers. The header must match.
fn read_rows<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| format_err(line, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !seen_header {
            let got: Vec<&str> = rec.iter().collect();
            if got != header {
                return Err(format_err(line, format!("expected header {}, got {}", header.join(","), got.join(","))));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(format_err(line, format!("expected {} fields, got {}", header.len(), rec.len())));
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn parse_date(row: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format_err(row, format!("bad date {s:?}: {e}")))
}

/// Parses a search-volume export.
///
/// A `week_start` of the form `2004-01-04 - 2004-01-10` (week range as some
/// exports print it) is accepted and reduced to its first date.
pub fn parse_svi_csv<R: Read>(reader: R) -> Result<WeeklySeries> {
    let rows = read_rows(reader, &SVI_HEADER)?;
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut starts = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        let date_field = fields[0].split(" - ").next().unwrap_or_default();
        let date = parse_date(*line, date_field)?;
        let value: i64 = fields[1]
            .parse()
            .map_err(|_| format_err(*line, format!("value {:?} is not an integer", fields[1])))?;
        if !(0..=100).contains(&value) {
            return Err(Error::RangeViolation {
                date,
                value: value as f64,
            });
        }
        starts.push(date);
        values.push(value as f64);
    }
    WeeklySeries::svi(starts, values)
}

pub fn load_svi_csv(path: impl AsRef<Path>) -> Result<WeeklySeries> {
    parse_svi_csv(open(path.as_ref())?)
}

fn format_value(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

pub fn write_svi_csv<W: Write>(series: &WeeklySeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", SVI_HEADER.join(","))?;
    for (date, value) in series.iter() {
        writeln!(out, "{},{}", date.format("%Y-%m-%d"), format_value(value))?;
    }
    Ok(())
}

pub fn parse_price_csv<R: Read>(reader: R) -> Result<DailyPriceSeries> {
    let rows = read_rows(reader, &PRICE_HEADER)?;
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut dates: Vec<NaiveDate> = Vec::with_capacity(rows.len());
    let mut closes = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        let date = parse_date(*line, &fields[0])?;
        let close: f64 = fields[1]
            .parse()
            .map_err(|_| format_err(*line, format!("close {:?} is not a number", fields[1])))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::OrderViolation { row: *line, date });
            }
        }
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::InvalidPrice { date, value: close });
        }
        dates.push(date);
        closes.push(close);
    }
    DailyPriceSeries::new(dates, closes)
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<DailyPriceSeries> {
    parse_price_csv(open(path.as_ref())?)
}

pub fn write_price_csv<W: Write>(prices: &DailyPriceSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", PRICE_HEADER.join(","))?;
    for (date, close) in prices.dates().iter().zip(prices.closes()) {
        writeln!(out, "{},{}", date.format("%Y-%m-%d"), close)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Illness,
    ClassicCar,
    ArcadeGame,
    Finance,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Illness, Category::ClassicCar, Category::ArcadeGame, Category::Finance];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Illness => "illness",
            Category::ClassicCar => "classic_car",
            Category::ArcadeGame => "arcade_game",
            Category::Finance => "finance",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// A keyword with the date from which it could have been known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordFixture {
    pub keyword: String,
    pub category: Category,
    pub source_url: String,
    pub availability_date: NaiveDate,
}

pub fn parse_keyword_fixtures<R: Read>(reader: R) -> Result<Vec<KeywordFixture>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| format_err(line, e.to_string()))?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if !seen_header {
            let got: Vec<&str> = rec.iter().map(str::trim).collect();
            if got != KEYWORD_HEADER {
                return Err(format_err(line, format!("expected header {}", KEYWORD_HEADER.join(","))));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != KEYWORD_HEADER.len() {
            return Err(format_err(line, format!("expected 4 fields, got {}", rec.len())));
        }
        // keyword kept byte-for-byte
        let keyword = rec[0].to_owned();
        if keyword.is_empty() {
            return Err(format_err(line, "empty keyword"));
        }
        let category = rec[1].trim().parse().map_err(|m: String| format_err(line, m))?;
        out.push(KeywordFixture {
            keyword,
            category,
            source_url: rec[2].trim().to_owned(),
            availability_date: parse_date(line, rec[3].trim())?,
        });
    }
    Ok(out)
}

pub fn load_keyword_fixtures(path: impl AsRef<Path>) -> Result<Vec<KeywordFixture>> {
    parse_keyword_fixtures(open(path.as_ref())?)
}

/// The bundled null-keyword lists (illnesses, classic cars, arcade games)
/// plus the finance terms discussed alongside them.
pub fn bundled_keywords() -> Vec<KeywordFixture> {
    parse_keyword_fixtures(BUNDLED_KEYWORDS.as_bytes()).expect("bundled keyword file is valid")
}

pub fn bundled_keywords_csv() -> &'static str {
    BUNDLED_KEYWORDS
}

pub fn category_counts(fixtures: &[KeywordFixture]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for f in fixtures {
        *counts.entry(f.category).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    IidGaussian,
    RandomWalk,
    Constant,
}

/// Recipe for a deterministic synthetic weekly series.
///
/// Search-week series are clamped to `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub length_weeks: usize,
    pub generator: Generator,
    pub seed: u64,
    pub mean: f64,
    pub stdev: f64,
    pub kind: WeekKind,
    pub start: NaiveDate,
}

impl SyntheticSpec {
    pub fn svi(length_weeks: usize, generator: Generator, seed: u64, mean: f64, stdev: f64) -> Self {
        Self {
            length_weeks,
            generator,
            seed,
            mean,
            stdev,
            kind: WeekKind::GtWeek,
            start: NaiveDate::from_ymd_opt(2004, 1, 4).expect("valid date"),
        }
    }

    /// Return series whose weeks line up with `svi(...)` search weeks of the same start.
    pub fn returns(length_weeks: usize, generator: Generator, seed: u64, mean: f64, stdev: f64) -> Self {
        Self {
            kind: WeekKind::TradeWeek,
            start: NaiveDate::from_ymd_opt(2004, 1, 12).expect("valid date"),
            ..Self::svi(length_weeks, generator, seed, mean, stdev)
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn unit(&self) -> Unit {
        match self.kind {
            WeekKind::GtWeek => Unit::SviPoints,
            WeekKind::TradeWeek => Unit::SimpleReturn,
        }
    }
}

pub fn generate_values(spec: &SyntheticSpec) -> Result<Vec<f64>> {
    if spec.length_weeks == 0 {
        return Err(Error::EmptySeries);
    }
    if !(spec.stdev.is_finite() && spec.stdev >= 0.0) || !spec.mean.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "synthetic mean/stdev must be finite with stdev >= 0 (got {}, {})",
            spec.mean, spec.stdev
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.stdev).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n = spec.length_weeks;
    let mut values: Vec<f64> = match spec.generator {
        Generator::Constant => vec![spec.mean; n],
        Generator::IidGaussian => (0..n).map(|_| spec.mean + noise.sample(&mut rng)).collect(),
        Generator::RandomWalk => {
            let mut level = spec.mean;
            (0..n)
                .map(|i| {
                    if i > 0 {
                        level += noise.sample(&mut rng);
                    }
                    level
                })
                .collect()
        }
    };
    if spec.kind == WeekKind::GtWeek {
        for v in &mut values {
            *v = v.clamp(0.0, 100.0);
        }
    }
    Ok(values)
}

pub fn generate(spec: &SyntheticSpec) -> Result<WeeklySeries> {
    let values = generate_values(spec)?;
    WeeklySeries::contiguous(spec.kind, spec.unit(), spec.start, values)
}

/// Seed for trial `index` of a study run with `master`; independent of
/// evaluation order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the combined input
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Weekdays-only daily prices for `weeks` weeks starting on `first_monday`,
/// following a seeded log-normal walk. Used for fixtures and demos.
pub fn synthetic_prices(first_monday: NaiveDate, weeks: usize, seed: u64, daily_drift: f64, daily_vol: f64) -> Result<DailyPriceSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(daily_drift, daily_vol).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut price = 100.0f64;
    let mut dates = Vec::with_capacity(weeks * 5);
    let mut closes = Vec::with_capacity(weeks * 5);
    for w in 0..weeks as i64 {
        for d in 0..5 {
            dates.push(first_monday + Duration::days(7 * w + d));
            price *= noise.sample(&mut rng).exp();
            closes.push(price);
        }
    }
    DailyPriceSeries::new(dates, closes)
}
