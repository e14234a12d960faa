//! Shared fixtures plus a deliberately naive re-implementation of the
//! reference R pipeline. The oracle uses no library code beyond chrono so a
//! bug in the engine cannot hide in both.

#![allow(dead_code)]

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use trendlab_core::{DailyPriceSeries, WeeklySeries};

pub fn d(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Inputs as plain vectors, the way they would come off disk.
#[derive(Debug, Clone)]
pub struct RawFixture {
    pub svi: Vec<(NaiveDate, i64)>,
    pub prices: Vec<(NaiveDate, f64)>,
}

impl RawFixture {
    pub fn engine_svi(&self) -> WeeklySeries {
        WeeklySeries::svi(
            self.svi.iter().map(|p| p.0).collect(),
            self.svi.iter().map(|p| p.1 as f64).collect(),
        )
        .unwrap()
    }

    pub fn engine_prices(&self) -> DailyPriceSeries {
        DailyPriceSeries::new(
            self.prices.iter().map(|p| p.0).collect(),
            self.prices.iter().map(|p| p.1).collect(),
        )
        .unwrap()
    }
}

/// Integer random-walk search data with daily prices covering every trade
/// week it can predict. About 3% of weekdays are dropped as holidays and a
/// few stray weekend rows are mixed in.
pub fn random_fixture(seed: u64, weeks: usize) -> RawFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = d("2004-01-04") + Duration::weeks(rng.random_range(0..200));
    let mut level: i64 = rng.random_range(10..90);
    let mut svi = Vec::with_capacity(weeks);
    for i in 0..weeks {
        level = (level + rng.random_range(-6..=6)).clamp(0, 100);
        svi.push((first + Duration::weeks(i as i64), level));
    }
    let step = Normal::<f64>::new(0.0002, 0.012).unwrap();
    let mut price = 100.0f64;
    let mut prices = Vec::new();
    let mut day = first + Duration::days(1);
    let end = first + Duration::weeks(weeks as i64) + Duration::days(14);
    while day <= end {
        let weekend = matches!(day.weekday(), Weekday::Sat | Weekday::Sun);
        let keep = if weekend { rng.random_bool(0.01) } else { !rng.random_bool(0.03) };
        if keep {
            price *= step.sample(&mut rng).exp();
            prices.push((day, price));
        }
        day += Duration::days(1);
    }
    RawFixture { svi, prices }
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// (trade-week Monday, strategy return)
    pub perf: Vec<(NaiveDate, f64)>,
    pub t: f64,
}

/// Monday..Friday return for the week starting `monday`, or None when fewer
/// than two trading days fall in it.
fn oracle_week_return(prices: &[(NaiveDate, f64)], monday: NaiveDate) -> Option<f64> {
    let friday = monday + Duration::days(4);
    let mut first = None;
    let mut last = 0.0;
    let mut count = 0;
    for &(date, close) in prices {
        if date >= monday && date <= friday {
            if first.is_none() {
                first = Some(close);
            }
            last = close;
            count += 1;
        }
    }
    if count < 2 {
        return None;
    }
    Some(last / first.unwrap() - 1.0)
}

/// `gtdata_mean = rollmeanr(gtdata, k)`, `lag(-1)`, `pos = 2*(v > lagged) - 1`,
/// `perf = -pos * spy_rets`, drop NA, `t.test(perf)`.
pub fn oracle(fx: &RawFixture, k: usize) -> OracleRun {
    let v: Vec<f64> = fx.svi.iter().map(|p| p.1 as f64).collect();
    let n = v.len();
    let mut rollmean = vec![f64::NAN; n];
    for t in 0..n {
        if t + 1 >= k {
            let mut s = 0.0;
            for j in 0..k {
                s += v[t - j];
            }
            rollmean[t] = s / k as f64;
        }
    }
    let mut perf = Vec::new();
    for t in 1..n {
        let lagged = rollmean[t - 1];
        if lagged.is_nan() {
            continue;
        }
        let pos = if v[t] > lagged { 1.0 } else { -1.0 };
        let monday = fx.svi[t].0 + Duration::days(8);
        if let Some(r) = oracle_week_return(&fx.prices, monday) {
            perf.push((monday, -pos * r));
        }
    }
    let m = perf.len() as f64;
    let mean = perf.iter().map(|p| p.1).sum::<f64>() / m;
    let mut ss = 0.0;
    for p in &perf {
        ss += (p.1 - mean) * (p.1 - mean);
    }
    let se = (ss / (m - 1.0)).sqrt() / m.sqrt();
    OracleRun { perf, t: mean / se }
}

/// O(n k) right-aligned mean; `None` before the window fills.
pub fn brute_rolling_mean(v: &[f64], k: usize) -> Vec<Option<f64>> {
    (0..v.len())
        .map(|t| {
            if t + 1 < k {
                None
            } else {
                let mut s = 0.0;
                for x in &v[t + 1 - k..=t] {
                    s += x;
                }
                Some(s / k as f64)
            }
        })
        .collect()
}

/// Seeded real-valued series in [0, 100].
pub fn random_levels(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..100.0)).collect()
}
