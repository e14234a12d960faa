use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use serde_json::Value;
use tempfile::TempDir;
use trendlab_core::ingest::{synthetic_prices, write_price_csv, write_svi_csv};
use trendlab_core::{Unit, WeekKind, WeeklySeries};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trendlab"));
    cmd.env_remove("TRENDLAB_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn sunday() -> NaiveDate {
    NaiveDate::from_ymd_opt(2004, 1, 4).unwrap()
}

struct Fixture {
    dir: TempDir,
    svi: PathBuf,
    prices: PathBuf,
    svi_len: usize,
}

impl Fixture {
    /// 200 weeks of integer search data and prices that cover them.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let mut s = 7u64;
        let mut level = 40i64;
        let values: Vec<f64> = (0..200)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                level = (level + (s >> 61) as i64 - 3).clamp(0, 100);
                level as f64
            })
            .collect();
        let svi = WeeklySeries::contiguous(WeekKind::GtWeek, Unit::SviPoints, sunday(), values).unwrap();
        let prices = synthetic_prices(sunday() + Duration::days(1), 205, 11, 0.0003, 0.01).unwrap();
        let svi_path = dir.path().join("svi.csv");
        let price_path = dir.path().join("prices.csv");
        write_svi_csv(&svi, fs::File::create(&svi_path).unwrap()).unwrap();
        write_price_csv(&prices, fs::File::create(&price_path).unwrap()).unwrap();
        Self {
            dir,
            svi: svi_path,
            prices: price_path,
            svi_len: svi.len(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn backtest(&self, out: &str, extra: &[&str]) -> Output {
        let out = self.out(out);
        let mut args = vec![
            "backtest",
            "--svi",
            self.svi.to_str().unwrap(),
            "--prices",
            self.prices.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        run(&args)
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn backtest_row_count_matches_tradable_weeks() {
    let fx = Fixture::new();
    let out = fx.backtest("bt", &["--k", "10", "--cost-bps", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // every full synthetic week trades; weeks k..len have a lagged baseline
    let rows = csv_rows(&fx.out("bt/result.csv"));
    assert_eq!(rows.len(), fx.svi_len - 10);
    let header = fs::read_to_string(fx.out("bt/result.csv")).unwrap();
    assert!(header.starts_with("trade_week,position,gross,net,cum_gross,cum_net\n"));
    let summary = json(&fx.out("bt/summary.json"));
    assert_eq!(summary["n"], rows.len());
    assert_eq!(summary["trades"], 2 * rows.len());
    assert!(summary["manifest"]["timestamp"].is_null());
    let manifest = json(&fx.out("bt/manifest.json"));
    assert!(manifest["timestamp"].is_string());
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn payloads_are_reproducible() {
    let fx = Fixture::new();
    assert!(fx.backtest("a", &[]).status.success());
    assert!(fx.backtest("b", &[]).status.success());
    for f in ["result.csv", "summary.json"] {
        assert_eq!(fs::read(fx.out("a").join(f)).unwrap(), fs::read(fx.out("b").join(f)).unwrap());
    }
    let (ma, mb) = (json(&fx.out("a/manifest.json")), json(&fx.out("b/manifest.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
}

#[test]
fn csv_values_round_trip() {
    let fx = Fixture::new();
    assert!(fx.backtest("bt", &[]).status.success());
    let rows = csv_rows(&fx.out("bt/result.csv"));
    let cum: f64 = rows.last().unwrap()[4].parse().unwrap();
    let summary = json(&fx.out("bt/summary.json"));
    assert_eq!(summary["cum_gross"].as_f64().unwrap(), cum);
}

#[test]
fn missing_file_is_data_error() {
    let fx = Fixture::new();
    let out = run(&[
        "backtest",
        "--svi",
        "/nonexistent/svi.csv",
        "--prices",
        fx.prices.to_str().unwrap(),
        "--out",
        fx.out("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "FileNotFound");
}

#[test]
fn invert_negates_t_stat() {
    let fx = Fixture::new();
    assert!(fx.backtest("plain", &[]).status.success());
    assert!(fx.backtest("inv", &["--invert"]).status.success());
    let a = json(&fx.out("plain/summary.json"))["t_stat_gross"].as_f64().unwrap();
    let b = json(&fx.out("inv/summary.json"))["t_stat_gross"].as_f64().unwrap();
    assert_eq!(a, -b);
}

#[test]
fn usage_errors_exit_one() {
    let fx = Fixture::new();
    let out = fx.backtest("x", &["--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "InvalidConfig");
    let out = run(&["backtest", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "Usage");
}

#[test]
fn engine_error_exits_three() {
    let fx = Fixture::new();
    let out = fx.backtest("x", &["--k", "500"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "InsufficientHistory");
}

#[test]
fn split_tiles_whole_run() {
    let fx = Fixture::new();
    let out = fx.backtest("s", &["--split", "2006-01-01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let whole = csv_rows(&fx.out("s/result.csv"));
    let is = csv_rows(&fx.out("s/result_in_sample.csv"));
    let oos = csv_rows(&fx.out("s/result_out_of_sample.csv"));
    assert_eq!(is.len() + oos.len(), whole.len());
    let tiled: Vec<_> = is.iter().chain(&oos).map(|r| (r[0].clone(), r[2].clone())).collect();
    let expected: Vec<_> = whole.iter().map(|r| (r[0].clone(), r[2].clone())).collect();
    assert_eq!(tiled, expected);
    let summary = json(&fx.out("s/summary.json"));
    assert_eq!(summary["split"]["out_of_sample_start"], "2006-01-02");
}

#[test]
fn anachronistic_keyword_needs_override() {
    let fx = Fixture::new();
    let out = fx.backtest("k1", &["--keyword", "debt"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "Anachronistic");
    let out = fx.backtest("k2", &["--keyword", "debt", "--allow-anachronistic"]);
    assert!(out.status.success());
    let summary = json(&fx.out("k2/summary.json"));
    assert!(summary["watermark"].as_str().unwrap().starts_with("BIASED"));
    assert!(json(&fx.out("k2/manifest.json"))["watermark"].is_string());
    let out = fx.backtest("k3", &["--keyword", "Gout"]);
    assert!(out.status.success());
    assert!(json(&fx.out("k3/summary.json"))["watermark"].is_null());
}

fn sweep(fx: &Fixture, out: &str, k_min: &str, k_max: &str) -> Output {
    run(&[
        "sweep",
        "--svi",
        fx.svi.to_str().unwrap(),
        "--prices",
        fx.prices.to_str().unwrap(),
        "--k-min",
        k_min,
        "--k-max",
        k_max,
        "--out",
        fx.out(out).to_str().unwrap(),
    ])
}

#[test]
fn sweep_rows_match_backtests() {
    let fx = Fixture::new();
    let out = sweep(&fx, "sw", "2", "30");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&fx.out("sw/sweep.csv"));
    assert_eq!(rows.len(), 29);
    assert!(fs::read_to_string(fx.out("sw/sweep.csv")).unwrap().starts_with("k,t_stat_gross,t_stat_net,n\n"));
    for k in [2usize, 10, 30] {
        let name = format!("k{k}");
        assert!(fx.backtest(&name, &["--k", &k.to_string()]).status.success());
        let summary = json(&fx.out(&name).join("summary.json"));
        let row = &rows[k - 2];
        assert_eq!(row[0], k.to_string());
        assert_eq!(row[1].parse::<f64>().unwrap(), summary["t_stat_gross"].as_f64().unwrap());
        assert_eq!(row[2].parse::<f64>().unwrap(), summary["t_stat_net"].as_f64().unwrap());
    }
}

#[test]
fn sweep_rejects_inverted_range() {
    let fx = Fixture::new();
    let out = sweep(&fx, "sw", "10", "5");
    assert_eq!(out.status.code(), Some(1));
}

fn nullcheck(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["nullcheck", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn nullcheck_calibration_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let out = nullcheck(&a, &["--trials", "2000", "--seed", "42"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&a.join("null_summary.json"));
    let frac = summary["frac_above_195"].as_f64().unwrap();
    assert!((0.035..=0.065).contains(&frac), "{frac}");
    assert_eq!(csv_rows(&a.join("null.csv")).len(), 2000);

    let b = dir.path().join("b");
    let out = bin()
        .args(["nullcheck", "--trials", "2000", "--out", b.to_str().unwrap()])
        .env("TRENDLAB_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("null.csv")).unwrap(), fs::read(b.join("null.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("null_summary.json")).unwrap(),
        fs::read(b.join("null_summary.json")).unwrap()
    );
}

#[test]
fn nullcheck_against_price_file() {
    let fx = Fixture::new();
    let out = nullcheck(&fx.out("n"), &["--trials", "100", "--prices", fx.prices.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&fx.out("n/null_summary.json"))["trials"], 100);
}

#[test]
fn nullcheck_rejects_small_studies() {
    let dir = TempDir::new().unwrap();
    let out = nullcheck(dir.path(), &["--trials", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "InvalidConfig");
}

#[test]
fn keywords_bundled_partition() {
    let dir = TempDir::new().unwrap();
    let out = run(&["keywords", "--start", "2004-01-01", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report = json(&dir.path().join("gate.json"));
    assert_eq!(report["usable_counts"]["illness"], 200);
    assert_eq!(report["usable_counts"]["classic_car"], 84);
    assert_eq!(report["usable_counts"]["arcade_game"], 97);
    assert_eq!(report["anachronistic_counts"]["finance"], 8);
    assert_eq!(report["usable_counts"]["finance"], 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("anachronistic\tfinance\tdebt"));
}

#[test]
fn keywords_empty_fixture() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.csv");
    fs::write(&path, "keyword,category,source_url,availability_date\n").unwrap();
    let out = run(&["keywords", path.to_str().unwrap(), "--start", "2004-01-01"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("usable: 0"));
    assert!(stdout.contains("anachronistic: 0"));
}

#[test]
fn keywords_malformed_fixture() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "keyword,category,source_url,availability_date\ngout,illness,x,not-a-date\n").unwrap();
    let out = run(&["keywords", path.to_str().unwrap(), "--start", "2004-01-01"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "FormatError");
}
