use std::process::{Command, Output};

fn purify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purify")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = purify(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Parses CSV output into header and rows of cells.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn f(cell: &str) -> f64 {
    cell.parse().unwrap_or_else(|_| panic!("not a number: {cell:?}"))
}

#[test]
fn capacity_rows() {
    let (h, rows) = table(&stdout(&["capacity", "--distance-km", "0,50"]));
    assert_eq!(h, ["distance_km", "eta", "k", "m", "rate", "capacity", "ratio", "probability"]);
    assert_eq!(rows[0][col(&h, "capacity")], "inf");
    assert_eq!(f(&rows[0][col(&h, "eta")]), 1.0);
    assert!((f(&rows[1][col(&h, "eta")]) - 0.1).abs() < 1e-12);
    assert!((f(&rows[1][col(&h, "capacity")]) - 0.1520).abs() < 1e-4);
}

#[test]
fn infinite_capacity_is_null_in_json() {
    let text = stdout(&["capacity", "--distance-km", "0", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v[0]["capacity"].is_null());
    assert_eq!(v[0]["eta"], 1.0);
}

#[test]
fn negative_distance_is_rejected() {
    let out = purify(&["capacity", "--distance-km", "-5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-negative"));
}

#[test]
fn single_shot_long_distance() {
    let (h, rows) = table(&stdout(&["single-shot", "--distance-km", "200"]));
    let r = &rows[0];
    assert_eq!((r[col(&h, "k")].as_str(), r[col(&h, "m")].as_str()), ("1", "3"));
    assert!((f(&r[col(&h, "ratio")]) - 3f64.ln() / 3.0).abs() < 0.005);
    let eta = f(&r[col(&h, "eta")]);
    assert_eq!(f(&r[col(&h, "qubit_rate")]), eta / 2.0);
}

/// Exhaustive search with rates built from running products, independent of
/// the library's log-binomial code.
fn short_distance_oracle(eta: f64, k_max: u32, m_max: u32) -> f64 {
    let cap = -(1.0 - eta).log2();
    let mut best = 0.0f64;
    for m in 2..=m_max {
        // log2 C(k+m−1, k) built incrementally in k.
        let mut log_d = 0.0;
        for k in 1..=k_max {
            log_d += ((k + m - 1) as f64 / k as f64).log2();
            best = best.max(eta.powi(k as i32) * log_d / m as f64);
        }
    }
    best / cap
}

#[test]
fn single_shot_short_distance() {
    let (h, rows) = table(&stdout(&["single-shot", "--distance-km", "0.1", "--k-max", "300", "--m-max", "30"]));
    let ratio = f(&rows[0][col(&h, "ratio")]);
    let eta = f(&rows[0][col(&h, "eta")]);
    assert!((ratio - short_distance_oracle(eta, 300, 30)).abs() < 1e-9);
    assert!((ratio - 0.376672).abs() < 1e-6, "{ratio}");
}

#[test]
fn iterate_and_fock_examples() {
    let (h, rows) = table(&stdout(&["iterate", "--eta", "0.4", "--k", "1", "--m", "2"]));
    assert_eq!(f(&rows[0][col(&h, "rate")]), 0.2);
    let (h, rows) = table(&stdout(&["fock", "--eta", "0.5", "--k", "1", "--m", "2"]));
    assert!((f(&rows[0][col(&h, "probability")]) - 0.25).abs() < 1e-12);
}

#[test]
fn noisy_fock_degrades_with_distance() {
    let args = ["fock", "--distance-km", "10,20,40", "--nbar", "0.01", "--eta-eff", "0.5", "--dark", "1e-6"];
    let (h, rows) = table(&stdout(&args));
    let rates: Vec<f64> = rows.iter().map(|r| f(&r[col(&h, "rate")])).collect();
    assert!(rates[0] > 0.0);
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn swap_chain_rows() {
    let (h, rows) = table(&stdout(&["swap", "--nu", "2", "--links", "2"]));
    assert_eq!(rows.len(), 2);
    assert_eq!(f(&rows[0][col(&h, "nu")]), 2.0);
    assert!((f(&rows[1][col(&h, "nu")]) - 1.25).abs() < 1e-12);
    assert_eq!(rows[1][col(&h, "beta")], "0.95");
    let keys: Vec<f64> = rows.iter().map(|r| f(&r[col(&h, "key_rate")])).collect();
    assert!(keys[1] < keys[0]);
    assert!(!purify(&["swap", "--links", "2"]).status.success());
}

#[test]
fn verify_passes() {
    let text = stdout(&["verify"]);
    assert!(text.lines().count() >= 3);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn rows_respect_capacity() {
    for sub in ["single-shot", "iterate"] {
        let (h, rows) = table(&stdout(&[sub, "--distance-km", "0:150:25"]));
        for r in &rows {
            let cap = &r[col(&h, "capacity")];
            if cap == "inf" {
                continue;
            }
            let (rate, cap, ratio) = (f(&r[col(&h, "rate")]), f(cap), f(&r[col(&h, "ratio")]));
            assert!(rate <= cap, "{sub}: {rate} > {cap}");
            assert!((ratio - rate / cap).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_is_deterministic_across_thread_counts() {
    let args = ["single-shot", "--distance-km", "0:200:5", "--k-max", "40", "--m-max", "12"];
    let run = |threads: &str| {
        let out =
            Command::new(env!("CARGO_BIN_EXE_purify")).args(args).env("RAYON_NUM_THREADS", threads).output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("8"));
    assert_eq!(one, run("1"));
    assert!(!one.contains(&b'\r'));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let out = dir.path().join("out.csv");
    std::fs::write(&cfg, "# fixed code\ndistance-km = 10,20\nk = 2\nm = 4\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let status = purify(&["single-shot", "--config", cfg_s, "--m", "3", "--out", out.to_str().unwrap()]).status;
    assert!(status.success());
    let (h, rows) = table(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!((r[col(&h, "k")].as_str(), r[col(&h, "m")].as_str()), ("2", "3"));
    }
    std::fs::write(&cfg, "unknown-flag = 1\n").unwrap();
    assert!(!purify(&["capacity", "--config", cfg_s]).status.success());
}

#[test]
fn repeater_chain_uses_end_to_end_capacity() {
    let (h, one) = table(&stdout(&["single-shot", "--distance-km", "100", "--k", "1", "--m", "3"]));
    let (_, two) = table(&stdout(&["single-shot", "--distance-km", "100", "--k", "1", "--m", "3", "--links", "2"]));
    let c = col(&h, "capacity");
    assert_eq!(one[0][c], two[0][c]);
    assert!(f(&two[0][col(&h, "rate")]) > f(&one[0][col(&h, "rate")]));
}
