use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_sot");

static COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Fresh scratch directory under the system temp dir.
fn scratch() -> PathBuf {
    let id = COUNTER.fetch_add(1, Ordering::SeqCst);
    let dir = std::env::temp_dir().join(format!("sot-cli-{}-{id}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn sot(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SOT_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_ok(args: &[&str]) -> Output {
    let out = sot(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn missing_config_is_a_schema_error() {
    let dir = scratch();
    let out = sot(&["w2", "--config", p(&dir.join("absent.json")), "--out", "-", "--seed", "1"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn schema_error_names_the_field() {
    let dir = scratch();
    let cfg = write(&dir, "bad.json", r#"{"k": 2.0, "sigma": "one", "delta": 0.1, "h_list": [10]}"#);
    let out = sot(&["t2-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sigma"), "{}", stderr(&out));

    let cfg = write(&dir, "unknown.json", r#"{"k": 2.0, "sigma": 1.0, "delta": 0.1, "h_list": [10], "extra": 1}"#);
    let out = sot(&["t2-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("extra"), "{}", stderr(&out));
}

#[test]
fn missing_seed_is_a_schema_error() {
    let dir = scratch();
    let cfg = write(&dir, "t2.json", r#"{"k": 2.0, "sigma": 1.0, "delta": 0.1, "h_list": [10]}"#);
    let out = sot(&["t2-probe", "--config", p(&cfg), "--out", "-"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn invalid_parameter_value_is_a_schema_error() {
    let dir = scratch();
    let cfg = write(&dir, "t2.json", r#"{"k": 0.5, "sigma": 1.0, "delta": 0.1, "h_list": [10]}"#);
    let out = sot(&["t2-probe", "--config", p(&cfg), "--out", "-", "--seed", "3"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = scratch();
    let cfg = write(&dir, "t2.json", r#"{"k": 2.0, "sigma": 1.0, "delta": 0.1, "h_list": [2000]}"#);
    let out = sot(&["t2-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn csv_output_carries_metadata_header() {
    let dir = scratch();
    let body = r#"{"seed": 9, "k": 2.0, "sigma": 1.0, "h_list": [5, 10]}"#;
    let cfg = write(&dir, "lsi.json", body);
    let out_path = dir.join("lsi.csv");
    run_ok(&["lsi-probe", "--config", p(&cfg), "--out", p(&out_path)]);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# tool=sot");
    assert!(lines[1].starts_with("# version="));
    assert_eq!(lines[2], "# subcommand=lsi-probe");
    assert_eq!(lines[3], "# seed=9");
    let digest = lines[4].strip_prefix("# config_sha256=").unwrap();
    assert_eq!(digest, sot::cli::sha256_hex(body.as_bytes()));
    let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("h,x1,x2,q1,q2,q3,q4,q5,lsi_lower"), "{header}");
    let rows = lines.iter().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = scratch();
    let cfg = write(&dir, "lsi.json", r#"{"seed": 9, "k": 2.0, "sigma": 1.0, "h_list": [5]}"#);
    let out = run_ok(&["lsi-probe", "--config", p(&cfg), "--out", "-", "--seed", "44"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("# seed=44"));
}

#[test]
fn monte_carlo_outputs_are_byte_identical() {
    let dir = scratch();
    let cfg = write(
        &dir,
        "rate.json",
        r#"{"family": {"kind": "fixed", "distribution": {"atoms": [{"x": 0.0, "logw": -0.6931471805599453}, {"x": 3.0, "logw": -0.6931471805599453}]}},
            "sigma": 1.0, "n_list": [10, 20, 40], "trials": 6}"#,
    );
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let c = dir.join("c.csv");
    run_ok(&["rate-scan", "--config", p(&cfg), "--out", p(&a), "--seed", "77"]);
    run_ok(&["rate-scan", "--config", p(&cfg), "--out", p(&b), "--seed", "77"]);
    run_ok(&["rate-scan", "--config", p(&cfg), "--out", p(&c), "--seed", "77", "--threads", "3"]);
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert_eq!(ta, std::fs::read(&c).unwrap());
    let fit = sot::cli::fit_summary_path(&a);
    let fa = std::fs::read(&fit).unwrap();
    assert_eq!(fa, std::fs::read(sot::cli::fit_summary_path(&c)).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&fa).unwrap();
    assert!(json["fit"]["slope"].is_number(), "{json}");

    let cfg = write(&dir, "conc.json", r#"{"n": 50, "delta": 0.1, "replications": 20, "mode": "smoothed_empirical"}"#);
    let d = dir.join("d.csv");
    let e = dir.join("e.csv");
    run_ok(&["concentration", "--config", p(&cfg), "--out", p(&d), "--seed", "5"]);
    run_ok(&["concentration", "--config", p(&cfg), "--out", p(&e), "--seed", "5", "--threads", "2"]);
    assert_eq!(std::fs::read(&d).unwrap(), std::fs::read(&e).unwrap());
    let f = dir.join("f.csv");
    run_ok(&["concentration", "--config", p(&cfg), "--out", p(&f), "--seed", "6"]);
    assert_ne!(std::fs::read(&d).unwrap(), std::fs::read(&f).unwrap());
}

#[test]
fn kl_rate_scan_on_bernoulli_family_is_rejected() {
    let dir = scratch();
    let cfg = write(
        &dir,
        "rate.json",
        r#"{"family": {"kind": "bernoulli_scan", "k": 2.0, "epsilon": 0.1}, "sigma": 1.0,
            "n_list": [100, 200], "trials": 2, "quantity": "kl"}"#,
    );
    let out = sot(&["rate-scan", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn construct_feeds_w2() {
    let dir = scratch();
    let cfg = write(&dir, "construct.json", r#"{"family": {"kind": "two_point", "h": 4.0, "k": 2.0}}"#);
    let dist = dir.join("two_point.json");
    run_ok(&["construct", "--config", p(&cfg), "--out", p(&dist), "--seed", "1"]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&dist).unwrap()).unwrap();
    assert_eq!(json["meta"]["subcommand"], "construct");
    assert_eq!(json["distribution"]["atoms"].as_array().unwrap().len(), 2);

    let w2cfg = write(
        &dir,
        "w2.json",
        r#"{"a": "two_point.json", "b": {"atoms": [{"x": 0.0, "logw": 0.0}]}, "sigma": 1.0, "diagnostic_points": 5}"#,
    );
    let out = run_ok(&["w2", "--config", p(&w2cfg), "--out", "-", "--seed", "1"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w2sq = report["w2sq"].as_f64().unwrap();
    let direct = sot::transport::w2_squared(
        &sot::dist_core::SmoothedMixture::new(sot::constructions::bernoulli_two_point(4.0, 2.0).unwrap(), 1.0).unwrap(),
        &sot::dist_core::SmoothedMixture::gaussian(0.0, 1.0).unwrap(),
        1e-10,
    )
    .unwrap()
    .total;
    assert!((w2sq - direct).abs() <= 1e-9 * direct.max(1e-12), "{w2sq} vs {direct}");
    assert_eq!(report["grid"].as_array().unwrap().len(), 5);
}

#[test]
fn probes_run_end_to_end() {
    let dir = scratch();
    let two_point = r#"{"kind": "two_point", "h": 3.0, "k": 2.0}"#;
    let cfg = write(
        &dir,
        "mi.json",
        &format!(r#"{{"distribution": {two_point}, "sigma": 1.0, "kind": "renyi", "lambda": 1.5}}"#),
    );
    let out = run_ok(&["mi-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("radius,value,quadrature_error")), "{text}");

    let cfg = write(
        &dir,
        "tail.json",
        &format!(r#"{{"distribution": {two_point}, "k": 2.0, "epsilon": 0.05, "points": 20}}"#),
    );
    let out = run_ok(&["tail-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "r,log_tail,log_rho,ratio");
    assert_eq!(data.len(), 21);

    let cfg = write(&dir, "t2.json", r#"{"k": 2.0, "sigma": 1.0, "delta": 0.1, "h_list": [10, 20, 30]}"#);
    let out = run_ok(&["t2-probe", "--config", p(&cfg), "--out", "-", "--seed", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let ratios: Vec<f64> = reader
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|r| r.unwrap()["ratio"].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2]);
}

#[test]
fn zero_threads_is_rejected() {
    let dir = scratch();
    let cfg = write(&dir, "lsi.json", r#"{"k": 2.0, "sigma": 1.0, "h_list": [5]}"#);
    let out = sot(&["lsi-probe", "--config", p(&cfg), "--out", "-", "--seed", "1", "--threads", "0"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn quick_acceptance_passes() {
    let start = Instant::now();
    let out = sot(&["accept", "--quick"]);
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    println!("{text}");
    assert_eq!(code(&out), 0, "{text}\n{}", stderr(&out));
    assert!(text.contains("14 of 14 criteria passed"), "{text}");
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
}
