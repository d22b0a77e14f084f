use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rdcert"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn exponential_setting_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["run-theorem", "3.1", "--plots"],
        &configs().join("exponential.cfg"),
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["theorem"], "exponential");
    assert_eq!(r["envelope_verified"], true);
    assert_eq!(r["hypotheses"]["pass"], true);
    assert!(r["worst_ratio"].as_f64().unwrap() <= 1.0 + 1e-12);
    assert!(tmp.path().join("plots/envelope.svg").exists());
    let series = fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    assert!(series.starts_with("t,g,envelope,sup,h1_semi,h2,sigma_t,alpha_t,residual\n"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("metadata.json")).unwrap()).unwrap();
    assert!(meta["created_unix"].is_u64());
}

#[test]
fn missing_length_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[domain]\nN = 50\n[diffusion]\nv0 = 1\n[run]\nT = 1\nic = mode(1, 0.1)\n",
    );
    let out = run(&["simulate"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[domain].L"));
}

#[test]
fn unknown_keys_and_usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[domain]\nL = 1\nN = 10\nwidth = 3\n");
    let out = run(&["simulate"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[domain].width"));

    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["run-theorem", "9.9"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = configs().join("turing_decay.cfg");
    for dir in [&a, &b] {
        let out = run(&["run-theorem", "turing", "--seed", "11"], &cfg, dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());
    assert_eq!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
    let c = tmp.path().join("c");
    run(&["run-theorem", "turing", "--seed", "12"], &cfg, &c);
    assert_ne!(ra, fs::read(c.join("report.json")).unwrap());
}

#[test]
fn dispersion_band_of_the_turing_example() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["analyze-dispersion", "--plots"], &configs().join("dispersion.cfg"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    let band = r["band"].as_array().unwrap();
    assert!((band[0].as_f64().unwrap() - 0.5097).abs() < 1e-3);
    assert!((band[1].as_f64().unwrap() - 1.2410).abs() < 1e-3);
    assert_eq!(r["turing_unstable"], true);
    let csv = fs::read_to_string(tmp.path().join("dispersion.csv")).unwrap();
    assert!(csv.starts_with("k,detM,trM,reL1,imL1,reL2,imL2\n"));
    assert_eq!(csv.lines().count(), 401);
    assert!(tmp.path().join("plots/dispersion.svg").exists());
}

const MARGINAL: &str = "\
[domain]
L = 1
N = 9
[diffusion]
v0 = 1
[kinetics]
v0 = 9.84
[run]
T = 20
dt = 1e-2
ic = mode(1, 0.1)
[certificate]
fraction = 0
";

/// Exit codes over synthetic scenarios: passing, inapplicable, failing
/// hypotheses, and hypotheses that pass while the discrete trajectory
/// breaks the envelope (the grid's Poincare constant is below (pi/L)^2).
#[test]
fn exit_code_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, String, i32)> = vec![
        ("run-theorem exponential", MARGINAL.replace("9.84", "5"), 0),
        ("run-theorem exponential", MARGINAL.replace("9.84", "12"), 2),
        (
            "run-theorem exponential",
            MARGINAL.replace("fraction = 0", "fraction = 0.5").replace("[kinetics]", "[kinetics]\nc0_v0 = 1e6"),
            2,
        ),
        ("run-theorem exponential", MARGINAL.to_string(), 3),
        (
            "check-certificate",
            "[certificate]\nsigma_v0 = 1\nalpha_v0 = 0.5\nq = 1.25\ng0 = 0.5\nhorizon = 5\nfamily = exponential\nmu0 = 2.1\nnu = 0.5\n"
                .to_string(),
            2,
        ),
        (
            "check-certificate",
            "[certificate]\nsigma_v0 = 1\nalpha_v0 = 0.5\nq = 1.25\ng0 = 0.5\nhorizon = 5\nfamily = exponential\nmu0 = 2\nnu = 0.5\n"
                .to_string(),
            0,
        ),
    ];
    for (i, (cmd, text, code)) in cases.iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        fs::create_dir_all(&dir).unwrap();
        let cfg = write_config(&dir, text);
        let args: Vec<&str> = cmd.split(' ').collect();
        let out = run(&args, &cfg, &dir.join("out"));
        assert_eq!(
            out.status.code(),
            Some(*code),
            "case {i}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let r = report(&tmp.path().join("3/out"));
    assert_eq!(r["hypotheses"]["pass"], true);
    assert_eq!(r["envelope_verified"], false);
    assert!(r["first_violation"]["t"].as_f64().unwrap() > 0.0);
    let r = report(&tmp.path().join("4/out"));
    assert_eq!(r["first_failure"]["condition"], "initial_value");
}

#[test]
fn simulate_writes_series_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--plots"], &configs().join("simulate.cfg"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let series = fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    assert!(series.starts_with("t,g,sup,h1_semi,h2\n"));
    let snap = fs::read_to_string(tmp.path().join("snapshots/00000.csv")).unwrap();
    assert!(snap.starts_with("x,u1,u2\n"));
    assert_eq!(snap.lines().count(), 101);
    assert!(tmp.path().join("plots/g.svg").exists());
}

#[test]
fn initial_data_from_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = run(&["simulate"], &configs().join("simulate.cfg"), &first);
    assert_eq!(out.status.code(), Some(0));
    fs::copy(first.join("snapshots/00000.csv"), tmp.path().join("u0.csv")).unwrap();
    let text = fs::read_to_string(configs().join("simulate.cfg"))
        .unwrap()
        .replace("ic = noise(0.01)", "ic = file\nic_file = u0.csv");
    let cfg = write_config(tmp.path(), &text);
    let second = tmp.path().join("second");
    let out = run(&["simulate"], &cfg, &second);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(first.join("series.csv")).unwrap(),
        fs::read(second.join("series.csv")).unwrap()
    );
}

#[test]
fn estimate_constants_reports_pointwise_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["estimate-constants"], &configs().join("simulate.cfg"), tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(tmp.path());
    assert_eq!(r["pointwise_violations"], 0);
    for key in ["M2_hat", "c_hat", "C"] {
        assert!(r[key].as_f64().unwrap() > 0.0, "{key}");
    }
}

#[test]
fn convergence_test_reports_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["convergence-test"], &configs().join("convergence.cfg"), tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(tmp.path());
    assert!(r["space"]["order"]["value"].as_f64().unwrap() >= 1.9);
    assert!(r["time"]["order"]["value"].as_f64().unwrap() >= 1.9);
}
