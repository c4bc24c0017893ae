use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momentgmp::gmp::{pop_instance, MeasureSlot};
use momentgmp::poly::{MultiIndex, Polynomial};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momentgmp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("MOMENTGMP_THREADS", "1").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// `x³ − x` on `[−1, 1]`; minimum `−2/(3√3)` at `x = 1/√3`.
fn cubic_pop(dir: &Path) -> PathBuf {
    let f = Polynomial::from_terms(1, [(MultiIndex::new(vec![3]), 1.0), (MultiIndex::new(vec![1]), -1.0)]).unwrap();
    let inst = pop_instance(MeasureSlot::unit_ball(1), f);
    write(dir, "pop.json", &serde_json::to_string(&inst).unwrap())
}

fn csv_rows(s: &str) -> Vec<Vec<String>> {
    s.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn rates_lists_kappa_over_ell_squared() {
    let o = run(&["rates", "--kappa", "2", "--theta", "2", "--ell-min", "10", "--max-order", "20", "--step", "10"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "10");
    assert!((rows[0][1].parse::<f64>().unwrap() - 0.02).abs() < 1e-15);
    assert_eq!(rows[1][0], "20");
    assert!((rows[1][1].parse::<f64>().unwrap() - 0.005).abs() < 1e-15);
}

#[test]
fn rates_generic_preset_without_exponent_fails() {
    let o = run(&["rates", "--preset", "generic", "--n", "2", "--deg", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decompose_single_power() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"n":2,"terms":[{"alpha":[4,0],"coef":1.0}]}"#);
    let o = run(&["decompose", f.to_str().unwrap(), "--mode", "positive"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let atoms = v["atoms"]["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert!((atoms[0]["weight"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(atoms[0]["point"][0].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(v["diagnostics"]["certified"], true);
}

#[test]
fn decompose_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.json", "{\"n\": 2, \"terms\": [");
    assert_eq!(run(&["decompose", f.to_str().unwrap()]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["decompose", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sweep_closes_gap_on_univariate_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let pop = cubic_pop(dir.path());
    let opt = -2.0 / (3.0 * 3f64.sqrt());
    let reference = opt.to_string();
    let o = run(&["sweep", pop.to_str().unwrap(), "--orders", "4,6,8", "--reference", &reference]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    let last = &rows[2];
    assert_eq!(last[0], "8");
    let p: f64 = last[1].parse().unwrap();
    assert!((p - opt).abs() <= 1e-6, "p_8 = {p}");
    let gap: f64 = last[3].parse().unwrap();
    assert!(gap.abs() <= 1e-6);
}

#[test]
fn hausdorff_single_sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let pop = cubic_pop(dir.path());
    let args = ["hausdorff", pop.to_str().unwrap(), "--samples", "1", "--orders", "4", "--grid", "201", "--seed", "3"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(csv_rows(&stdout(&a)).len(), 1);
}

#[test]
fn hausdorff_order_below_degree_fails() {
    let dir = tempfile::tempdir().unwrap();
    let pop = cubic_pop(dir.path());
    let o = run(&["hausdorff", pop.to_str().unwrap(), "--k", "4", "--orders", "2", "--samples", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let pop = cubic_pop(dir.path());
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = run(&[
        "hausdorff", pop.to_str().unwrap(), "--samples", "3", "--orders", "4,6", "--grid", "201",
        "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = run(&["replay", first.join("manifest.json").to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success());
    let a = std::fs::read(first.join("hausdorff.csv")).unwrap();
    let b = std::fs::read(second.join("hausdorff.csv")).unwrap();
    assert_eq!(a, b);
}
