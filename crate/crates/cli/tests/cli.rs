use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergmgeo"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ergmgeo")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Params {
    _dir: TempDir,
    path: PathBuf,
}

impl Params {
    fn arg(&self) -> &str {
        self.path.to_str().unwrap()
    }
}

fn params(json: &str) -> Params {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    std::fs::write(&path, json).unwrap();
    Params { _dir: dir, path }
}

fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).expect("schema compiles")
}

fn assert_valid(doc: &str) -> Value {
    let v: Value = serde_json::from_str(doc).expect("json output");
    let s = schema();
    if let Err(errors) = s.validate(&v) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:#?}");
    }
    drop(s);
    v
}

const CUBIC_NEG: &str = r#"{"T": 1, "beta_triangle": -1, "beta_stars": [0, -1]}"#;
const MEDICI: &str = r#"{"T": 1, "beta_triangle": 1.3126, "beta_stars": [-4.2858, 1.0611, -0.6339]}"#;
const ZERO: &str = r#"{"T": 1, "beta_triangle": 0, "beta_stars": [0]}"#;

#[test]
fn lorentzian_check_exits_zero() {
    let p = params(CUBIC_NEG);
    let o = run(&["check", "--complete", "3", "--params", p.arg(), "--which", "lorentzian"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("lorentzian: Lorentzian"));
}

#[test]
fn medici_necessary_refutes() {
    let p = params(MEDICI);
    let o = run(&["check", "--dataset", "medici_business", "--params", p.arg(), "--which", "necessary"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("triangle_vs_two_star=fail"));
}

#[test]
fn zero_budget_is_undetermined() {
    let p = params(r#"{"T": 1, "beta_triangle": -1, "beta_stars": [0.4]}"#);
    let o = run(&["check", "--complete", "4", "--params", p.arg(), "--which", "stability", "--budget", "0"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let o = run(&["check", "--complete", "4", "--params", p.arg(), "--which", "stability", "--budget", "1000"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn product_form_is_certified_without_search() {
    let p = params(r#"{"T": 2, "beta_triangle": 0, "beta_stars": [1.5]}"#);
    let o = run(&["check", "--complete", "4", "--params", p.arg(), "--which", "stability", "--budget", "0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("certified stable (product-form)"));
}

#[test]
fn usage_errors_exit_64() {
    let p = params(ZERO);
    assert_eq!(code(&run(&["check", "--complete", "3", "--bogus"])), 64);
    assert_eq!(code(&run(&["check", "--params", p.arg()])), 64);
    assert_eq!(code(&run(&["nonsense"])), 64);
    let bad = params(r#"{"T": 0, "beta_triangle": 0, "beta_stars": [0]}"#);
    let o = run(&["enumerate", "--complete", "3", "--params", bad.arg()]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`T`"));
    let o = run(&["enumerate", "--complete", "8", "--params", p.arg()]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumeration cap"));
    assert_eq!(code(&run(&["fit", "--dataset", "lazega_work", "--iters", "0"])), 64);
}

#[test]
fn enumerate_zero_params() {
    let p = params(ZERO);
    let o = run(&["enumerate", "--complete", "3", "--params", p.arg(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = assert_valid(&stdout(&o));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!((r["probability"].as_f64().unwrap() - 0.125).abs() < 1e-15);
    }
}

#[test]
fn enumerate_edge_ratio() {
    let p = params(r#"{"T": 1, "beta_triangle": 0, "beta_stars": [1]}"#);
    let o = run(&["enumerate", "--complete", "3", "--params", p.arg(), "--format", "json"]);
    let v = assert_valid(&stdout(&o));
    let rows = v["rows"].as_array().unwrap();
    let ratio = rows[1]["probability"].as_f64().unwrap() / rows[0]["probability"].as_f64().unwrap();
    assert!((ratio - (2.0f64 / 9.0).exp()).abs() < 1e-12);
}

#[test]
fn every_command_emits_schema_valid_json() {
    let p = params(CUBIC_NEG);
    let k = p.arg();
    let traj = tempfile::tempdir().unwrap();
    let traj_path = traj.path().join("t.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["enumerate", "--complete", "3", "--params", k],
        vec!["poly", "--complete", "3", "--params", k],
        vec!["poly", "--complete", "3", "--params", k, "--homogenize"],
        vec!["check", "--complete", "3", "--params", k, "--budget", "500"],
        vec!["check", "--complete", "4", "--params", k, "--budget", "500", "--which", "stability"],
        vec!["check", "--complete", "8", "--params", k, "--budget", "500"],
        vec!["sample", "--complete", "3", "--params", k, "--sweeps", "300"],
        vec!["sample", "--complete", "8", "--params", k, "--sweeps", "50", "--chains", "2"],
        vec!["datasets", "list"],
        vec!["export-dot", "--dataset", "sampson"],
        vec!["fit", "--dataset", "medici_business", "--stars", "3", "--iters", "2", "--sweeps", "50", "--burnin", "10"],
    ];
    for mut args in cases {
        args.extend(["--format", "json"]);
        let o = run(&args);
        assert!(matches!(code(&o), 0..=2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_valid(&stdout(&o));
    }
    let o = run(&[
        "fit", "--complete", "3", "--iters", "1", "--sweeps", "20", "--trajectory", traj_path.to_str().unwrap(),
        "--format", "json", "--timing",
    ]);
    let v = assert_valid(&stdout(&o));
    assert!(v["timing"]["elapsed_seconds"].as_f64().is_some());
    assert!(std::fs::read_to_string(&traj_path).unwrap().starts_with("iteration,beta_1,beta_2,beta_triangle,gap\n"));
}

#[test]
fn reports_are_reproducible() {
    let p = params(r#"{"T": 1, "beta_triangle": 0.3, "beta_stars": [0.2, -0.1]}"#);
    let args = ["check", "--complete", "4", "--params", p.arg(), "--seed", "11", "--budget", "20000", "--format", "json"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let mut threads = args.to_vec();
    threads.extend(["--threads", "1"]);
    assert_eq!(a, stdout(&run(&threads)));

    let sargs = ["sample", "--complete", "4", "--params", p.arg(), "--seed", "4", "--sweeps", "500"];
    assert_eq!(stdout(&run(&sargs)), stdout(&run(&sargs)));
}

#[test]
fn sample_reports_exact_comparison() {
    let p = params(ZERO);
    let o = run(&["sample", "--complete", "3", "--params", p.arg(), "--sweeps", "20000", "--format", "json"]);
    let v = assert_valid(&stdout(&o));
    let s = &v["stats"][0];
    let (mean, se) = (s["mean"].as_f64().unwrap(), s["stderr"].as_f64().unwrap());
    assert!((mean - 1.0 / 3.0).abs() < 4.0 * se);

    let o = run(&["sample", "--complete", "8", "--params", p.arg(), "--sweeps", "10"]);
    assert!(stdout(&o).contains("unavailable"));
}

#[test]
fn fit_pipeline_ends_with_verdict() {
    for (ds, k) in [("medici_business", "3"), ("sampson", "2")] {
        let o = run(&["fit", "--dataset", ds, "--stars", k, "--iters", "0", "--sweeps", "100"]);
        assert_eq!(code(&o), 0);
        let text = stdout(&o);
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("SR verdict: "), "{text}");
        assert!(text.contains("converged: false after 0 updates") || text.contains("after 0 updates"));
    }
}

#[test]
fn edge_list_input_and_dot_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.edges");
    std::fs::write(&path, "a b\nb c\nc a\nb a\n").unwrap();
    let p = params(ZERO);
    let o = run(&["check", "--graph", path.to_str().unwrap(), "--params", p.arg(), "--which", "necessary"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 duplicate edge"));
    let out = dir.path().join("g.dot");
    let o = run(&["export-dot", "--graph", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("graph \"g\" {"));

    std::fs::write(&path, "a a\n").unwrap();
    let o = run(&["export-dot", "--graph", path.to_str().unwrap()]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn datasets_list_marks_bundled() {
    let text = stdout(&run(&["datasets", "list"]));
    assert!(text.lines().any(|l| l.starts_with("medici_business") && l.contains("true")));
    assert!(text.lines().any(|l| l.starts_with("bank_wiring") && l.contains("false")));
}
