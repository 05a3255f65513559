use std::path::Path;
use std::process::{Command, Output};

use crgsolve::baselines::{dp_solve, DpConfig};
use crgsolve::domains::example_two_agent;
use crgsolve::formats::{read_results, write_instance, write_policy, Algorithm, RunStatus};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crgsolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_line(o: &Output) -> f64 {
    let text = stdout(o);
    let last = text.lines().last().expect("output present");
    last.strip_prefix("value=").expect("value line last").parse().unwrap()
}

fn write_example(dir: &Path) -> String {
    let path = dir.join("example.json");
    std::fs::write(&path, write_instance(&example_two_agent())).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dp_on_example_prints_oracle_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path());
    let expected = dp_solve(&example_two_agent(), &DpConfig::default()).unwrap().value;
    for algorithm in ["dp", "core", "crg-ps"] {
        let o = run(&["solve", "--algorithm", algorithm, "--instance", &path]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(value_line(&o), expected);
        assert_eq!(stdout(&o).matches("value=").count(), 1);
    }
}

#[test]
fn repeated_solves_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path());
    let a = run(&["solve", "--algorithm", "core", "--instance", &path]);
    let b = run(&["solve", "--algorithm", "core", "--instance", &path]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_probabilities_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = example_two_agent();
    m.agents[1].set_outcomes(
        0,
        2,
        vec![
            crgsolve::Outcome { next: 3, probability: 0.5 },
            crgsolve::Outcome { next: 4, probability: 0.25 },
        ],
    );
    let path = dir.path().join("bad.json");
    std::fs::write(&path, write_instance(&m)).unwrap();
    let o = run(&["solve", "--algorithm", "core", "--instance", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sum to 0.75"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--algorithm", "astar", "--instance", "x"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--algorithm", "dp", "--instance", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn limits_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--family", "mpp", "--n", "3", "--horizon", "4", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let path = dir.path().join("mpp-2.json");
    let path = path.to_str().unwrap();
    let o = run(&["solve", "--algorithm", "core", "--instance", path, "--time-limit", "0"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["solve", "--algorithm", "dp", "--instance", path, "--max-states", "2"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn evaluate_reads_a_policy() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path());
    let result = dp_solve(&example_two_agent(), &DpConfig::default()).unwrap();
    let policy = dir.path().join("policy.json");
    std::fs::write(&policy, write_policy(&result.policy)).unwrap();
    let o = run(&["evaluate", "--instance", &path, "--policy", policy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value_line(&o), result.value);
}

#[test]
fn export_dot_writes_a_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_example(dir.path());
    let o = run(&["export-dot", "--instance", &path, "--agent", "0", "--bounds"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("digraph"));
    assert_eq!(run(&["export-dot", "--instance", &path, "--agent", "5"]).status.code(), Some(2));
}

#[test]
fn bench_sweep_agrees_with_dp() {
    let dir = tempfile::tempdir().unwrap();
    let instances = dir.path().join("instances");
    let o = run(&[
        "generate", "--family", "mpp", "--n", "2", "--tasks", "2", "--horizon", "3", "--count", "10", "--out",
        instances.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = dir.path().join("results.csv");
    let o = run(&[
        "bench", "--instances", instances.to_str().unwrap(), "--algorithms", "core,crg-ps,dp", "--time-limit", "60",
        "--out", out.to_str().unwrap(), "--jobs", "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = read_results(&text).unwrap();
    assert_eq!(rows.len(), 30);
    assert_eq!(text.lines().count(), 31);
    for chunk in rows.chunks(3) {
        let algorithms: Vec<Algorithm> = chunk.iter().map(|r| r.algorithm).collect();
        assert_eq!(algorithms, Algorithm::ALL);
        assert!(chunk.iter().all(|r| r.instance_id == chunk[0].instance_id));
        let dp = chunk[2].value.unwrap();
        for r in chunk.iter().filter(|r| r.status == RunStatus::Solved) {
            assert!((r.value.unwrap() - dp).abs() < 1e-9, "{r:?}");
        }
    }
}
