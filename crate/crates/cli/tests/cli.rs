use std::path::Path;
use std::process::{Command, Output};

fn zsg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsg"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path) {
    let o = zsg(
        &[
            "generate",
            "--states",
            "4",
            "--actions",
            "2,3",
            "--alpha",
            "0.6",
            "--seed",
            "1",
            "--out",
            "g.json",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn matrix_reports_value_and_strategies() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), "[[3,1],[0,2]]").unwrap();
    let o = zsg(&["matrix", "--file", "m.json"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("value: 1.50000"), "{out}");
    assert!(out.contains("row strategy: (0.500000, 0.500000)"), "{out}");
    assert!(
        out.contains("column strategy: (0.250000, 0.750000)"),
        "{out}"
    );
}

#[test]
fn ragged_matrix_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), "[[1,2],[3]]").unwrap();
    let o = zsg(&["matrix", "--file", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn generated_game_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let o = zsg(
        &["solve", "--game", "g.json", "--out", "s.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(doc["j_star"].as_array().unwrap().len(), 4);
    assert!(doc["iterations_t_w"].as_u64().unwrap() <= doc["iterations_t"].as_u64().unwrap());
}

#[test]
fn learn_writes_trace_and_table() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let o = zsg(
        &[
            "learn", "--game", "g.json", "--mode", "standard", "--iters", "40", "--trace", "t.csv",
            "--out", "q.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("n,w_n,error,q_norm"));
    assert_eq!(trace.lines().count(), 42);
    let q = zsg::QTable::from_json(&std::fs::read_to_string(dir.path().join("q.json")).unwrap())
        .unwrap();
    assert_eq!(q.as_slice().len(), 4 * 2 * 3);
}

#[test]
fn relaxation_above_limit_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let o = zsg(
        &[
            "learn",
            "--game",
            "g.json",
            "--mode",
            "fixed:3.0",
            "--iters",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("relaxation out of range"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn solve_rejects_w_above_w_star() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let o = zsg(&["solve", "--game", "g.json", "--w", "2.4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        zsg(&["solve", "--bogus"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(zsg(&[], dir.path()).status.code(), Some(2));
    assert_eq!(
        zsg(&["generate", "--states", "3"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = zsg(&["solve", "--game", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"));
}

#[test]
fn experiment_writes_csv_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"game":{"states":3,"actions_u":2,"actions_v":2,"alpha":0.6,"seed":5},"episodes":2,"iterations":50}"#,
    )
    .unwrap();
    let o = zsg(
        &["experiment", "--config", "exp.json", "--out", "r.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Standard minimax Q-learning"));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("algorithm,episode,error\n"));
    assert_eq!(
        csv.lines()
            .filter(|l| l.starts_with("generalized_optimal,"))
            .count(),
        3
    );
}
