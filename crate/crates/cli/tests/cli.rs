use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn conormal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conormal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn run_on(cmd: &str, file: &str, rest: &[&str]) -> Output {
    let path = fixture(file);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(rest);
    conormal(&args)
}

#[test]
fn validate_exit_codes() {
    assert_eq!(run_on("validate", "hollow_triangle.json", &[]).status.code(), Some(0));

    let flipped = run_on("validate", "flipped_sign.json", &[]);
    assert_eq!(flipped.status.code(), Some(1));
    let err = String::from_utf8_lossy(&flipped.stderr);
    assert!(err.contains("(abc, a)"), "{err}");

    // a one-dimensional flip is caught by the augmented boundary
    let flipped = run_on("validate", "flipped_hollow_triangle.json", &[]);
    assert_eq!(flipped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flipped.stderr).contains("(ac, ∅)"));

    assert_eq!(run_on("validate", "malformed.json", &[]).status.code(), Some(3));
    assert_eq!(conormal(&["validate", "/nonexistent/file.json"]).status.code(), Some(3));
}

#[test]
fn chi_examples() {
    for (file, sheaf, want) in [
        ("tetrahedron_boundary.json", "k", "2"),
        ("torus.json", "k", "0"),
        ("interval.json", "open_edge", "-1"),
        ("filled_triangle_poset.json", "k", "1"),
    ] {
        let o = run_on("chi", file, &[sheaf]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).trim(), want, "{file} {sheaf}");
    }
}

#[test]
fn ambiguous_payload_name_is_rejected() {
    assert_eq!(run_on("chi", "interval.json", &[]).status.code(), Some(1));
    assert_eq!(run_on("chi", "interval.json", &["nope"]).status.code(), Some(1));
    assert_eq!(run_on("chi", "torus.json", &[]).status.code(), Some(0));
}

#[test]
fn cc_listing() {
    let out = stdout(&run_on("cc", "hollow_triangle.json", &["k"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[..3]
        .iter()
        .all(|l| l.starts_with("+1 ") && l.ends_with("(dim 0)")));
    assert!(lines[3..6]
        .iter()
        .all(|l| l.starts_with("-1 ") && l.ends_with("(dim 1)")));
    assert_eq!(lines[6], "degree 0");

    assert_eq!(stdout(&run_on("cc", "interval.json", &["zero"])), "degree 0\n");

    let dual = stdout(&run_on("dual", "hollow_triangle.json", &["k"]));
    let flipped: String = out
        .lines()
        .map(|l| match l.as_bytes()[0] {
            b'+' => l.replacen('+', "-", 1),
            b'-' => l.replacen('-', "+", 1),
            _ => l.to_string(),
        })
        .map(|l| l + "\n")
        .collect();
    assert_eq!(dual, flipped);
    // the loaded dual payload agrees with the command
    assert_eq!(stdout(&run_on("cc", "hollow_triangle.json", &["dual"])), dual);
}

#[test]
fn lefschetz_worked_examples() {
    for (name, want) in [("identity", "0"), ("rotation", "0"), ("reflection", "2")] {
        let o = run_on("lefschetz", "hollow_triangle.json", &[name]);
        assert_eq!(o.status.code(), Some(0));
        let out = stdout(&o);
        assert!(out.contains(&format!("global trace: {want}\n")), "{name}: {out}");
        assert!(out.contains(&format!("local sum: {want}\n")), "{name}: {out}");
        assert!(out.ends_with("verdict: equal\n"));
    }
}

#[test]
fn compose_and_pushforward_wrappers() {
    let o = run_on("compose", "kernels.json", &["k12", "k23"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("verdict: equal\n"));

    let o = run_on("pushforward", "interval.json", &["collapse", "open_edge"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("-1 [0] (dim 0)"));
}

#[test]
fn expand_round_trips() {
    let o = run_on("expand", "kernels.json", &["composed"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expanded.json");
    std::fs::write(&path, &o.stdout).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(conormal(&["validate", p]).status.code(), Some(0));
    assert_eq!(conormal(&["chi", p, "composed"]).status.code(), Some(0));
}

#[test]
fn check_matches_golden_report() {
    let o = conormal(&["check", "--seed", "1", "--cases", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(fixture("check_seed1_cases20.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn index_suite_seed_one() {
    let o = conormal(&["check", "--seed", "1", "--cases", "100", "--suite", "index"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("index          100 cases     0 failures"));
}

#[test]
fn check_is_deterministic_across_thread_counts() {
    let args = [
        "check",
        "--seed",
        "7",
        "--cases",
        "15",
        "--suite",
        "compose",
        "--suite",
        "lefschetz",
    ];
    let a = conormal(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_conormal"))
        .args(args)
        .env("CONORMAL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn negative_control_writes_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let ce = dir.path().join("ce.json");
    let o = conormal(&[
        "check",
        "--seed",
        "1",
        "--cases",
        "10",
        "--suite",
        "index",
        "--suite",
        "tensor",
        "--negative-control",
        "--counterexample",
        ce.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let golden = std::fs::read_to_string(fixture("check_seed1_negative_control.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
    // the counterexample is itself a valid instance file
    assert_eq!(conormal(&["validate", ce.to_str().unwrap()]).status.code(), Some(0));
    // and without the corruption the same instance satisfies the identity
    let chi = conormal(&["chi", ce.to_str().unwrap()]);
    assert_eq!(chi.status.code(), Some(0));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = conormal(&["check", "--suite", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}
