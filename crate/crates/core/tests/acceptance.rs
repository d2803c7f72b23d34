//! One line per acceptance criterion. Exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use conormal::gen::Limits;
use conormal::io::{load_str, Instance};
use conormal::mueu::{mueu, set_negative_control};
use conormal::qlinalg::q;
use conormal::suites::{run_suite, SuiteReport};

const SEED: u64 = 1;

fn fixture(name: &str) -> Instance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn suite(name: &str, cases: usize) -> SuiteReport {
    run_suite(name, SEED, cases, Limits::default()).expect("known suite")
}

fn summarize(r: &SuiteReport) -> String {
    match r.failures.first() {
        None => format!("{} {} cases, 0 failures", r.name, r.cases),
        Some(f) => format!(
            "{} {} cases, {} failures, first at case {} [{}] {}",
            r.name,
            r.cases,
            r.failures.len(),
            f.case,
            f.property,
            f.detail
        ),
    }
}

/// A criterion's verdict and a short account of what was checked.
struct Verdict(bool, String);

fn suite_criterion(name: &str, cases: usize) -> Verdict {
    let r = suite(name, cases);
    Verdict(r.failures.is_empty(), summarize(&r))
}

fn index_criterion() -> Verdict {
    let start = Instant::now();
    let r = suite("index", 500);
    let secs = start.elapsed().as_secs_f64();
    Verdict(
        r.failures.is_empty() && secs < 60.0,
        format!("{} in {secs:.1}s", summarize(&r)),
    )
}

fn lefschetz_criterion() -> Verdict {
    let inst = fixture("hollow_triangle.json");
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, want) in [("identity", 0), ("rotation", 0), ("reflection", 2)] {
        let l = &inst.lefschetz[name];
        let global = l.global_trace().expect("trace");
        let hopf = l.cohomology_trace().expect("trace");
        let local = l.local_trace_sum();
        ok &= global == q(want) && hopf == q(want) && local == q(want);
        notes.push(format!("{name} {global}/{local}"));
    }
    let r = suite("lefschetz", 100);
    ok &= r.failures.is_empty();
    Verdict(ok, format!("{}; {}", notes.join(", "), summarize(&r)))
}

fn duality_criterion() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (file, stalk, chi) in [("hollow_triangle.json", -1, 0), ("tetrahedron_boundary.json", 1, 2)] {
        let inst = fixture(file);
        let k = &inst.sheaves["k"];
        let d = k.verdier_dual().expect("dual");
        let stalks_ok = (0..d.base().len()).all(|c| d.stalk_euler(c) == stalk);
        let degree = mueu(&d).degree();
        ok &= stalks_ok && degree == chi && k.base().euler() == chi;
        notes.push(format!("{file}: stalks {stalk} {stalks_ok}, degree {degree}"));
    }
    let r = suite("duality", 100);
    ok &= r.failures.is_empty();
    Verdict(ok, format!("{}; {}", notes.join("; "), summarize(&r)))
}

fn negative_control_criterion() -> Verdict {
    set_negative_control(true);
    let broken: Vec<SuiteReport> = ["index", "compose", "tensor"].iter().map(|s| suite(s, 100)).collect();
    set_negative_control(false);
    let all_fail = broken.iter().all(|r| !r.failures.is_empty());
    let counts: Vec<String> = broken
        .iter()
        .map(|r| format!("{} {}/{} failing", r.name, r.failures.len(), r.cases))
        .collect();
    Verdict(all_fail, format!("with the sign perturbed: {}", counts.join(", ")))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: Vec<Criterion> = vec![
        ("index theorem", index_criterion),
        ("composition", || suite_criterion("compose", 200)),
        ("external product", || suite_criterion("external", 200)),
        ("direct image", || suite_criterion("pushforward", 200)),
        ("tensor and abstract index", || suite_criterion("tensor", 200)),
        ("point case", || suite_criterion("point", 100)),
        ("twist invariance", || suite_criterion("twist", 100)),
        ("Lefschetz", lefschetz_criterion),
        ("duality", duality_criterion),
        ("negative control", negative_control_criterion),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let Verdict(ok, detail) = run();
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<26} {}  {} ({:.1}s)",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
