use conormal::exec::{self, Mode};
use conormal::gen::Limits;
use conormal::suites::run_check;

// Global mode switching lives in its own test binary, with one test, so
// nothing else observes the flip.
#[test]
fn sequential_and_parallel_reports_agree() {
    let names: Vec<String> = ["index", "compose", "pushforward", "lefschetz", "twist"]
        .map(String::from)
        .into();
    let limits = Limits::new(3, 30);
    exec::set_mode(Mode::Sequential);
    assert_eq!(exec::mode(), Mode::Sequential);
    let seq = run_check(3, 25, limits, &names).unwrap();
    exec::set_mode(Mode::Parallel);
    let par = run_check(3, 25, limits, &names).unwrap();
    assert_eq!(seq.render(), par.render());
    assert!(seq.passed(), "{}", seq.render());
}
