//! Sequential against data-parallel execution of the property suites.
//!
//! Run with `cargo bench -p conormal-core`. Without the `parallel` feature
//! both variants run on one thread, which makes a useful baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use conormal::exec::{self, Mode};
use conormal::gen::Limits;
use conormal::suites::run_suite;

const CASES: usize = 64;

fn suites(c: &mut Criterion) {
    let mut group = c.benchmark_group("suites");
    group.sample_size(10);
    for suite in ["index", "compose", "external", "lefschetz"] {
        for (label, mode) in [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, suite), &suite, |b, &suite| {
                exec::set_mode(mode);
                b.iter(|| {
                    let r = run_suite(black_box(suite), 1, CASES, Limits::default()).expect("known suite");
                    assert!(r.failures.is_empty());
                    r
                });
            });
        }
    }
    exec::set_mode(Mode::Parallel);
    group.finish();
}

criterion_group!(benches, suites);
criterion_main!(benches);
