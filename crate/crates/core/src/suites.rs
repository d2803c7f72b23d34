//! Seeded property suites. Each case draws a fresh instance from its own
//! random stream, computes both sides of an identity by independent routes
//! (cycle algebra on one side, cochain totalization on the other) and
//! reports any disagreement with the instance that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::cellcx::{product, CellComplex};
use crate::exec;
use crate::gen::{self, case_rng, CaseRng, Limits};
use crate::io::Instance;
use crate::mueu::{
    compose_cycle, external_cycle, mueu, pullback_cycle_projection, pushforward_cycle, star, support_compose, LagCycle,
};
use crate::qlinalg::VectComplex;
use crate::sheaf::{CellularSheaf, SheafMorphism};
use crate::tracekernel::{eu_point, shift_twist, tk};

/// Suite names in their canonical order.
pub const SUITES: [&str; 12] = [
    "index",
    "compose",
    "external",
    "pushforward",
    "tensor",
    "point",
    "twist",
    "lefschetz",
    "duality",
    "cone",
    "assoc",
    "support",
];

#[derive(Debug, Clone)]
pub struct Failure {
    pub suite: String,
    pub case: usize,
    pub property: String,
    pub detail: String,
    /// Total cells over the bases of the instance.
    pub size: usize,
    /// The instance as an instance-file JSON document.
    pub counterexample: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub seed: u64,
    pub cases: usize,
    pub limits: Limits,
    pub suites: Vec<SuiteReport>,
    pub wall_time: Duration,
}

impl CheckReport {
    pub fn failure_count(&self) -> usize {
        self.suites.iter().map(|s| s.failures.len()).sum()
    }

    pub fn passed(&self) -> bool {
        self.failure_count() == 0
    }

    /// Smallest failing instance, ties broken by suite order then case.
    pub fn smallest_failure(&self) -> Option<&Failure> {
        self.suites.iter().flat_map(|s| &s.failures).min_by_key(|f| f.size)
    }

    /// Text form. Wall time is left out so that equal inputs give
    /// byte-identical reports.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "check seed={} cases={} max-dim={} max-cells={}",
            self.seed, self.cases, self.limits.max_dim, self.limits.max_cells
        );
        for s in &self.suites {
            let _ = writeln!(
                out,
                "{:<12} {:>5} cases {:>5} failures",
                s.name,
                s.cases,
                s.failures.len()
            );
            for f in &s.failures {
                let _ = writeln!(out, "  case {} [{}] {} (size {})", f.case, f.property, f.detail, f.size);
            }
        }
        let _ = writeln!(out, "total failures: {}", self.failure_count());
        out
    }
}

#[derive(Debug)]
struct CaseFailure {
    property: String,
    detail: String,
    instance: Instance,
}

type Case = Result<(), Box<CaseFailure>>;

fn fail(property: &str, detail: impl Into<String>, instance: &Instance) -> Box<CaseFailure> {
    Box::new(CaseFailure {
        property: property.into(),
        detail: detail.into(),
        instance: instance.clone(),
    })
}

fn ensure(ok: bool, property: &str, detail: impl FnOnce() -> String, instance: &Instance) -> Case {
    if ok {
        Ok(())
    } else {
        Err(fail(property, detail(), instance))
    }
}

/// Runs an operation that may fail, turning an error into a case failure.
fn attempt<T, E: std::fmt::Display>(
    r: Result<T, E>,
    property: &str,
    instance: &Instance,
) -> Result<T, Box<CaseFailure>> {
    r.map_err(|e| fail(property, e.to_string(), instance))
}

fn with_sheaves(pairs: &[(&str, &CellularSheaf)]) -> Instance {
    let mut inst = Instance::default();
    for (n, s) in pairs {
        inst.sheaves.insert(n.to_string(), (*s).clone());
    }
    inst
}

/// `sum (-1)^n dim H^n`, via ranks of the differentials.
fn homology_euler(v: &VectComplex) -> i64 {
    v.betti()
        .iter()
        .map(|(n, b)| if n % 2 == 0 { *b as i64 } else { -(*b as i64) })
        .sum()
}

fn cycles_differ(a: &LagCycle, b: &LagCycle) -> String {
    let (ma, mb) = (a.to_map(), b.to_map());
    let mut diff = Vec::new();
    for id in ma.keys().chain(mb.keys()) {
        let (x, y) = (ma.get(id).copied().unwrap_or(0), mb.get(id).copied().unwrap_or(0));
        if x != y && !diff.iter().any(|d: &String| d.starts_with(&format!("{id}:"))) {
            diff.push(format!("{id}: {x} vs {y}"));
        }
        if diff.len() == 4 {
            break;
        }
    }
    if a.base() != b.base() {
        return "bases differ".into();
    }
    diff.join(", ")
}

fn same_cycle(a: &LagCycle, b: &LagCycle, property: &str, inst: &Instance) -> Case {
    ensure(a == b, property, || cycles_differ(a, b), inst)
}

fn index_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let x = gen::random_complex(rng, limits);
    let f = gen::random_sheaf(rng, &x);
    let inst = with_sheaves(&[("F", &f)]);
    let degree = mueu(&f).degree();
    let gs = attempt(f.global_sections(), "hypercohomology", &inst)?;
    let chi = homology_euler(&gs);
    ensure(
        degree == chi,
        "index theorem",
        || format!("degree {degree} vs chi {chi}"),
        &inst,
    )?;
    attempt(f.euler_char(), "euler characteristic routes agree", &inst)?;
    Ok(())
}

fn compose_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let outer = limits.shrink(2, 6);
    let m1 = gen::random_complex(rng, outer);
    let m2 = gen::random_complex(rng, limits.shrink(limits.max_dim, 12));
    let m3 = gen::random_complex(rng, outer);
    let k12 = gen::random_sheaf(rng, &product(&m1, &m2).complex);
    let k23 = gen::random_sheaf(rng, &product(&m2, &m3).complex);
    let inst = with_sheaves(&[("K12", &k12), ("K23", &k23)]);
    let k13 = attempt(CellularSheaf::kernel_compose(&k12, &k23), "kernel composition", &inst)?;
    let rhs = attempt(compose_cycle(&mueu(&k12), &mueu(&k23)), "cycle composition", &inst)?;
    same_cycle(&mueu(&k13), &rhs, "class of a composition", &inst)
}

fn external_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let small = limits.shrink(limits.max_dim, 12);
    let a = gen::random_complex(rng, small);
    let b = gen::random_complex(rng, small);
    let f = gen::random_sheaf(rng, &a);
    let g = gen::random_sheaf(rng, &b);
    let inst = with_sheaves(&[("F", &f), ("G", &g)]);
    let (mf, mg) = (mueu(&f), mueu(&g));
    same_cycle(
        &mueu(&f.external(&g)),
        &external_cycle(&mf, &mg),
        "external product",
        &inst,
    )?;
    let p = product(&a, &b);
    let up = attempt(CellularSheaf::pullback(&p.first, &f), "pullback", &inst)?;
    let rhs = attempt(pullback_cycle_projection(&p.first, &mf), "cycle pullback", &inst)?;
    same_cycle(&mueu(&up), &rhs, "pullback along the first projection", &inst)?;
    let up = attempt(CellularSheaf::pullback(&p.second, &g), "pullback", &inst)?;
    let rhs = attempt(pullback_cycle_projection(&p.second, &mg), "cycle pullback", &inst)?;
    same_cycle(&mueu(&up), &rhs, "pullback along the second projection", &inst)
}

fn pushforward_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let (f, kind) = gen::random_map(rng, limits.shrink(limits.max_dim, 30));
    let sheaf = gen::random_sheaf(rng, f.source());
    let mut inst = with_sheaves(&[("F", &sheaf)]);
    inst.maps.insert("f".into(), f.clone());
    let g = attempt(CellularSheaf::pushforward(&f, &sheaf), "direct image", &inst)?;
    attempt(g.check(), &format!("direct image along a {kind} is a sheaf"), &inst)?;
    let rhs = attempt(pushforward_cycle(&f, &mueu(&sheaf)), "cycle direct image", &inst)?;
    same_cycle(&mueu(&g), &rhs, &format!("direct image along a {kind}"), &inst)?;
    if f.source().len() <= 20 {
        let before = attempt(sheaf.global_sections(), "hypercohomology", &inst)?.betti();
        let after = attempt(g.global_sections(), "hypercohomology", &inst)?.betti();
        ensure(
            before == after,
            "direct image preserves cohomology",
            || format!("{before:?} vs {after:?}"),
            &inst,
        )?;
    }
    Ok(())
}

fn tensor_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let x = gen::random_complex(rng, limits);
    let f = gen::random_sheaf(rng, &x);
    let g = gen::random_sheaf(rng, &x);
    let inst = with_sheaves(&[("F", &f), ("G", &g)]);
    let t = attempt(f.tensor(&g), "tensor product", &inst)?;
    let s = attempt(star(&mueu(&f), &mueu(&g)), "star product", &inst)?;
    same_cycle(&mueu(&t), &s, "tensor product", &inst)?;
    let chi = homology_euler(&attempt(t.global_sections(), "hypercohomology", &inst)?);
    ensure(
        s.degree() == chi,
        "abstract index",
        || format!("degree {} vs chi {chi}", s.degree()),
        &inst,
    )
}

fn point_case(rng: &mut CaseRng, _limits: Limits) -> Case {
    let v = gen::random_vect_complex(rng);
    let pt = Arc::new(CellComplex::point());
    let f = CellularSheaf::from_raw(pt, vec![v.clone()], vec![Vec::new()]);
    let inst = with_sheaves(&[("V", &f)]);
    let k = attempt(tk(&f), "trace kernel", &inst)?;
    let e = attempt(eu_point(&k), "point trace", &inst)?;
    let chi = homology_euler(&v);
    ensure(e == chi, "point case", || format!("eu {e} vs chi {chi}"), &inst)
}

fn twist_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let (leaves, k) = gen::random_trace_kernel(rng, limits);
    let mut inst = Instance::default();
    for (i, f) in leaves.iter().enumerate() {
        inst.sheaves.insert(format!("F{}", i + 1), f.clone());
    }
    let k = attempt(k, "trace kernel construction", &inst)?;
    inst.kernels.insert("K".into(), k.clone());
    same_cycle(k.class(), &mueu(k.generator()), "class of the generating sheaf", &inst)?;
    for d in -3..=3 {
        let t = attempt(shift_twist(&k, d), "shift twist", &inst)?;
        same_cycle(t.class(), k.class(), &format!("twist by {d} keeps the class"), &inst)?;
        let base = k.underlying().base();
        let moved = (0..base.len()).find(|&c| t.underlying().stalk_euler(c) != k.underlying().stalk_euler(c));
        ensure(
            moved.is_none(),
            &format!("twist by {d} keeps stalk characteristics"),
            || format!("at {}", base.id_of(moved.unwrap_or(0))),
            &inst,
        )?;
    }
    Ok(())
}

fn lefschetz_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let l = gen::random_lefschetz(rng, limits.shrink(2, 30));
    let mut inst = Instance::default();
    inst.lefschetz.insert("L".into(), l.clone());
    let global = attempt(l.global_trace(), "global trace", &inst)?;
    let hopf = attempt(l.cohomology_trace(), "trace on cohomology", &inst)?;
    let local = l.local_trace_sum();
    ensure(
        global == local,
        "Lefschetz formula",
        || format!("global {global} vs local {local}"),
        &inst,
    )?;
    ensure(
        hopf == local,
        "Hopf trace",
        || format!("cohomology {hopf} vs local {local}"),
        &inst,
    )
}

fn duality_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let x = gen::random_complex(rng, limits.shrink(limits.max_dim, 30));
    let f = gen::random_sheaf(rng, &x);
    let inst = with_sheaves(&[("F", &f)]);
    let d = attempt(f.verdier_dual(), "Verdier dual", &inst)?;
    let dd = attempt(d.verdier_dual(), "Verdier dual", &inst)?;
    let bad = (0..x.len()).find(|&c| dd.stalk_euler(c) != f.stalk_euler(c));
    ensure(
        bad.is_none(),
        "biduality",
        || {
            let c = bad.unwrap_or(0);
            format!("at {}: {} vs {}", x.id_of(c), dd.stalk_euler(c), f.stalk_euler(c))
        },
        &inst,
    )?;
    let chi_f = homology_euler(&attempt(f.global_sections(), "hypercohomology", &inst)?);
    let chi_d = homology_euler(&attempt(d.global_sections(), "hypercohomology", &inst)?);
    ensure(
        chi_f == chi_d,
        "duality keeps chi",
        || format!("{chi_f} vs {chi_d}"),
        &inst,
    )
}

fn cone_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let x = gen::random_complex(rng, limits.shrink(limits.max_dim, 30));
    let f = gen::random_sheaf(rng, &x);
    let g = gen::random_sheaf(rng, &x);
    let inst = with_sheaves(&[("F", &f), ("G", &g)]);
    let alpha = attempt(gen::random_morphism(rng, &f, &g), "morphism", &inst)?;
    let m = attempt(SheafMorphism::new(f.clone(), g.clone(), alpha), "morphism", &inst)?;
    let c = attempt(m.mapping_cone(), "mapping cone", &inst)?;
    let rhs = attempt(mueu(&g).add(&mueu(&f).neg()), "cycle difference", &inst)?;
    same_cycle(&mueu(&c), &rhs, "additivity on cones", &inst)?;
    let chi = |s: &CellularSheaf| attempt(s.global_sections(), "hypercohomology", &inst).map(|v| homology_euler(&v));
    let (cc, cg, cf) = (chi(&c)?, chi(&g)?, chi(&f)?);
    ensure(cc == cg - cf, "cone chi", || format!("{cc} vs {cg} - {cf}"), &inst)
}

fn assoc_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let small = limits.shrink(2, 6);
    let m: Vec<Arc<CellComplex>> = (0..4).map(|_| gen::random_complex(rng, small)).collect();
    let l = gen::random_cycle(rng, &product(&m[0], &m[1]).complex);
    let mu = gen::random_cycle(rng, &product(&m[1], &m[2]).complex);
    let nu = gen::random_cycle(rng, &product(&m[2], &m[3]).complex);
    let mut inst = Instance::default();
    for (n, c) in [("l", &l), ("m", &mu), ("n", &nu)] {
        inst.cycles.insert(n.into(), c.clone());
    }
    let left = attempt(
        compose_cycle(&l, &mu).and_then(|lm| compose_cycle(&lm, &nu)),
        "composition",
        &inst,
    )?;
    let right = attempt(
        compose_cycle(&mu, &nu).and_then(|mn| compose_cycle(&l, &mn)),
        "composition",
        &inst,
    )?;
    same_cycle(&left, &right, "associativity", &inst)
}

fn support_case(rng: &mut CaseRng, limits: Limits) -> Case {
    let small = limits.shrink(2, 7);
    let (m1, m2, m3) = (
        gen::random_complex(rng, small),
        gen::random_complex(rng, small),
        gen::random_complex(rng, small),
    );
    let a = product(&m1, &m2).complex;
    let b = product(&m2, &m3).complex;
    let (f, g) = (gen::random_sheaf(rng, &a), gen::random_sheaf(rng, &b));
    let inst = with_sheaves(&[("K12", &f), ("K23", &g)]);
    let (l, mu) = (mueu(&f), mueu(&g));
    let c = attempt(compose_cycle(&l, &mu), "composition", &inst)?;
    let bound = attempt(
        support_compose(&a, &l.support(), &b, &mu.support()),
        "support composition",
        &inst,
    )?;
    let outside = c.support().into_iter().find(|s| !bound.contains(s));
    ensure(
        outside.is_none(),
        "support estimate",
        || format!("{} outside the composed support", c.base().id_of(outside.unwrap_or(0))),
        &inst,
    )
}

type CaseFn = fn(&mut CaseRng, Limits) -> Case;

fn case_fn(name: &str) -> Option<CaseFn> {
    Some(match name {
        "index" => index_case,
        "compose" => compose_case,
        "external" => external_case,
        "pushforward" => pushforward_case,
        "tensor" => tensor_case,
        "point" => point_case,
        "twist" => twist_case,
        "lefschetz" => lefschetz_case,
        "duality" => duality_case,
        "cone" => cone_case,
        "assoc" => assoc_case,
        "support" => support_case,
        _ => return None,
    })
}

/// Runs `cases` cases of one suite; `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64, cases: usize, limits: Limits) -> Option<SuiteReport> {
    let run = case_fn(name)?;
    let outcomes = exec::map_indexed(cases, |i| {
        let mut rng = case_rng(seed, name, i);
        match catch_unwind(AssertUnwindSafe(|| run(&mut rng, limits))) {
            Ok(r) => r.err().map(|f| Failure {
                suite: name.to_string(),
                case: i,
                property: f.property,
                detail: f.detail,
                size: f.instance.size(),
                counterexample: f.instance.to_json(),
            }),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Some(Failure {
                    suite: name.to_string(),
                    case: i,
                    property: "no panic".into(),
                    detail: msg,
                    size: usize::MAX,
                    counterexample: String::from("{}"),
                })
            }
        }
    });
    Some(SuiteReport {
        name: name.to_string(),
        cases,
        failures: outcomes.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSuite(pub String);

impl std::fmt::Display for UnknownSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown suite {:?}; known suites: {}", self.0, SUITES.join(", "))
    }
}

impl std::error::Error for UnknownSuite {}

/// Runs the named suites (all of them when `names` is empty) in canonical
/// order.
pub fn run_check(seed: u64, cases: usize, limits: Limits, names: &[String]) -> Result<CheckReport, UnknownSuite> {
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(UnknownSuite(bad.clone()));
    }
    let start = Instant::now();
    let chosen: Vec<&str> = SUITES
        .iter()
        .copied()
        .filter(|s| names.is_empty() || names.iter().any(|n| n == s))
        .collect();
    let suites = chosen
        .into_iter()
        .map(|s| run_suite(s, seed, cases, limits).expect("known suite"))
        .collect();
    Ok(CheckReport {
        seed,
        cases,
        limits,
        suites,
        wall_time: start.elapsed(),
    })
}

/// Per-suite failure counts, for callers that only need the verdicts.
pub fn failure_summary(report: &CheckReport) -> BTreeMap<String, usize> {
    report
        .suites
        .iter()
        .map(|s| (s.name.clone(), s.failures.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_a_few_cases() {
        let report = run_check(1, 3, Limits::new(2, 15), &[]).unwrap();
        assert!(report.passed(), "{}", report.render());
        assert_eq!(report.suites.len(), SUITES.len());
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_check(1, 1, Limits::default(), &["nope".into()]).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_check(9, 4, Limits::new(2, 12), &["index".into(), "cone".into()]).unwrap();
        let b = run_check(9, 4, Limits::new(2, 12), &["index".into(), "cone".into()]).unwrap();
        assert_eq!(a.render(), b.render());
    }
}
