//! Seeded random instances for the property suites.
//!
//! Complexes: the closure of a few random simplices of one dimension, cut
//! down to the cell budget, followed by random deletions of maximal cells.
//!
//! Sheaves: a direct sum of at most three constant sheaves `k_S[-q]` on
//! locally closed sets `S` with `q` in `[-2, 2]`, sometimes replaced by the
//! mapping cone of a random morphism between two parts of the sum, then
//! conjugated by a random invertible change of basis on every stalk. Every
//! stalk therefore has total dimension at most three, and the restriction
//! matrices are dense rational matrices that are functorial by
//! construction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cellcx::{product, CellComplex, CellularMap};
use crate::error::Result;
use crate::lefschetz::LefschetzInstance;
use crate::mueu::LagCycle;
use crate::qlinalg::{ChainMap, RationalMatrix, VectComplex, Q};
use crate::sheaf::{hom_basis, CellularSheaf, SheafMorphism};
use crate::tracekernel::{compose_tk, external_tk, tk, TraceKernel};

pub type CaseRng = ChaCha8Rng;

/// Independent stream for one case of one suite.
pub fn case_rng(seed: u64, suite: &str, case: usize) -> CaseRng {
    // FNV-1a over the suite name keeps streams stable across releases
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in suite.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&h.to_le_bytes());
    key[16..24].copy_from_slice(&(case as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_dim: usize,
    pub max_cells: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_dim: 3,
            max_cells: 40,
        }
    }
}

impl Limits {
    pub fn new(max_dim: usize, max_cells: usize) -> Self {
        Limits {
            max_dim,
            max_cells: max_cells.max(1),
        }
    }

    pub fn shrink(self, max_dim: usize, max_cells: usize) -> Self {
        Limits::new(self.max_dim.min(max_dim), self.max_cells.min(max_cells))
    }
}

fn faces_of(s: &[u32], out: &mut BTreeSet<Vec<u32>>) {
    if !out.insert(s.to_vec()) || s.len() == 1 {
        return;
    }
    for i in 0..s.len() {
        let mut f = s.to_vec();
        f.remove(i);
        faces_of(&f, out);
    }
}

fn closure(generators: &[Vec<u32>]) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    for g in generators {
        faces_of(g, &mut out);
    }
    out
}

fn maximal(simplices: &BTreeSet<Vec<u32>>) -> Vec<Vec<u32>> {
    simplices
        .iter()
        .filter(|s| {
            !simplices
                .iter()
                .any(|t| t.len() == s.len() + 1 && s.iter().all(|v| t.contains(v)))
        })
        .cloned()
        .collect()
}

fn random_subset(rng: &mut CaseRng, n: u32, k: usize) -> Vec<u32> {
    let mut all: Vec<u32> = (0..n).collect();
    all.shuffle(rng);
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

/// Simplices (all faces included) of a random complex within `limits`.
pub fn random_simplices(rng: &mut CaseRng, limits: Limits) -> BTreeSet<Vec<u32>> {
    // points are cheap and uninformative, so they get a small share
    let mut d = if limits.max_dim == 0 || rng.gen_bool(0.1) {
        0
    } else {
        rng.gen_range(1..=limits.max_dim)
    };
    while (1usize << (d + 1)) - 1 > limits.max_cells {
        d -= 1;
    }
    let nv = rng.gen_range(d + 1..=d + 5) as u32;
    let count = rng.gen_range(1..=6);
    let mut gens: Vec<Vec<u32>> = Vec::new();
    for _ in 0..count {
        let s = random_subset(rng, nv, d + 1);
        if !gens.contains(&s) {
            gens.push(s);
        }
    }
    let mut simplices = closure(&gens);
    while simplices.len() > limits.max_cells && gens.len() > 1 {
        gens.pop();
        simplices = closure(&gens);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let top = maximal(&simplices);
        if top.len() <= 1 && simplices.len() <= 1 {
            break;
        }
        let victim = top.choose(rng).expect("nonempty").clone();
        if simplices.len() > 1 {
            simplices.remove(&victim);
        }
    }
    simplices
}

pub fn random_complex(rng: &mut CaseRng, limits: Limits) -> Arc<CellComplex> {
    let s: Vec<Vec<u32>> = random_simplices(rng, limits).into_iter().collect();
    Arc::new(CellComplex::from_simplicial(&s).expect("generated simplices are valid"))
}

/// A small nonzero-ish rational `a / b` with `|a| <= 3`, `1 <= b <= 3`.
pub fn random_rational(rng: &mut CaseRng) -> Q {
    Q::new(rng.gen_range(-3i64..=3).into(), rng.gen_range(1i64..=3).into())
}

fn random_nonzero(rng: &mut CaseRng) -> Q {
    loop {
        let x = random_rational(rng);
        if x != Q::from_integer(0.into()) {
            return x;
        }
    }
}

/// Random invertible `n x n` matrix with its inverse: lower unitriangular
/// times diagonal times upper unitriangular.
pub fn random_invertible(rng: &mut CaseRng, n: usize) -> (RationalMatrix, RationalMatrix) {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut diag = Vec::new();
    for i in 0..n {
        diag.push((i, i, random_nonzero(rng)));
        lower.push((i, i, Q::from_integer(1.into())));
        upper.push((i, i, Q::from_integer(1.into())));
        for j in 0..i {
            lower.push((i, j, Q::from_integer(rng.gen_range(-2i64..=2).into())));
            upper.push((j, i, Q::from_integer(rng.gen_range(-2i64..=2).into())));
        }
    }
    let m = RationalMatrix::from_triplets(n, n, lower)
        .mul(&RationalMatrix::from_triplets(n, n, diag))
        .mul(&RationalMatrix::from_triplets(n, n, upper));
    let inv = m
        .solve(&RationalMatrix::identity(n))
        .expect("invertible by construction");
    (m, inv)
}

/// A random locally closed set: an up-closure meeting a down-closure.
pub fn random_locally_closed(rng: &mut CaseRng, base: &CellComplex) -> Vec<bool> {
    let n = base.len();
    let mut up = vec![false; n];
    let mut down = vec![false; n];
    if rng.gen_bool(0.8) {
        for _ in 0..rng.gen_range(1..=2) {
            for &c in base.star(rng.gen_range(0..n)) {
                up[c] = true;
            }
        }
    } else {
        up = vec![true; n];
    }
    if rng.gen_bool(0.7) {
        for _ in 0..rng.gen_range(1..=3) {
            for &c in base.closure(rng.gen_range(0..n)) {
                down[c] = true;
            }
        }
    } else {
        down = vec![true; n];
    }
    let mut member: Vec<bool> = up.iter().zip(&down).map(|(a, b)| *a && *b).collect();
    if !member.contains(&true) {
        // a single cell is the meet of its star and its closure
        member[rng.gen_range(0..n)] = true;
    }
    member
}

fn random_summand(rng: &mut CaseRng, base: &Arc<CellComplex>) -> CellularSheaf {
    let member = random_locally_closed(rng, base);
    let q = rng.gen_range(-2..=2);
    CellularSheaf::constant_on(base, &member, q).expect("locally closed by construction")
}

fn sum_of(base: &Arc<CellComplex>, parts: &[CellularSheaf]) -> CellularSheaf {
    parts.iter().fold(CellularSheaf::zero(base), |acc, p| {
        acc.direct_sum(p).expect("same base")
    })
}

/// A random combination of a basis of chain-level morphisms `F -> G`.
pub fn random_morphism(rng: &mut CaseRng, f: &CellularSheaf, g: &CellularSheaf) -> Result<Vec<ChainMap>> {
    let basis = hom_basis(f, g)?;
    let mut acc = vec![ChainMap::zero(); f.base().len()];
    for b in basis {
        let c = random_rational(rng);
        for (a, m) in acc.iter_mut().zip(b) {
            *a = a.add(&m.scale(&c));
        }
    }
    Ok(acc)
}

/// Conjugates every stalk by a random invertible matrix per degree.
pub fn random_base_change(rng: &mut CaseRng, f: &CellularSheaf) -> CellularSheaf {
    let bases: Vec<BTreeMap<i32, (RationalMatrix, RationalMatrix)>> = f
        .stalks()
        .iter()
        .map(|v| v.degrees().map(|n| (n, random_invertible(rng, v.dim(n)))).collect())
        .collect();
    f.change_basis(&bases)
}

pub fn random_sheaf(rng: &mut CaseRng, base: &Arc<CellComplex>) -> CellularSheaf {
    let n = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=3) };
    let parts: Vec<CellularSheaf> = (0..n).map(|_| random_summand(rng, base)).collect();
    let sheaf = if n >= 2 && rng.gen_bool(0.4) {
        let split = rng.gen_range(1..n);
        let f = sum_of(base, &parts[..split]);
        let g = sum_of(base, &parts[split..]);
        let alpha = random_morphism(rng, &f, &g).expect("same base");
        SheafMorphism::new(f, g, alpha)
            .and_then(|m| m.mapping_cone())
            .expect("morphisms from the solver commute with restrictions")
    } else {
        sum_of(base, &parts)
    };
    if rng.gen_bool(0.7) {
        random_base_change(rng, &sheaf)
    } else {
        sheaf
    }
}

/// A bounded complex of total dimension at most three in degrees
/// `[-2, 2]`: a sum of lines and acyclic pairs, conjugated randomly.
pub fn random_vect_complex(rng: &mut CaseRng) -> VectComplex {
    let mut v = VectComplex::zero();
    let mut budget = rng.gen_range(0..=3usize);
    while budget > 0 {
        let n = rng.gen_range(-2..=2);
        if budget >= 2 && n < 2 && rng.gen_bool(0.4) {
            let pair = VectComplex::new(n, vec![1, 1], vec![RationalMatrix::identity(1)]).expect("d^2 = 0");
            v = v.direct_sum(&pair);
            budget -= 2;
        } else {
            v = v.direct_sum(&VectComplex::line(n));
            budget -= 1;
        }
    }
    let pt = Arc::new(CellComplex::point());
    let f = CellularSheaf::new(pt, vec![v], Default::default()).expect("one cell");
    random_base_change(rng, &f).stalk(0).clone()
}

/// A random cellular map of one of the kinds the direct image supports,
/// together with a description of the kind.
pub fn random_map(rng: &mut CaseRng, limits: Limits) -> (CellularMap, &'static str) {
    match rng.gen_range(0..4) {
        0 => {
            let x = random_complex(rng, limits);
            let verts: Vec<u32> = x
                .simplices()
                .expect("simplicial")
                .iter()
                .filter(|s| s.len() == 1)
                .map(|s| s[0])
                .collect();
            let m = rng.gen_range(1..=verts.len().max(1)) as u32;
            let vmap: BTreeMap<u32, u32> = verts.iter().map(|&v| (v, rng.gen_range(0..m))).collect();
            let images: BTreeSet<Vec<u32>> = x
                .simplices()
                .expect("simplicial")
                .iter()
                .map(|s| {
                    let mut i: Vec<u32> = s.iter().map(|v| vmap[v]).collect();
                    i.sort_unstable();
                    i.dedup();
                    i
                })
                .collect();
            let y = Arc::new(CellComplex::from_simplicial(&images.into_iter().collect::<Vec<_>>()).expect("valid"));
            (
                CellularMap::from_vertex_map(&x, &y, &vmap).expect("simplicial"),
                "collapse",
            )
        }
        1 => {
            let y = random_complex(rng, limits);
            let all: BTreeSet<Vec<u32>> = y.simplices().expect("simplicial").iter().cloned().collect();
            let top = maximal(&all);
            let keep: Vec<Vec<u32>> = top.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
            let keep = if keep.is_empty() { vec![top[0].clone()] } else { keep };
            let mut sub: BTreeSet<Vec<u32>> = closure(&keep);
            // occasionally drop a further maximal simplex of the subcomplex
            if sub.len() > 1 && rng.gen_bool(0.3) {
                let m = maximal(&sub);
                sub.remove(m.choose(rng).expect("nonempty"));
            }
            let x = Arc::new(CellComplex::from_simplicial(&sub.into_iter().collect::<Vec<_>>()).expect("valid"));
            (CellularMap::inclusion(&x, &y).expect("subcomplex"), "inclusion")
        }
        2 => {
            let small = limits.shrink(2, 7.min(limits.max_cells));
            let a = random_complex(rng, small);
            let b = random_complex(rng, small);
            let p = product(&a, &b);
            if rng.gen_bool(0.5) {
                (p.first, "first projection")
            } else {
                (p.second, "second projection")
            }
        }
        _ => {
            let x = random_complex(rng, limits);
            let pt = Arc::new(CellComplex::point());
            (CellularMap::to_point(&x, &pt).expect("point"), "constant map")
        }
    }
}

/// Simplicial self-map: usually an automorphism of a complex built to be
/// closed under a random vertex permutation, sometimes a folding
/// endomorphism.
pub fn random_self_map(rng: &mut CaseRng, limits: Limits) -> CellularMap {
    let nv = rng.gen_range(2..=6u32);
    let mut perm: Vec<u32> = (0..nv).collect();
    perm.shuffle(rng);
    let d_max = limits.max_dim.min(2);
    for _ in 0..20 {
        let d = rng.gen_range(0..=d_max.min(nv as usize - 1));
        let seed_simplex = random_subset(rng, nv, d + 1);
        let mut orbit = Vec::new();
        let mut s = seed_simplex.clone();
        loop {
            orbit.push(s.clone());
            let mut next: Vec<u32> = s.iter().map(|&v| perm[v as usize]).collect();
            next.sort_unstable();
            if next == seed_simplex {
                break;
            }
            s = next;
        }
        let mut simplices = closure(&orbit);
        // every vertex must appear so the permutation is defined on them
        for v in 0..nv {
            simplices.insert(vec![v]);
        }
        if simplices.len() > limits.max_cells {
            continue;
        }
        let x = Arc::new(CellComplex::from_simplicial(&simplices.into_iter().collect::<Vec<_>>()).expect("valid"));
        let vmap: BTreeMap<u32, u32> = (0..nv).map(|v| (v, perm[v as usize])).collect();
        if rng.gen_bool(0.2) {
            // fold: send one orbit of vertices to a fixed target vertex when that stays simplicial
            let target = rng.gen_range(0..nv);
            let folded: BTreeMap<u32, u32> = (0..nv).map(|v| (v, if v == target { v } else { vmap[&v] })).collect();
            if let Ok(f) = CellularMap::from_vertex_map(&x, &x, &folded) {
                return f;
            }
        }
        return CellularMap::from_vertex_map(&x, &x, &vmap).expect("orbit-closed complex");
    }
    let x = Arc::new(CellComplex::from_simplicial(&[vec![0]]).expect("valid"));
    CellularMap::identity(&x)
}

/// Cells of `member` together with everything in their forward orbit.
fn orbit_closed(f: &CellularMap, member: &[bool]) -> Vec<bool> {
    let mut out = member.to_vec();
    loop {
        let mut changed = false;
        for c in 0..out.len() {
            if out[c] && !out[f.image(c)] {
                out[f.image(c)] = true;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// A random instance with a sheaf built from `k_S` on invariant locally
/// closed sets and a random lift from the solver.
pub fn random_lefschetz(rng: &mut CaseRng, limits: Limits) -> LefschetzInstance {
    loop {
        let f = random_self_map(rng, limits);
        let base = f.source().clone();
        let mut parts = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let q = rng.gen_range(-1..=1);
            let member = if rng.gen_bool(0.5) {
                vec![true; base.len()]
            } else {
                // up-closure of an orbit-closed set is invariant under automorphisms
                let seedset = orbit_closed(&f, &random_locally_closed(rng, &base));
                let mut up = vec![false; base.len()];
                for c in (0..base.len()).filter(|&c| seedset[c]) {
                    for &u in base.star(c) {
                        up[u] = true;
                    }
                }
                up
            };
            if let Ok(s) = CellularSheaf::constant_on(&base, &member, q) {
                parts.push(s);
            }
        }
        let sheaf = sum_of(&base, &parts);
        let sheaf = if rng.gen_bool(0.5) {
            random_base_change(rng, &sheaf)
        } else {
            sheaf
        };
        let pulled = CellularSheaf::pullback(&f, &sheaf).expect("self-map");
        let Ok(phi) = random_morphism(rng, &pulled, &sheaf) else {
            continue;
        };
        if let Ok(inst) = LefschetzInstance::new(f, sheaf, phi) {
            return inst;
        }
    }
}

/// A random cycle on `base` with small integer weights, zero on about
/// half of the cells.
pub fn random_cycle(rng: &mut CaseRng, base: &Arc<CellComplex>) -> LagCycle {
    let w = (0..base.len())
        .map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(-3..=3) })
        .collect();
    LagCycle::new(base.clone(), w).expect("one weight per cell")
}

/// A small trace kernel: mostly `TK(F)`, sometimes an external product or a
/// composition of such. The generating sheaves come back alongside, so a
/// failed construction can still be reported.
pub fn random_trace_kernel(rng: &mut CaseRng, limits: Limits) -> (Vec<CellularSheaf>, Result<TraceKernel>) {
    match rng.gen_range(0..10) {
        0..=5 => {
            let m = random_complex(rng, limits.shrink(2, 6));
            let f = random_sheaf(rng, &m);
            let k = tk(&f);
            (vec![f], k)
        }
        6 | 7 => {
            let a = random_complex(rng, limits.shrink(1, 3));
            let b = random_complex(rng, limits.shrink(1, 3));
            let (f, g) = (random_sheaf(rng, &a), random_sheaf(rng, &b));
            let k = tk(&f).and_then(|kf| external_tk(&kf, &tk(&g)?));
            (vec![f, g], k)
        }
        _ => {
            let m1 = random_complex(rng, limits.shrink(1, 2));
            let m2 = random_complex(rng, limits.shrink(1, 3));
            let m3 = random_complex(rng, limits.shrink(1, 2));
            let f12 = random_sheaf(rng, &product(&m1, &m2).complex);
            let f23 = random_sheaf(rng, &product(&m2, &m3).complex);
            let k = tk(&f12).and_then(|a| compose_tk(&a, &tk(&f23)?));
            (vec![f12, f23], k)
        }
    }
}
