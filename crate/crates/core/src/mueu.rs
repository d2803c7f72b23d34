//! Lagrangian cycles as integer weights on cells, the microlocal Euler class
//! of a sheaf, and the cycle algebra that mirrors the sheaf operations.
//!
//! The weight of `mueu(F)` on `s` is `(-1)^{dim s} chi(F(s))`. Cycle-side
//! operations never touch a cochain complex, so every identity between a
//! sheaf-side and a cycle-side computation compares two independent routes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::cellcx::{product, CellComplex, CellularMap, MapKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::sheaf::CellularSheaf;

static PERTURB_SIGN: AtomicBool = AtomicBool::new(false);

/// Test hook: when enabled, the dimension sign used by [`mueu`], [`star`]
/// and [`compose_cycle`] is dropped. Only meant for negative controls run in
/// their own process.
pub fn set_negative_control(on: bool) {
    PERTURB_SIGN.store(on, Ordering::SeqCst);
}

pub fn negative_control() -> bool {
    PERTURB_SIGN.load(Ordering::SeqCst)
}

fn dim_sign(dim: usize) -> i64 {
    if dim % 2 == 1 && !negative_control() {
        -1
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagCycle {
    base: Arc<CellComplex>,
    weights: Vec<i64>,
}

impl LagCycle {
    pub fn new(base: Arc<CellComplex>, weights: Vec<i64>) -> Result<Self> {
        if weights.len() != base.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} cells",
                weights.len(),
                base.len()
            )));
        }
        Ok(LagCycle { base, weights })
    }

    pub fn zero(base: &Arc<CellComplex>) -> Self {
        LagCycle {
            base: base.clone(),
            weights: vec![0; base.len()],
        }
    }

    /// Weight 1 on a single cell.
    pub fn unit(base: &Arc<CellComplex>, cell: usize) -> Self {
        let mut z = Self::zero(base);
        z.weights[cell] = 1;
        z
    }

    pub fn base(&self) -> &Arc<CellComplex> {
        &self.base
    }

    pub fn weight(&self, cell: usize) -> i64 {
        self.weights[cell]
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn support(&self) -> BTreeSet<usize> {
        (0..self.weights.len()).filter(|&c| self.weights[c] != 0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0)
    }

    pub fn degree(&self) -> i64 {
        self.weights.iter().sum()
    }

    /// Weightwise equality on structurally equal bases.
    pub fn same_weights(&self, other: &Self) -> bool {
        self.base == other.base && self.weights == other.weights
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(LagCycle {
            base: self.base.clone(),
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn neg(&self) -> Self {
        LagCycle {
            base: self.base.clone(),
            weights: self.weights.iter().map(|w| -w).collect(),
        }
    }

    /// Nonzero weights keyed by cell id.
    pub fn to_map(&self) -> BTreeMap<String, i64> {
        self.support()
            .into_iter()
            .map(|c| (self.base.id_of(c).to_string(), self.weights[c]))
            .collect()
    }

    pub fn from_map(base: &Arc<CellComplex>, map: &BTreeMap<String, i64>) -> Result<Self> {
        let mut z = Self::zero(base);
        for (id, &w) in map {
            z.weights[base.lookup(id)?] = w;
        }
        Ok(z)
    }

    /// `(id, dim, weight)` over the support, sorted by dimension then id.
    pub fn listing(&self) -> Vec<(String, usize, i64)> {
        self.base
            .sorted_cells()
            .into_iter()
            .filter(|&c| self.weights[c] != 0)
            .map(|c| (self.base.id_of(c).to_string(), self.base.dim_of(c), self.weights[c]))
            .collect()
    }
}

pub fn mueu(f: &CellularSheaf) -> LagCycle {
    let base = f.base();
    LagCycle {
        base: base.clone(),
        weights: exec::map_indexed(base.len(), |c| dim_sign(base.dim_of(c)) * f.stalk_euler(c)),
    }
}

pub fn degree(cycle: &LagCycle) -> i64 {
    cycle.degree()
}

/// `w(a, b) = l(a) m(b)` on `product(A, B)`.
pub fn external_cycle(l: &LagCycle, m: &LagCycle) -> LagCycle {
    external_cycle_on(l, m, &product(&l.base, &m.base).complex)
}

/// [`external_cycle`] on a given copy of the product.
pub fn external_cycle_on(l: &LagCycle, m: &LagCycle, base: &Arc<CellComplex>) -> LagCycle {
    let nb = m.weights.len();
    assert_eq!(base.len(), l.weights.len() * nb, "base is not the product");
    LagCycle {
        base: base.clone(),
        weights: (0..base.len()).map(|c| l.weights[c / nb] * m.weights[c % nb]).collect(),
    }
}

/// `w(s) = (-1)^{dim s} l(s) m(s)`.
pub fn star(l: &LagCycle, m: &LagCycle) -> Result<LagCycle> {
    if l.base != m.base {
        return Err(Error::BaseMismatch);
    }
    let base = &l.base;
    Ok(LagCycle {
        base: base.clone(),
        weights: (0..base.len())
            .map(|c| dim_sign(base.dim_of(c)) * l.weights[c] * m.weights[c])
            .collect(),
    })
}

fn factors(cycle: &LagCycle, which: &str) -> Result<(Arc<CellComplex>, Arc<CellComplex>)> {
    let (a, b) = cycle
        .base
        .factors()
        .ok_or_else(|| Error::NotAProduct(which.to_string()))?;
    Ok((a.clone(), b.clone()))
}

/// Integration over the middle factor:
/// `w(s1, s3) = sum_{s2} (-1)^{dim s2} l(s1, s2) m(s2, s3)`.
pub fn compose_cycle(l: &LagCycle, m: &LagCycle) -> Result<LagCycle> {
    let (m1, m2) = factors(l, "first cycle")?;
    let (m2b, m3) = factors(m, "second cycle")?;
    if m2 != m2b {
        return Err(Error::MiddleMismatch);
    }
    let base = product(&m1, &m3).complex;
    let (n2, n3) = (m2.len(), m3.len());
    let signs: Vec<i64> = (0..n2).map(|c| dim_sign(m2.dim_of(c))).collect();
    let weights = exec::map_indexed(base.len(), |c| {
        let (c1, c3) = (c / n3, c % n3);
        (0..n2)
            .map(|c2| signs[c2] * l.weights[c1 * n2 + c2] * m.weights[c2 * n3 + c3])
            .sum()
    });
    Ok(LagCycle { base, weights })
}

/// `w(t) = sum_{f(s) = t} l(s)`.
pub fn pushforward_cycle(f: &CellularMap, l: &LagCycle) -> Result<LagCycle> {
    if **f.source() != *l.base {
        return Err(Error::BaseMismatch);
    }
    let mut out = LagCycle::zero(f.target());
    for (c, &w) in l.weights.iter().enumerate() {
        out.weights[f.image(c)] += w;
    }
    Ok(out)
}

/// Inverse image along a projection of a product. Only the projections
/// registered by [`product`] are accepted; pullback along general maps has
/// no cycle-level counterpart here.
pub fn pullback_cycle_projection(q: &CellularMap, l: &LagCycle) -> Result<LagCycle> {
    if **q.target() != *l.base {
        return Err(Error::BaseMismatch);
    }
    let src = q.source();
    let (a, b) = src.factors().ok_or(Error::NotAProjection)?;
    match q.kind() {
        MapKind::FirstProjection => Ok(external_cycle_on(l, &mueu(&CellularSheaf::constant(b)), src)),
        MapKind::SecondProjection => Ok(external_cycle_on(&mueu(&CellularSheaf::constant(a)), l, src)),
        MapKind::General => Err(Error::NotAProjection),
    }
}

/// `{(s1, s3) : (s1, s2) in a and (s2, s3) in b for some s2}` as indices
/// into `product(M1, M3)`.
pub fn support_compose(
    left: &CellComplex,
    a: &BTreeSet<usize>,
    right: &CellComplex,
    b: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    let (_, m2) = left
        .factors()
        .ok_or_else(|| Error::NotAProduct("left support".into()))?;
    let (m2b, m3) = right
        .factors()
        .ok_or_else(|| Error::NotAProduct("right support".into()))?;
    if m2 != m2b {
        return Err(Error::MiddleMismatch);
    }
    let (n2, n3) = (m2.len(), m3.len());
    let mut by_middle: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &c in b {
        by_middle.entry(c / n3).or_default().push(c % n3);
    }
    let mut out = BTreeSet::new();
    for &c in a {
        if let Some(ends) = by_middle.get(&(c % n2)) {
            out.extend(ends.iter().map(|c3| (c / n2) * n3 + c3));
        }
    }
    Ok(out)
}
