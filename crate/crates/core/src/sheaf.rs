//! Cellular sheaves and the derived operations composed by the kernel
//! calculus.
//!
//! A cellular sheaf assigns a cochain complex to every cell (the stalk on the
//! open cell) and a chain map `F(s) -> F(t)` to every incidence pair `s < t`.
//! Derived functors are modelled by explicit finite total complexes; nothing
//! is resolved.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::cellcx::{product, CellComplex, CellularMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::qlinalg::{block_diag, parity_sign, push_block, ChainMap, DoubleComplex, RationalMatrix, VectComplex, Q};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellularSheaf {
    base: Arc<CellComplex>,
    stalks: Vec<VectComplex>,
    /// `restrictions[t][k]` maps the stalk of the `k`-th facet of `t` into
    /// the stalk of `t`.
    restrictions: Vec<Vec<ChainMap>>,
}

impl CellularSheaf {
    /// Builds and validates a sheaf. `restrictions` is keyed by
    /// `(face, coface)` incidence pairs; missing pairs are zero maps.
    pub fn new(
        base: Arc<CellComplex>,
        stalks: Vec<VectComplex>,
        mut restrictions: HashMap<(usize, usize), ChainMap>,
    ) -> Result<Self> {
        if stalks.len() != base.len() {
            return Err(Error::InvalidSheaf(format!(
                "{} stalks for {} cells",
                stalks.len(),
                base.len()
            )));
        }
        for &(s, t) in restrictions.keys() {
            if s >= base.len() || t >= base.len() || base.incidence(t, s) == 0 {
                return Err(Error::InvalidSheaf(format!(
                    "restriction on a non-incidence pair ({s}, {t})"
                )));
            }
        }
        let res = (0..base.len())
            .map(|t| {
                base.facets(t)
                    .iter()
                    .map(|(s, _)| restrictions.remove(&(*s, t)).unwrap_or_default())
                    .collect()
            })
            .collect();
        let f = CellularSheaf {
            base,
            stalks,
            restrictions: res,
        };
        f.check()?;
        Ok(f)
    }

    /// Trusted constructor for operations that preserve validity.
    pub(crate) fn from_raw(base: Arc<CellComplex>, stalks: Vec<VectComplex>, restrictions: Vec<Vec<ChainMap>>) -> Self {
        debug_assert_eq!(stalks.len(), base.len());
        debug_assert_eq!(restrictions.len(), base.len());
        CellularSheaf {
            base,
            stalks,
            restrictions,
        }
    }

    /// Restrictions are chain maps and composites over every length-two
    /// interval agree.
    pub fn check(&self) -> Result<()> {
        let base = &self.base;
        for t in 0..base.len() {
            for (k, (s, _)) in base.facets(t).iter().enumerate() {
                self.restrictions[t][k]
                    .check(&self.stalks[*s], &self.stalks[t])
                    .map_err(|e| {
                        Error::InvalidSheaf(format!("restriction {} -> {}: {e}", base.id_of(*s), base.id_of(t)))
                    })?;
            }
        }
        for t in 0..base.len() {
            let mut via: BTreeMap<usize, Vec<ChainMap>> = BTreeMap::new();
            for (k, (s, _)) in base.facets(t).iter().enumerate() {
                for (j, (r, _)) in base.facets(*s).iter().enumerate() {
                    let composite = self.restrictions[t][k].compose(&self.restrictions[*s][j]);
                    via.entry(*r).or_default().push(composite);
                }
            }
            for (r, maps) in via {
                if maps
                    .windows(2)
                    .any(|w| !same_map(&w[0], &w[1], &self.stalks[r], &self.stalks[t]))
                {
                    return Err(Error::InvalidSheaf(format!(
                        "composites {} -> {} disagree",
                        base.id_of(r),
                        base.id_of(t)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Arc<CellComplex> {
        &self.base
    }

    pub fn stalk(&self, cell: usize) -> &VectComplex {
        &self.stalks[cell]
    }

    pub fn stalks(&self) -> &[VectComplex] {
        &self.stalks
    }

    /// Restriction along the incidence pair `face < coface`.
    pub fn restriction_map(&self, face: usize, coface: usize) -> Option<&ChainMap> {
        let k = self.base.facets(coface).iter().position(|(s, _)| *s == face)?;
        Some(&self.restrictions[coface][k])
    }

    /// Restriction for an arbitrary pair `a <= b`, composed along any facet
    /// chain.
    pub fn restriction(&self, a: usize, b: usize) -> ChainMap {
        assert!(self.base.leq(a, b), "restriction needs a <= b");
        if a == b {
            return ChainMap::identity(&self.stalks[a]);
        }
        let (k, (s, _)) = self
            .base
            .facets(b)
            .iter()
            .enumerate()
            .find(|(_, (s, _))| self.base.leq(a, *s))
            .expect("a < b is reached through a facet");
        self.restrictions[b][k].compose(&self.restriction(a, *s))
    }

    pub fn is_zero(&self) -> bool {
        self.stalks.iter().all(VectComplex::is_zero)
    }

    pub fn stalk_euler(&self, cell: usize) -> i64 {
        self.stalks[cell].euler()
    }

    pub fn constant(base: &Arc<CellComplex>) -> Self {
        let stalks = vec![VectComplex::line(0); base.len()];
        let restrictions = (0..base.len())
            .map(|t| {
                base.facets(t)
                    .iter()
                    .map(|_| ChainMap::identity(&VectComplex::line(0)))
                    .collect()
            })
            .collect();
        Self::from_raw(base.clone(), stalks, restrictions)
    }

    pub fn zero(base: &Arc<CellComplex>) -> Self {
        Self::from_raw(
            base.clone(),
            vec![VectComplex::zero(); base.len()],
            (0..base.len())
                .map(|t| vec![ChainMap::zero(); base.facets(t).len()])
                .collect(),
        )
    }

    /// Constant sheaf with stalk `k` placed in `degree` on the cells of a
    /// locally closed set, zero elsewhere.
    pub fn constant_on(base: &Arc<CellComplex>, member: &[bool], degree: i32) -> Result<Self> {
        if !is_locally_closed(base, member) {
            return Err(Error::InvalidSheaf("support is not locally closed".into()));
        }
        let line = VectComplex::line(degree);
        let stalks = member
            .iter()
            .map(|&m| if m { line.clone() } else { VectComplex::zero() })
            .collect();
        let restrictions = (0..base.len())
            .map(|t| {
                base.facets(t)
                    .iter()
                    .map(|(s, _)| {
                        if member[*s] && member[t] {
                            ChainMap::identity(&line)
                        } else {
                            ChainMap::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_raw(base.clone(), stalks, restrictions))
    }

    /// `F[n]` stalkwise.
    pub fn shift(&self, n: i32) -> Self {
        Self::from_raw(
            self.base.clone(),
            self.stalks.iter().map(|v| v.shift(n)).collect(),
            self.restrictions
                .iter()
                .map(|r| r.iter().map(|m| m.shift(n)).collect())
                .collect(),
        )
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let stalks = self
            .stalks
            .iter()
            .zip(&other.stalks)
            .map(|(a, b)| a.direct_sum(b))
            .collect();
        let restrictions = (0..self.base.len())
            .map(|t| {
                self.base
                    .facets(t)
                    .iter()
                    .enumerate()
                    .map(|(k, (s, _))| {
                        self.restrictions[t][k].direct_sum(
                            &other.restrictions[t][k],
                            (&self.stalks[*s], &other.stalks[*s]),
                            (&self.stalks[t], &other.stalks[t]),
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_raw(self.base.clone(), stalks, restrictions))
    }

    /// Conjugates every stalk by the given invertible matrices, one per cell
    /// and degree. The result is isomorphic to `self`.
    pub fn change_basis(&self, bases: &[BTreeMap<i32, (RationalMatrix, RationalMatrix)>]) -> Self {
        let conj = |cell: usize, n: i32| bases[cell].get(&n);
        let stalks = self
            .stalks
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let Some((lo, _)) = v.degree_range() else {
                    return VectComplex::zero();
                };
                let dims: Vec<usize> = v.degrees().map(|n| v.dim(n)).collect();
                let diffs = v
                    .degrees()
                    .take(dims.len().saturating_sub(1))
                    .map(|n| {
                        let d = v.differential(n);
                        let d = match conj(c, n + 1) {
                            Some((b, _)) => b.mul(&d),
                            None => d,
                        };
                        match conj(c, n) {
                            Some((_, binv)) => d.mul(binv),
                            None => d,
                        }
                    })
                    .collect();
                VectComplex::assemble(lo, dims, diffs)
            })
            .collect();
        let restrictions = (0..self.base.len())
            .map(|t| {
                self.base
                    .facets(t)
                    .iter()
                    .enumerate()
                    .map(|(k, (s, _))| {
                        let blocks = self.restrictions[t][k]
                            .blocks()
                            .map(|(n, m)| {
                                let m = match conj(t, n) {
                                    Some((b, _)) => b.mul(m),
                                    None => m.clone(),
                                };
                                let m = match conj(*s, n) {
                                    Some((_, binv)) => m.mul(binv),
                                    None => m,
                                };
                                (n, m)
                            })
                            .collect();
                        ChainMap::from_blocks(blocks)
                    })
                    .collect()
            })
            .collect();
        Self::from_raw(self.base.clone(), stalks, restrictions)
    }

    /// Compactly supported cochains on a locally closed set of cells:
    /// `⊕ F(s)[-dim s]` with the incidence-weighted restriction differential.
    pub fn sections_over(&self, member: &[bool]) -> Result<Sections> {
        Sections::build(self, member)
    }

    /// Hypercohomology complex over the whole base.
    pub fn global_sections(&self) -> Result<VectComplex> {
        Ok(self.sections_over(&vec![true; self.base.len()])?.complex)
    }

    /// Euler characteristic, computed twice: from the global sections complex
    /// and from the signed stalk sum. A disagreement is a sign bug.
    pub fn euler_char(&self) -> Result<i64> {
        let global = self.global_sections()?.euler();
        let local = self.stalk_sum_euler();
        if global != local {
            return Err(Error::Consistency(format!(
                "global sections give {global}, stalk sum gives {local}"
            )));
        }
        Ok(global)
    }

    /// `sum_s (-1)^{dim s} chi(F(s))`.
    pub fn stalk_sum_euler(&self) -> i64 {
        (0..self.base.len())
            .map(|c| parity_sign(self.base.dim_of(c) as i64) * self.stalks[c].euler())
            .sum()
    }

    /// Stalkwise tensor product.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        let stalks: Vec<VectComplex> = exec::map_indexed(self.base.len(), |c| self.stalks[c].tensor(&other.stalks[c]));
        let restrictions = exec::map_indexed(self.base.len(), |t| {
            self.base
                .facets(t)
                .iter()
                .enumerate()
                .map(|(k, (s, _))| {
                    ChainMap::tensor(
                        &self.restrictions[t][k],
                        &other.restrictions[t][k],
                        (&self.stalks[*s], &other.stalks[*s]),
                        (&self.stalks[t], &other.stalks[t]),
                    )
                })
                .collect()
        });
        Ok(Self::from_raw(self.base.clone(), stalks, restrictions))
    }

    /// External product on `product(A, B)`.
    pub fn external(&self, other: &Self) -> Self {
        let p = product(&self.base, &other.base);
        self.external_on(other, &p.complex)
    }

    /// External product on a given copy of `product(A, B)`.
    pub fn external_on(&self, other: &Self, base: &Arc<CellComplex>) -> Self {
        let nb = other.base.len();
        assert_eq!(base.len(), self.base.len() * nb, "base is not the product");
        let stalks = exec::map_indexed(base.len(), |c| self.stalks[c / nb].tensor(&other.stalks[c % nb]));
        let restrictions = exec::map_indexed(base.len(), |c| {
            let (i, j) = (c / nb, c % nb);
            base.facets(c)
                .iter()
                .map(|(f, _)| {
                    let (fi, fj) = (f / nb, f % nb);
                    let (rf, rg) = if fj == j {
                        (
                            self.restriction_map(fi, i).expect("facet in first factor").clone(),
                            ChainMap::identity(&other.stalks[j]),
                        )
                    } else {
                        (
                            ChainMap::identity(&self.stalks[i]),
                            other.restriction_map(fj, j).expect("facet in second factor").clone(),
                        )
                    };
                    ChainMap::tensor(
                        &rf,
                        &rg,
                        (&self.stalks[fi], &other.stalks[fj]),
                        (&self.stalks[i], &other.stalks[j]),
                    )
                })
                .collect()
        });
        Self::from_raw(base.clone(), stalks, restrictions)
    }

    /// Inverse image: the stalk at `s` is the stalk of `g` at `f(s)`.
    pub fn pullback(f: &CellularMap, g: &Self) -> Result<Self> {
        if **f.target() != *g.base {
            return Err(Error::BaseMismatch);
        }
        let src = f.source();
        let stalks = (0..src.len()).map(|c| g.stalks[f.image(c)].clone()).collect();
        let restrictions = exec::map_indexed(src.len(), |t| {
            src.facets(t)
                .iter()
                .map(|(s, _)| g.restriction(f.image(*s), f.image(t)))
                .collect()
        });
        Ok(Self::from_raw(src.clone(), stalks, restrictions))
    }

    /// Direct image along a cellular map. The stalk at a target cell `t` is
    /// the compactly supported cochain complex of the fibre `f^{-1}(t)`
    /// shifted by `dim t`; restrictions are the incidence-signed connecting
    /// maps between adjacent fibres. Global sections are preserved exactly.
    pub fn pushforward(f: &CellularMap, sheaf: &Self) -> Result<Self> {
        if **f.source() != *sheaf.base {
            return Err(Error::BaseMismatch);
        }
        f.check_codim_regular()?;
        let src = f.source();
        let tgt = f.target();
        let fibres: Vec<Sections> = exec::try_map_indexed(tgt.len(), |t| {
            let member: Vec<bool> = (0..src.len()).map(|c| f.image(c) == t).collect();
            sheaf.sections_over(&member)
        })?;
        let stalks: Vec<VectComplex> = (0..tgt.len())
            .map(|t| fibres[t].complex.shift(tgt.dim_of(t) as i32))
            .collect();
        let restrictions = exec::map_indexed(tgt.len(), |t2| {
            tgt.facets(t2)
                .iter()
                .map(|&(t1, eps)| {
                    let (from, to) = (&fibres[t1], &fibres[t2]);
                    let shift = tgt.dim_of(t1) as i32;
                    let mut per_degree: BTreeMap<i32, Vec<(usize, usize, Q)>> = BTreeMap::new();
                    for (&(s, qd), &col) in &from.index {
                        for &(s2, inc) in src.cofacets(s) {
                            let Some(&row) = to.index.get(&(s2, qd)) else {
                                continue;
                            };
                            let Some(m) = sheaf.restriction_map(s, s2).and_then(|r| r.block_ref(qd)) else {
                                continue;
                            };
                            let n = src.dim_of(s) as i32 + qd;
                            let factor = Q::from_integer((eps as i64 * inc as i64).into());
                            push_block(per_degree.entry(n - shift).or_default(), row, col, m, &factor);
                        }
                    }
                    let blocks = per_degree
                        .into_iter()
                        .map(|(m, entries)| {
                            let rows = stalks[t2].dim(m);
                            let cols = stalks[t1].dim(m);
                            (m, RationalMatrix::from_triplets(rows, cols, entries))
                        })
                        .collect();
                    ChainMap::from_blocks(blocks)
                })
                .collect()
        });
        Ok(Self::from_raw(tgt.clone(), stalks, restrictions))
    }

    /// `j_! j^{-1} F` for an open (up-closed) set of cells.
    pub fn extend_by_zero(&self, open: &[bool]) -> Result<Self> {
        if let Some(c) = self.base.first_non_open(open) {
            return Err(Error::NotAnUpSet(self.base.id_of(c).to_string()));
        }
        let stalks = self
            .stalks
            .iter()
            .zip(open)
            .map(|(v, &m)| if m { v.clone() } else { VectComplex::zero() })
            .collect();
        let restrictions = (0..self.base.len())
            .map(|t| {
                self.base
                    .facets(t)
                    .iter()
                    .enumerate()
                    .map(|(k, (s, _))| {
                        if open[*s] {
                            self.restrictions[t][k].clone()
                        } else {
                            ChainMap::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_raw(self.base.clone(), stalks, restrictions))
    }

    /// Verdier dual: the stalk at `s` is the linear dual of the compactly
    /// supported cochains of the open star of `s`; restrictions are duals of
    /// the inclusions of smaller stars.
    pub fn verdier_dual(&self) -> Result<Self> {
        let base = &self.base;
        let stars: Vec<Sections> = exec::try_map_indexed(base.len(), |s| {
            let mut member = vec![false; base.len()];
            for &t in base.star(s) {
                member[t] = true;
            }
            self.sections_over(&member)
        })?;
        let stalks: Vec<VectComplex> = stars.iter().map(|st| st.complex.dual()).collect();
        let restrictions = exec::map_indexed(base.len(), |t| {
            base.facets(t)
                .iter()
                .map(|(s, _)| {
                    // inclusion C_c(st t) -> C_c(st s)
                    let (small, big) = (&stars[t], &stars[*s]);
                    let mut per_degree: BTreeMap<i32, Vec<(usize, usize, Q)>> = BTreeMap::new();
                    for (&(cell, qd), &col) in &small.index {
                        let row = big.index[&(cell, qd)];
                        let n = base.dim_of(cell) as i32 + qd;
                        for k in 0..self.stalks[cell].dim(qd) {
                            per_degree.entry(n).or_default().push((row + k, col + k, Q::one()));
                        }
                    }
                    let inclusion = ChainMap::from_blocks(
                        per_degree
                            .into_iter()
                            .map(|(n, e)| {
                                (
                                    n,
                                    RationalMatrix::from_triplets(big.complex.dim(n), small.complex.dim(n), e),
                                )
                            })
                            .collect(),
                    );
                    inclusion.dual()
                })
                .collect()
        });
        Ok(Self::from_raw(base.clone(), stalks, restrictions))
    }

    /// `D(k_X)`, the dualizing complex.
    pub fn dualizing(base: &Arc<CellComplex>) -> Result<Self> {
        Self::constant(base).verdier_dual()
    }

    /// Composition of kernels `K12 ∘ K23` on `M1 x M3`: pull both back to
    /// the triple product, tensor, and push forward along the outer
    /// projection.
    pub fn kernel_compose(k12: &Self, k23: &Self) -> Result<Self> {
        let (m1, m2) = k12
            .base
            .factors()
            .ok_or_else(|| Error::NotAProduct("first kernel".into()))?;
        let (m2b, m3) = k23
            .base
            .factors()
            .ok_or_else(|| Error::NotAProduct("second kernel".into()))?;
        if m2 != m2b {
            return Err(Error::MiddleMismatch);
        }
        let triple = product(&k12.base, m3);
        let m13 = product(m1, m3).complex;
        let (n2, n3) = (m2.len(), m3.len());
        let cells = triple.complex.len();
        let split = |c: usize| {
            let (c12, c3) = (c / n3, c % n3);
            (c12 / n2, c12 % n2, c3)
        };
        let q23 = CellularMap::new(
            triple.complex.clone(),
            k23.base.clone(),
            (0..cells)
                .map(|c| {
                    let (_, c2, c3) = split(c);
                    c2 * n3 + c3
                })
                .collect(),
            (0..cells).map(|c| (m1.dim_of(split(c).0) == 0).then_some(1)).collect(),
        )?;
        let q13 = CellularMap::new(
            triple.complex.clone(),
            m13.clone(),
            (0..cells)
                .map(|c| {
                    let (c1, _, c3) = split(c);
                    c1 * n3 + c3
                })
                .collect(),
            (0..cells).map(|c| (m2.dim_of(split(c).1) == 0).then_some(1)).collect(),
        )?;
        let up12 = Self::pullback(&triple.first, k12)?;
        let up23 = Self::pullback(&q23, k23)?;
        Self::pushforward(&q13, &up12.tensor(&up23)?)
    }

    /// Euler characteristic of the poset-bar complex computing `RHom(F, G)`:
    /// `sum_k (-1)^k sum over chains s0 < ... < sk of chi F(s0) chi G(sk)`.
    pub fn euler_rhom(f: &Self, g: &Self) -> Result<i64> {
        if f.base != g.base {
            return Err(Error::BaseMismatch);
        }
        let base = &f.base;
        let order = base.sorted_cells();
        // signed[b] = sum over chains ending in b of (-1)^k chi F(s0)
        let mut signed = vec![0i64; base.len()];
        for &b in &order {
            let mut acc = f.stalk_euler(b);
            for &a in base.closure(b) {
                if a != b {
                    acc -= signed[a];
                }
            }
            signed[b] = acc;
        }
        Ok(order.iter().map(|&b| signed[b] * g.stalk_euler(b)).sum())
    }
}

fn same_map(a: &ChainMap, b: &ChainMap, src: &VectComplex, dst: &VectComplex) -> bool {
    src.degrees().all(|n| a.block(n, src, dst) == b.block(n, src, dst))
}

/// `member` is the intersection of an up-set and a down-set.
pub fn is_locally_closed(base: &CellComplex, member: &[bool]) -> bool {
    // convex: a <= c <= b with a, b inside forces c inside
    (0..base.len()).all(|b| {
        !member[b]
            || base
                .closure(b)
                .iter()
                .all(|&c| member[c] || !base.closure(c).iter().any(|&a| member[a]))
    })
}

/// A compactly supported cochain complex together with the placement of
/// each `(cell, stalk degree)` block.
#[derive(Debug, Clone)]
pub struct Sections {
    pub complex: VectComplex,
    /// Offset of block `(cell, q)` inside total degree `dim cell + q`.
    pub index: BTreeMap<(usize, i32), usize>,
}

impl Sections {
    fn build(sheaf: &CellularSheaf, member: &[bool]) -> Result<Self> {
        let base = &sheaf.base;
        let mut grid = DoubleComplex::new();
        let mut slot_fill: BTreeMap<(i32, i32), usize> = BTreeMap::new();
        let mut local: BTreeMap<(usize, i32), usize> = BTreeMap::new();
        let cells: Vec<usize> = base.sorted_cells().into_iter().filter(|&c| member[c]).collect();
        for &c in &cells {
            let p = base.dim_of(c) as i32;
            for qd in sheaf.stalks[c].degrees() {
                let d = sheaf.stalks[c].dim(qd);
                if d == 0 {
                    continue;
                }
                let fill = slot_fill.entry((p, qd)).or_insert(0);
                local.insert((c, qd), *fill);
                *fill += d;
            }
        }
        for (&(p, qd), &d) in &slot_fill {
            grid.set_dim(p, qd, d);
        }
        type Blocks = BTreeMap<(i32, i32), Vec<(usize, usize, Q)>>;
        let mut horizontal = Blocks::new();
        let mut vertical = Blocks::new();
        for &c in &cells {
            let p = base.dim_of(c) as i32;
            for qd in sheaf.stalks[c].degrees() {
                let Some(&col) = local.get(&(c, qd)) else { continue };
                if let (Some(dv), Some(&row)) = (sheaf.stalks[c].differential_ref(qd), local.get(&(c, qd + 1))) {
                    push_block(vertical.entry((p, qd)).or_default(), row, col, dv, &Q::one());
                }
                for &(t, inc) in base.cofacets(c) {
                    if !member[t] {
                        continue;
                    }
                    let Some(&row) = local.get(&(t, qd)) else { continue };
                    let Some(m) = sheaf.restriction_map(c, t).and_then(|r| r.block_ref(qd)) else {
                        continue;
                    };
                    let factor = Q::from_integer((inc as i64).into());
                    push_block(horizontal.entry((p, qd)).or_default(), row, col, m, &factor);
                }
            }
        }
        for ((p, qd), e) in horizontal {
            let m = RationalMatrix::from_triplets(grid.dim(p + 1, qd), grid.dim(p, qd), e);
            grid.set_horizontal(p, qd, m);
        }
        for ((p, qd), e) in vertical {
            let m = RationalMatrix::from_triplets(grid.dim(p, qd + 1), grid.dim(p, qd), e);
            grid.set_vertical(p, qd, m);
        }
        let complex = grid.total()?;
        let slot_offsets = grid.offsets();
        let index = local
            .into_iter()
            .map(|((c, qd), off)| {
                let p = base.dim_of(c) as i32;
                ((c, qd), slot_offsets[&(p, qd)] + off)
            })
            .collect();
        Ok(Sections { complex, index })
    }
}

/// A morphism of sheaves on one base: a chain map per cell commuting with
/// restrictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SheafMorphism {
    pub source: CellularSheaf,
    pub target: CellularSheaf,
    pub components: Vec<ChainMap>,
}

impl SheafMorphism {
    pub fn new(source: CellularSheaf, target: CellularSheaf, components: Vec<ChainMap>) -> Result<Self> {
        let m = SheafMorphism {
            source,
            target,
            components,
        };
        m.check()?;
        Ok(m)
    }

    pub fn identity(f: &CellularSheaf) -> Self {
        SheafMorphism {
            source: f.clone(),
            target: f.clone(),
            components: f.stalks.iter().map(ChainMap::identity).collect(),
        }
    }

    pub fn zero(f: &CellularSheaf, g: &CellularSheaf) -> Result<Self> {
        Self::new(f.clone(), g.clone(), vec![ChainMap::zero(); f.base.len()])
    }

    pub fn check(&self) -> Result<()> {
        let (f, g) = (&self.source, &self.target);
        if f.base != g.base {
            return Err(Error::BaseMismatch);
        }
        if self.components.len() != f.base.len() {
            return Err(Error::InvalidSheaf("morphism needs one component per cell".into()));
        }
        for (c, a) in self.components.iter().enumerate() {
            a.check(&f.stalks[c], &g.stalks[c])?;
        }
        for t in 0..f.base.len() {
            for (k, (s, _)) in f.base.facets(t).iter().enumerate() {
                let left = g.restrictions[t][k].compose(&self.components[*s]);
                let right = self.components[t].compose(&f.restrictions[t][k]);
                if !same_map(&left, &right, &f.stalks[*s], &g.stalks[t]) {
                    return Err(Error::InvalidSheaf(format!(
                        "morphism does not commute with restriction {} -> {}",
                        f.base.id_of(*s),
                        f.base.id_of(t)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mapping cone: `F[1] ⊕ G` with differential `[[-d_F, 0], [a, d_G]]`.
    pub fn mapping_cone(&self) -> Result<CellularSheaf> {
        self.check()?;
        let (f, g) = (&self.source, &self.target);
        let base = &f.base;
        let cone_stalk = |c: usize| -> VectComplex {
            let (fv, gv) = (&f.stalks[c], &g.stalks[c]);
            let lo = fv.degree_range().map(|r| r.0 - 1);
            let lo = match (lo, gv.degree_range()) {
                (None, None) => return VectComplex::zero(),
                (Some(a), Some((b, _))) => a.min(b),
                (Some(a), None) => a,
                (None, Some((b, _))) => b,
            };
            let hi = fv
                .degree_range()
                .map(|r| r.1 - 1)
                .into_iter()
                .chain(gv.degree_range().map(|r| r.1))
                .max()
                .expect("nonempty");
            let dims: Vec<usize> = (lo..=hi).map(|n| fv.dim(n + 1) + gv.dim(n)).collect();
            let diffs = (lo..hi)
                .map(|n| {
                    let mut e = Vec::new();
                    let (fa, ga) = (fv.dim(n + 1), gv.dim(n));
                    push_block(&mut e, 0, 0, &fv.differential(n + 1), &-Q::one());
                    push_block(
                        &mut e,
                        fv.dim(n + 2),
                        0,
                        &self.components[c].block(n + 1, fv, gv),
                        &Q::one(),
                    );
                    push_block(&mut e, fv.dim(n + 2), fa, &gv.differential(n), &Q::one());
                    RationalMatrix::from_triplets(fv.dim(n + 2) + gv.dim(n + 1), fa + ga, e)
                })
                .collect();
            VectComplex::assemble(lo, dims, diffs)
        };
        let stalks: Vec<VectComplex> = (0..base.len()).map(cone_stalk).collect();
        let restrictions = (0..base.len())
            .map(|t| {
                base.facets(t)
                    .iter()
                    .enumerate()
                    .map(|(k, (s, _))| {
                        let degrees: Vec<i32> = stalks[*s].degrees().collect();
                        let blocks = degrees
                            .into_iter()
                            .map(|n| {
                                let rf = f.restrictions[t][k].block(n + 1, &f.stalks[*s], &f.stalks[t]);
                                let rg = g.restrictions[t][k].block(n, &g.stalks[*s], &g.stalks[t]);
                                (n, block_diag(&rf, &rg))
                            })
                            .collect();
                        ChainMap::from_blocks(blocks)
                    })
                    .collect()
            })
            .collect();
        let cone = CellularSheaf::from_raw(base.clone(), stalks, restrictions);
        debug_assert!(cone.check().is_ok());
        Ok(cone)
    }
}

/// Basis of the space of chain-level morphisms `F -> G` that commute with
/// restrictions, as the kernel of the linear conditions on all components.
pub fn hom_basis(f: &CellularSheaf, g: &CellularSheaf) -> Result<Vec<Vec<ChainMap>>> {
    if f.base != g.base {
        return Err(Error::BaseMismatch);
    }
    let base = &f.base;
    // unknown layout: (cell, degree) -> (offset, rows, cols), entry (i,j) at offset + i*cols + j
    let mut layout: BTreeMap<(usize, i32), (usize, usize, usize)> = BTreeMap::new();
    let mut n_unknowns = 0;
    for c in 0..base.len() {
        for n in f.stalks[c].degrees() {
            let (r, k) = (g.stalks[c].dim(n), f.stalks[c].dim(n));
            if r * k > 0 {
                layout.insert((c, n), (n_unknowns, r, k));
                n_unknowns += r * k;
            }
        }
    }
    if n_unknowns == 0 {
        return Ok(Vec::new());
    }
    let mut rows: Vec<Vec<(usize, Q)>> = Vec::new();
    // Adds the equations `left * X - Y * right = 0` where X, Y are unknown
    // blocks (either may be absent) and `left`, `right` are known matrices.
    let mut add_equations = |x: Option<(usize, usize, usize)>,
                             left: &RationalMatrix,
                             y: Option<(usize, usize, usize)>,
                             right: &RationalMatrix| {
        let out_rows = left.rows();
        let out_cols = right.cols();
        let mut eqs: BTreeMap<(usize, usize), BTreeMap<usize, Q>> = BTreeMap::new();
        if let Some((off, _, xc)) = x {
            for (i, k, lv) in left.entries() {
                for j in 0..xc {
                    *eqs.entry((i, j))
                        .or_default()
                        .entry(off + k * xc + j)
                        .or_insert_with(Q::zero) += lv;
                }
            }
        }
        if let Some((off, _, yc)) = y {
            for (k, j, rv) in right.entries() {
                for i in 0..out_rows {
                    *eqs.entry((i, j))
                        .or_default()
                        .entry(off + i * yc + k)
                        .or_insert_with(Q::zero) -= rv;
                }
            }
        }
        let _ = out_cols;
        for (_, e) in eqs {
            let row: Vec<(usize, Q)> = e.into_iter().filter(|(_, v)| !v.is_zero()).collect();
            if !row.is_empty() {
                rows.push(row);
            }
        }
    };
    for c in 0..base.len() {
        let (fv, gv) = (&f.stalks[c], &g.stalks[c]);
        let lo = fv
            .degree_range()
            .map_or(0, |r| r.0)
            .min(gv.degree_range().map_or(0, |r| r.0))
            - 1;
        let hi = fv
            .degree_range()
            .map_or(0, |r| r.1)
            .max(gv.degree_range().map_or(0, |r| r.1));
        for n in lo..=hi {
            // d_G^n X^n - X^{n+1} d_F^n = 0
            let x = layout.get(&(c, n)).copied();
            let y = layout.get(&(c, n + 1)).copied();
            if x.is_none() && y.is_none() {
                continue;
            }
            add_equations(x, &gv.differential(n), y, &fv.differential(n));
        }
    }
    for t in 0..base.len() {
        for (k, (s, _)) in base.facets(t).iter().enumerate() {
            for n in f.stalks[*s].degrees().chain(f.stalks[t].degrees()) {
                // res_G X_s - X_t res_F = 0
                let x = layout.get(&(*s, n)).copied();
                let y = layout.get(&(t, n)).copied();
                if x.is_none() && y.is_none() {
                    continue;
                }
                let rg = g.restrictions[t][k].block(n, &g.stalks[*s], &g.stalks[t]);
                let rf = f.restrictions[t][k].block(n, &f.stalks[*s], &f.stalks[t]);
                add_equations(x, &rg, y, &rf);
            }
        }
    }
    let system = RationalMatrix::from_triplets(
        rows.len(),
        n_unknowns,
        rows.iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(j, v)| (i, *j, v.clone()))),
    );
    let basis = system
        .nullspace()
        .into_iter()
        .map(|v| {
            (0..base.len())
                .map(|c| {
                    let blocks = layout
                        .range((c, i32::MIN)..=(c, i32::MAX))
                        .map(|(&(_, n), &(off, r, k))| {
                            let entries = (0..r)
                                .flat_map(|i| (0..k).map(move |j| (i, j)))
                                .map(|(i, j)| (i, j, v[off + i * k + j].clone()));
                            (n, RationalMatrix::from_triplets(r, k, entries))
                        })
                        .collect();
                    ChainMap::from_blocks(blocks)
                })
                .collect()
        })
        .collect();
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellcx::shapes::*;

    fn arc(c: CellComplex) -> Arc<CellComplex> {
        Arc::new(c)
    }

    fn skyscraper_on_edge(i: &Arc<CellComplex>) -> CellularSheaf {
        let e = i.lookup("[0,1]").unwrap();
        let member: Vec<bool> = (0..i.len()).map(|c| c == e).collect();
        CellularSheaf::constant_on(i, &member, 0).unwrap()
    }

    #[test]
    fn constant_sheaf_cohomology() {
        let pt = arc(CellComplex::point());
        assert_eq!(
            CellularSheaf::constant(&pt).global_sections().unwrap(),
            VectComplex::line(0)
        );
        let s1 = arc(hollow_triangle());
        let k = CellularSheaf::constant(&s1);
        assert_eq!(k.euler_char().unwrap(), 0);
        let betti = k.global_sections().unwrap().betti();
        assert_eq!(betti, [(0, 1), (1, 1)].into_iter().collect());
        let s2 = arc(tetrahedron_boundary());
        assert_eq!(CellularSheaf::constant(&s2).euler_char().unwrap(), 2);
        let t2 = arc(torus7());
        let kt = CellularSheaf::constant(&t2);
        assert_eq!(kt.euler_char().unwrap(), 0);
        assert_eq!(
            kt.global_sections().unwrap().betti(),
            [(0, 1), (1, 2), (2, 1)].into_iter().collect()
        );
        let i = arc(interval());
        assert_eq!(
            CellularSheaf::constant(&i).global_sections().unwrap().betti(),
            [(0, 1)].into_iter().collect()
        );
    }

    #[test]
    fn edge_skyscraper_has_negative_euler() {
        let i = arc(interval());
        let f = skyscraper_on_edge(&i);
        assert_eq!(f.euler_char().unwrap(), -1);
        assert_eq!(CellularSheaf::zero(&i).euler_char().unwrap(), 0);
    }

    #[test]
    fn functoriality_violation_detected() {
        let sq = product(&arc(interval()), &arc(interval())).complex;
        let k = CellularSheaf::constant(&sq);
        let mut res: HashMap<(usize, usize), ChainMap> = HashMap::new();
        let line = VectComplex::line(0);
        for (t, s, _) in sq.incidences() {
            res.insert((s, t), ChainMap::identity(&line));
        }
        let (t, s, _) = sq.incidences().find(|(t, _, _)| sq.dim_of(*t) == 2).unwrap();
        res.insert((s, t), ChainMap::scalar(&line, &Q::from_integer(2.into())));
        let err = CellularSheaf::new(sq.clone(), k.stalks.clone(), res).unwrap_err();
        assert!(matches!(err, Error::InvalidSheaf(_)));
    }

    #[test]
    fn tensor_with_constant_is_identity() {
        let s1 = arc(hollow_triangle());
        let f = skyscraper_on_edge(&arc(interval()));
        let k = CellularSheaf::constant(f.base());
        assert_eq!(k.tensor(&f).unwrap(), f);
        let z = CellularSheaf::zero(&s1);
        assert!(CellularSheaf::constant(&s1).tensor(&z).unwrap().is_zero());
        assert!(matches!(f.tensor(&z), Err(Error::BaseMismatch)));
    }

    #[test]
    fn external_with_point() {
        let pt = arc(CellComplex::point());
        let s1 = arc(hollow_triangle());
        let g = CellularSheaf::constant(&s1).verdier_dual().unwrap();
        let e = CellularSheaf::constant(&pt).external(&g);
        assert_eq!(e.stalks(), g.stalks());
        let ee = CellularSheaf::constant(&s1).external(&CellularSheaf::constant(&s1));
        assert_eq!(ee.euler_char().unwrap(), 0);
        assert!(ee.check().is_ok());
    }

    #[test]
    fn pullback_examples() {
        let s1 = arc(hollow_triangle());
        let g = CellularSheaf::constant(&s1).verdier_dual().unwrap();
        assert_eq!(CellularSheaf::pullback(&CellularMap::identity(&s1), &g).unwrap(), g);

        let i = arc(interval());
        let pt = arc(CellComplex::point());
        let sky = CellularSheaf::constant(&pt).shift(1);
        let up = CellularSheaf::pullback(&CellularMap::to_point(&i, &pt).unwrap(), &sky).unwrap();
        assert!(up.check().is_ok());
        assert!(up.stalks().iter().all(|v| v.euler() == -1));
        assert_eq!(up.euler_char().unwrap(), -1);

        let p = product(&s1, &i);
        let pulled = CellularSheaf::pullback(&p.first, &g).unwrap();
        let ext = g.external_on(&CellularSheaf::constant(&i), &p.complex);
        for c in 0..p.complex.len() {
            assert_eq!(pulled.stalk(c).dims(), ext.stalk(c).dims());
        }
    }

    #[test]
    fn pushforward_examples() {
        let i = arc(interval());
        let pt = arc(CellComplex::point());
        let f = skyscraper_on_edge(&i);
        let to_pt = CellularMap::to_point(&i, &pt).unwrap();
        let g = CellularSheaf::pushforward(&to_pt, &f).unwrap();
        assert_eq!(g.stalk(0).euler(), -1);
        assert_eq!(g.stalk(0), &f.global_sections().unwrap());

        let s1 = arc(hollow_triangle());
        let d = CellularSheaf::constant(&s1).verdier_dual().unwrap();
        let same = CellularSheaf::pushforward(&CellularMap::identity(&s1), &d).unwrap();
        assert_eq!(same, d);
    }

    #[test]
    fn pushforward_preserves_cohomology_along_collapse() {
        let t = arc(filled_triangle());
        let e = arc(interval());
        let fold: BTreeMap<u32, u32> = [(0, 0), (1, 1), (2, 1)].into_iter().collect();
        let f = CellularMap::from_vertex_map(&t, &e, &fold).unwrap();
        let d = CellularSheaf::constant(&t).verdier_dual().unwrap();
        let g = CellularSheaf::pushforward(&f, &d).unwrap();
        assert!(g.check().is_ok());
        assert_eq!(
            g.global_sections().unwrap().betti(),
            d.global_sections().unwrap().betti()
        );
    }

    #[test]
    fn extend_by_zero_examples() {
        let i = arc(interval());
        let k = CellularSheaf::constant(&i);
        assert_eq!(k.extend_by_zero(&[true, true, true]).unwrap(), k);
        let e = i.lookup("[0,1]").unwrap();
        let open: Vec<bool> = (0..3).map(|c| c == e).collect();
        assert_eq!(k.extend_by_zero(&open).unwrap().euler_char().unwrap(), -1);
        assert!(k.extend_by_zero(&[false; 3]).unwrap().is_zero());
        let v = i.lookup("[0]").unwrap();
        let closed: Vec<bool> = (0..3).map(|c| c == v).collect();
        assert!(matches!(k.extend_by_zero(&closed), Err(Error::NotAnUpSet(_))));
    }

    #[test]
    fn dualizing_complex_stalks() {
        let pt = arc(CellComplex::point());
        assert_eq!(CellularSheaf::dualizing(&pt).unwrap().stalk(0), &VectComplex::line(0));
        let s1 = arc(hollow_triangle());
        let w = CellularSheaf::dualizing(&s1).unwrap();
        assert!(w.check().is_ok());
        assert!(w.stalks().iter().all(|v| v.euler() == -1));
        let s2 = arc(tetrahedron_boundary());
        let w2 = CellularSheaf::dualizing(&s2).unwrap();
        assert!(w2.stalks().iter().all(|v| v.euler() == 1));
        // each stalk is quasi-isomorphic to a line in degree -dim
        assert!(w2.stalks().iter().all(|v| v.betti() == [(-2, 1)].into_iter().collect()));
    }

    #[test]
    fn cone_examples() {
        let s1 = arc(hollow_triangle());
        let f = CellularSheaf::dualizing(&s1).unwrap();
        let c = SheafMorphism::identity(&f).mapping_cone().unwrap();
        assert!(c.check().is_ok());
        assert_eq!(c.euler_char().unwrap(), 0);
        assert!(c.global_sections().unwrap().betti().is_empty());
        let g = CellularSheaf::constant(&s1);
        let z = SheafMorphism::zero(&f, &g).unwrap().mapping_cone().unwrap();
        assert_eq!(
            z.euler_char().unwrap(),
            g.euler_char().unwrap() - f.euler_char().unwrap()
        );
    }

    #[test]
    fn hom_basis_of_constant() {
        let s1 = arc(hollow_triangle());
        let k = CellularSheaf::constant(&s1);
        let basis = hom_basis(&k, &k).unwrap();
        assert_eq!(basis.len(), 1);
        let m = SheafMorphism::new(k.clone(), k.clone(), basis[0].clone()).unwrap();
        assert!(m.check().is_ok());
    }

    #[test]
    fn kernel_compose_over_circle() {
        let pt = arc(CellComplex::point());
        let s1 = arc(hollow_triangle());
        let k12 = CellularSheaf::constant(&product(&pt, &s1).complex);
        let k23 = CellularSheaf::constant(&product(&s1, &pt).complex);
        let k13 = CellularSheaf::kernel_compose(&k12, &k23).unwrap();
        assert_eq!(k13.base().len(), 1);
        assert_eq!(k13.stalk(0).euler(), 0);
        assert_eq!(k13.stalk(0).betti(), [(0, 1), (1, 1)].into_iter().collect());
        let wrong = CellularSheaf::constant(&product(&pt, &pt).complex);
        assert!(matches!(
            CellularSheaf::kernel_compose(&k12, &wrong),
            Err(Error::MiddleMismatch)
        ));
    }

    #[test]
    fn euler_rhom_examples() {
        let i = arc(interval());
        let k = CellularSheaf::constant(&i);
        assert_eq!(CellularSheaf::euler_rhom(&k, &k).unwrap(), 1);
        let s1 = arc(hollow_triangle());
        let k1 = CellularSheaf::constant(&s1);
        assert_eq!(CellularSheaf::euler_rhom(&k1, &k1).unwrap(), 0);
        assert_eq!(CellularSheaf::euler_rhom(&k1, &CellularSheaf::zero(&s1)).unwrap(), 0);
    }
}
