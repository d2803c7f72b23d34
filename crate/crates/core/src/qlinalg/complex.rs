//! Bounded cochain complexes of finite-dimensional rational vector spaces.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::matrix::RationalMatrix;
use super::rational::{parity_sign, q, Q};
use crate::error::{Error, Result};

/// A bounded cochain complex `V^lo -> V^{lo+1} -> ...` with differentials of
/// degree +1. Zero dimensions at both ends are trimmed on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectComplex {
    lo: i32,
    dims: Vec<usize>,
    /// `diffs[i]` maps degree `lo + i` to `lo + i + 1`.
    diffs: Vec<RationalMatrix>,
}

impl Default for VectComplex {
    fn default() -> Self {
        Self::zero()
    }
}

impl VectComplex {
    pub fn zero() -> Self {
        VectComplex {
            lo: 0,
            dims: Vec::new(),
            diffs: Vec::new(),
        }
    }

    /// The field `k` placed in `degree`.
    pub fn line(degree: i32) -> Self {
        Self::concentrated(degree, 1)
    }

    pub fn concentrated(degree: i32, dim: usize) -> Self {
        Self::with_zero_differentials(degree, vec![dim])
    }

    pub fn with_zero_differentials(lo: i32, dims: Vec<usize>) -> Self {
        let diffs = dims.windows(2).map(|w| RationalMatrix::zeros(w[1], w[0])).collect();
        Self::assemble(lo, dims, diffs)
    }

    /// Checks matrix shapes and `d^{n+1} d^n = 0`.
    pub fn new(lo: i32, dims: Vec<usize>, diffs: Vec<RationalMatrix>) -> Result<Self> {
        if diffs.len() != dims.len().saturating_sub(1) {
            return Err(Error::Shape(format!(
                "{} differentials for {} degrees",
                diffs.len(),
                dims.len()
            )));
        }
        for (i, d) in diffs.iter().enumerate() {
            if d.shape() != (dims[i + 1], dims[i]) {
                return Err(Error::Shape(format!(
                    "differential in degree {} has shape {:?}, expected {:?}",
                    lo + i as i32,
                    d.shape(),
                    (dims[i + 1], dims[i])
                )));
            }
        }
        for i in 1..diffs.len() {
            if !diffs[i].mul(&diffs[i - 1]).is_zero() {
                return Err(Error::NotAComplex {
                    degree: lo + i as i32 - 1,
                });
            }
        }
        Ok(Self::assemble(lo, dims, diffs))
    }

    /// Builds without checking `d^2 = 0`; shapes are still asserted.
    pub(crate) fn assemble(lo: i32, mut dims: Vec<usize>, mut diffs: Vec<RationalMatrix>) -> Self {
        debug_assert_eq!(diffs.len(), dims.len().saturating_sub(1));
        let mut lo = lo;
        while dims.first() == Some(&0) {
            dims.remove(0);
            if !diffs.is_empty() {
                diffs.remove(0);
            }
            lo += 1;
        }
        while dims.last() == Some(&0) {
            dims.pop();
            diffs.pop();
        }
        if dims.is_empty() {
            return Self::zero();
        }
        VectComplex { lo, dims, diffs }
    }

    pub fn is_zero(&self) -> bool {
        self.dims.is_empty()
    }

    /// Lowest and highest nonzero degree, if any.
    pub fn degree_range(&self) -> Option<(i32, i32)> {
        if self.dims.is_empty() {
            None
        } else {
            Some((self.lo, self.lo + self.dims.len() as i32 - 1))
        }
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.dims.len() as i32).map(move |i| self.lo + i)
    }

    pub fn dim(&self, n: i32) -> usize {
        let i = n - self.lo;
        if i < 0 {
            0
        } else {
            self.dims.get(i as usize).copied().unwrap_or(0)
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn dims(&self) -> BTreeMap<i32, usize> {
        self.degrees().map(|n| (n, self.dim(n))).collect()
    }

    /// `d^n : V^n -> V^{n+1}`, zero outside the stored range.
    pub fn differential(&self, n: i32) -> RationalMatrix {
        let i = n - self.lo;
        if i >= 0 && (i as usize) < self.diffs.len() {
            self.diffs[i as usize].clone()
        } else {
            RationalMatrix::zeros(self.dim(n + 1), self.dim(n))
        }
    }

    pub(crate) fn differential_ref(&self, n: i32) -> Option<&RationalMatrix> {
        let i = n - self.lo;
        if i >= 0 {
            self.diffs.get(i as usize)
        } else {
            None
        }
    }

    /// Alternating sum of dimensions.
    pub fn euler(&self) -> i64 {
        self.degrees().map(|n| parity_sign(n as i64) * self.dim(n) as i64).sum()
    }

    /// `dim H^n = dim V^n - rank d^n - rank d^{n-1}` for every stored degree.
    pub fn homology_ranks(&self) -> BTreeMap<i32, usize> {
        let ranks: Vec<usize> = self.diffs.iter().map(RationalMatrix::rank).collect();
        self.degrees()
            .enumerate()
            .map(|(i, n)| {
                let out = ranks.get(i).copied().unwrap_or(0);
                let inc = if i > 0 { ranks[i - 1] } else { 0 };
                (n, self.dims[i] - out - inc)
            })
            .collect()
    }

    /// Nonzero homology ranks only.
    pub fn betti(&self) -> BTreeMap<i32, usize> {
        self.homology_ranks().into_iter().filter(|(_, r)| *r > 0).collect()
    }

    /// `V[n]`: degree `k` holds `V^{n+k}`, differential multiplied by `(-1)^n`.
    pub fn shift(&self, n: i32) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let s = q(parity_sign(n as i64));
        VectComplex {
            lo: self.lo - n,
            dims: self.dims.clone(),
            diffs: self.diffs.iter().map(|d| d.scale(&s)).collect(),
        }
    }

    /// Linear dual: `(V^*)^n = (V^{-n})^*` with transposed differentials.
    pub fn dual(&self) -> Self {
        let Some((_, hi)) = self.degree_range() else {
            return Self::zero();
        };
        let dims: Vec<usize> = self.dims.iter().rev().copied().collect();
        let diffs: Vec<RationalMatrix> = self.diffs.iter().rev().map(RationalMatrix::transpose).collect();
        VectComplex { lo: -hi, dims, diffs }
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let (lo, hi) = match (self.degree_range(), other.degree_range()) {
            (None, _) => return other.clone(),
            (_, None) => return self.clone(),
            (Some((a, b)), Some((c, d))) => (a.min(c), b.max(d)),
        };
        let dims: Vec<usize> = (lo..=hi).map(|n| self.dim(n) + other.dim(n)).collect();
        let diffs = (lo..hi)
            .map(|n| block_diag(&self.differential(n), &other.differential(n)))
            .collect();
        Self::assemble(lo, dims, diffs)
    }

    /// Tensor product with `d(v (x) w) = dv (x) w + (-1)^p v (x) dw`.
    pub fn tensor(&self, other: &Self) -> Self {
        let layout = TensorLayout::new(self, other);
        let Some((lo, hi)) = layout.range else {
            return Self::zero();
        };
        let dims: Vec<usize> = (lo..=hi).map(|n| layout.dim(n)).collect();
        let mut diffs = Vec::new();
        for n in lo..hi {
            let mut entries = Vec::new();
            for &(p, off) in layout.blocks(n) {
                let qd = n - p;
                // d_V (x) 1 : V^p (x) W^q -> V^{p+1} (x) W^q
                if let (Some(dv), Some(to)) = (self.differential_ref(p), layout.offset(n + 1, p + 1)) {
                    push_block(
                        &mut entries,
                        to,
                        off,
                        &dv.kron(&RationalMatrix::identity(other.dim(qd))),
                        &Q::one(),
                    );
                }
                // (-1)^p 1 (x) d_W : V^p (x) W^q -> V^p (x) W^{q+1}
                if let (Some(dw), Some(to)) = (other.differential_ref(qd), layout.offset(n + 1, p)) {
                    let s = q(parity_sign(p as i64));
                    push_block(
                        &mut entries,
                        to,
                        off,
                        &RationalMatrix::identity(self.dim(p)).kron(dw),
                        &s,
                    );
                }
            }
            diffs.push(RationalMatrix::from_triplets(layout.dim(n + 1), layout.dim(n), entries));
        }
        Self::assemble(lo, dims, diffs)
    }
}

/// Placement of `V^p (x) W^q` inside `(V (x) W)^{p+q}`: blocks ordered by `p`.
pub(crate) struct TensorLayout {
    range: Option<(i32, i32)>,
    blocks: BTreeMap<i32, Vec<(i32, usize)>>,
    dims: BTreeMap<i32, usize>,
}

impl TensorLayout {
    pub(crate) fn new(v: &VectComplex, w: &VectComplex) -> Self {
        let mut blocks: BTreeMap<i32, Vec<(i32, usize)>> = BTreeMap::new();
        let mut dims: BTreeMap<i32, usize> = BTreeMap::new();
        let range = match (v.degree_range(), w.degree_range()) {
            (Some((a, b)), Some((c, d))) => Some((a + c, b + d)),
            _ => None,
        };
        if range.is_some() {
            for p in v.degrees() {
                for qd in w.degrees() {
                    let n = p + qd;
                    let size = v.dim(p) * w.dim(qd);
                    let d = dims.entry(n).or_insert(0);
                    blocks.entry(n).or_default().push((p, *d));
                    *d += size;
                }
            }
        }
        TensorLayout { range, blocks, dims }
    }

    pub(crate) fn dim(&self, n: i32) -> usize {
        self.dims.get(&n).copied().unwrap_or(0)
    }

    pub(crate) fn blocks(&self, n: i32) -> &[(i32, usize)] {
        self.blocks.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn offset(&self, n: i32, p: i32) -> Option<usize> {
        self.blocks(n).iter().find(|(pp, _)| *pp == p).map(|(_, o)| *o)
    }
}

pub(crate) fn push_block(
    entries: &mut Vec<(usize, usize, Q)>,
    row0: usize,
    col0: usize,
    m: &RationalMatrix,
    factor: &Q,
) {
    for (i, j, v) in m.entries() {
        entries.push((row0 + i, col0 + j, v * factor));
    }
}

pub(crate) fn block_diag(a: &RationalMatrix, b: &RationalMatrix) -> RationalMatrix {
    let mut entries = Vec::new();
    push_block(&mut entries, 0, 0, a, &Q::one());
    push_block(&mut entries, a.rows(), a.cols(), b, &Q::one());
    RationalMatrix::from_triplets(a.rows() + b.rows(), a.cols() + b.cols(), entries)
}

/// A degree-0 map of complexes, one matrix per degree. Missing degrees are
/// zero maps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChainMap {
    blocks: BTreeMap<i32, RationalMatrix>,
}

impl ChainMap {
    pub fn from_blocks(blocks: BTreeMap<i32, RationalMatrix>) -> Self {
        ChainMap {
            blocks: blocks.into_iter().filter(|(_, m)| !m.is_zero()).collect(),
        }
    }

    pub fn zero() -> Self {
        ChainMap::default()
    }

    pub fn identity(v: &VectComplex) -> Self {
        Self::scalar(v, &Q::one())
    }

    pub fn scalar(v: &VectComplex, c: &Q) -> Self {
        Self::from_blocks(v.degrees().map(|n| (n, RationalMatrix::scalar(v.dim(n), c))).collect())
    }

    /// The matrix `V^n -> W^n`, materialized with the given shape.
    pub fn block(&self, n: i32, source: &VectComplex, target: &VectComplex) -> RationalMatrix {
        match self.blocks.get(&n) {
            Some(m) => m.clone(),
            None => RationalMatrix::zeros(target.dim(n), source.dim(n)),
        }
    }

    pub fn block_ref(&self, n: i32) -> Option<&RationalMatrix> {
        self.blocks.get(&n)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (i32, &RationalMatrix)> {
        self.blocks.iter().map(|(n, m)| (*n, m))
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Shapes agree with `source -> target` and the map commutes with the
    /// differentials.
    pub fn check(&self, source: &VectComplex, target: &VectComplex) -> Result<()> {
        for (n, m) in &self.blocks {
            if m.shape() != (target.dim(*n), source.dim(*n)) {
                return Err(Error::Shape(format!(
                    "chain map block in degree {n} has shape {:?}, expected {:?}",
                    m.shape(),
                    (target.dim(*n), source.dim(*n))
                )));
            }
        }
        let lo = source
            .degree_range()
            .map_or(0, |r| r.0)
            .min(target.degree_range().map_or(0, |r| r.0))
            - 1;
        let hi = source
            .degree_range()
            .map_or(0, |r| r.1)
            .max(target.degree_range().map_or(0, |r| r.1));
        for n in lo..=hi {
            let left = target.differential(n).mul(&self.block(n, source, target));
            let right = self.block(n + 1, source, target).mul(&source.differential(n));
            if left != right {
                return Err(Error::NotAChainMap { degree: n });
            }
        }
        Ok(())
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &ChainMap) -> ChainMap {
        let blocks = self
            .blocks
            .iter()
            .filter_map(|(n, m)| first.blocks.get(n).map(|f| (*n, m.mul(f))))
            .collect();
        Self::from_blocks(blocks)
    }

    pub fn add(&self, other: &ChainMap) -> ChainMap {
        let mut blocks = self.blocks.clone();
        for (n, m) in &other.blocks {
            let sum = match blocks.get(n) {
                Some(a) => a.add(m),
                None => m.clone(),
            };
            blocks.insert(*n, sum);
        }
        Self::from_blocks(blocks)
    }

    pub fn scale(&self, c: &Q) -> ChainMap {
        Self::from_blocks(self.blocks.iter().map(|(n, m)| (*n, m.scale(c))).collect())
    }

    /// The same map viewed between `V[k]` and `W[k]`.
    pub fn shift(&self, k: i32) -> ChainMap {
        ChainMap {
            blocks: self.blocks.iter().map(|(n, m)| (n - k, m.clone())).collect(),
        }
    }

    /// Transpose, as a map `W^* -> V^*`.
    pub fn dual(&self) -> ChainMap {
        ChainMap {
            blocks: self.blocks.iter().map(|(n, m)| (-n, m.transpose())).collect(),
        }
    }

    /// `f (x) g : V (x) W -> V' (x) W'`.
    pub fn tensor(
        f: &ChainMap,
        g: &ChainMap,
        (v, w): (&VectComplex, &VectComplex),
        (v2, w2): (&VectComplex, &VectComplex),
    ) -> ChainMap {
        let src = TensorLayout::new(v, w);
        let dst = TensorLayout::new(v2, w2);
        let mut out = BTreeMap::new();
        let Some((lo, hi)) = src.range else {
            return ChainMap::zero();
        };
        for n in lo..=hi {
            if dst.dim(n) == 0 {
                continue;
            }
            let mut entries = Vec::new();
            for &(p, off) in src.blocks(n) {
                let (Some(fm), Some(gm), Some(to)) = (f.block_ref(p), g.block_ref(n - p), dst.offset(n, p)) else {
                    continue;
                };
                push_block(&mut entries, to, off, &fm.kron(gm), &Q::one());
            }
            out.insert(n, RationalMatrix::from_triplets(dst.dim(n), src.dim(n), entries));
        }
        Self::from_blocks(out)
    }

    pub fn direct_sum(
        &self,
        other: &ChainMap,
        (v, w): (&VectComplex, &VectComplex),
        (v2, w2): (&VectComplex, &VectComplex),
    ) -> ChainMap {
        let mut degrees: Vec<i32> = v
            .degrees()
            .chain(w.degrees())
            .chain(v2.degrees())
            .chain(w2.degrees())
            .collect();
        degrees.sort_unstable();
        degrees.dedup();
        let blocks = degrees
            .into_iter()
            .map(|n| (n, block_diag(&self.block(n, v, v2), &other.block(n, w, w2))))
            .collect();
        Self::from_blocks(blocks)
    }
}

/// Two-parameter grid of vector spaces with horizontal maps `(p,q) -> (p+1,q)`
/// and vertical maps `(p,q) -> (p,q+1)` forming commuting squares.
#[derive(Debug, Clone, Default)]
pub struct DoubleComplex {
    dims: BTreeMap<(i32, i32), usize>,
    horizontal: BTreeMap<(i32, i32), RationalMatrix>,
    vertical: BTreeMap<(i32, i32), RationalMatrix>,
}

impl DoubleComplex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_dim(&mut self, p: i32, q: i32, dim: usize) {
        if dim > 0 {
            self.dims.insert((p, q), dim);
        } else {
            self.dims.remove(&(p, q));
        }
    }

    pub fn dim(&self, p: i32, q: i32) -> usize {
        self.dims.get(&(p, q)).copied().unwrap_or(0)
    }

    pub fn set_horizontal(&mut self, p: i32, q: i32, m: RationalMatrix) {
        self.horizontal.insert((p, q), m);
    }

    pub fn set_vertical(&mut self, p: i32, q: i32, m: RationalMatrix) {
        self.vertical.insert((p, q), m);
    }

    /// A single column `p = 0` holding `v`.
    pub fn column(v: &VectComplex) -> Self {
        let mut g = Self::new();
        for n in v.degrees() {
            g.set_dim(0, n, v.dim(n));
            g.set_vertical(0, n, v.differential(n));
        }
        g
    }

    /// Block offsets of `(p, q)` inside total degree `p + q`, ordered by `p`.
    pub fn offsets(&self) -> BTreeMap<(i32, i32), usize> {
        let mut next: BTreeMap<i32, usize> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for (&(p, q), &d) in &self.dims {
            let slot = next.entry(p + q).or_insert(0);
            out.insert((p, q), *slot);
            *slot += d;
        }
        out
    }

    /// Total complex with `d = d_h + (-1)^p d_v`. Fails naming the bidegree
    /// where `d^2 != 0`.
    pub fn total(&self) -> Result<VectComplex> {
        let offsets = self.offsets();
        let mut tdims: BTreeMap<i32, usize> = BTreeMap::new();
        for (&(p, q), &d) in &self.dims {
            *tdims.entry(p + q).or_insert(0) += d;
        }
        let (Some(&lo), Some(&hi)) = (tdims.keys().next(), tdims.keys().next_back()) else {
            return Ok(VectComplex::zero());
        };
        let tdim = |n: i32| tdims.get(&n).copied().unwrap_or(0);
        let mut entries: BTreeMap<i32, Vec<(usize, usize, Q)>> = BTreeMap::new();
        for (&(p, q), m) in &self.horizontal {
            if m.is_zero() {
                continue;
            }
            self.check_shape(m, (p, q), (p + 1, q))?;
            let (Some(&from), Some(&to)) = (offsets.get(&(p, q)), offsets.get(&(p + 1, q))) else {
                continue;
            };
            push_block(entries.entry(p + q).or_default(), to, from, m, &Q::one());
        }
        for (&(p, q), m) in &self.vertical {
            if m.is_zero() {
                continue;
            }
            self.check_shape(m, (p, q), (p, q + 1))?;
            let (Some(&from), Some(&to)) = (offsets.get(&(p, q)), offsets.get(&(p, q + 1))) else {
                continue;
            };
            push_block(
                entries.entry(p + q).or_default(),
                to,
                from,
                m,
                &Q::from_integer(parity_sign(p as i64).into()),
            );
        }
        let dims: Vec<usize> = (lo..=hi).map(tdim).collect();
        let diffs: Vec<RationalMatrix> = (lo..hi)
            .map(|n| RationalMatrix::from_triplets(tdim(n + 1), tdim(n), entries.remove(&n).unwrap_or_default()))
            .collect();
        for (i, pair) in diffs.windows(2).enumerate() {
            let sq = pair[1].mul(&pair[0]);
            if !sq.is_zero() {
                let n = lo + i as i32;
                return Err(Error::TotalNotAComplex {
                    bidegree: self.locate_failure(&offsets, n, &sq),
                });
            }
        }
        Ok(VectComplex::assemble(lo, dims, diffs))
    }

    fn check_shape(&self, m: &RationalMatrix, from: (i32, i32), to: (i32, i32)) -> Result<()> {
        let expect = (self.dim(to.0, to.1), self.dim(from.0, from.1));
        if m.shape() != expect {
            return Err(Error::Shape(format!(
                "grid map {from:?} -> {to:?} has shape {:?}, expected {expect:?}",
                m.shape()
            )));
        }
        Ok(())
    }

    /// Bidegree of the source block of the first nonzero entry of `d^2`.
    fn locate_failure(&self, offsets: &BTreeMap<(i32, i32), usize>, n: i32, sq: &RationalMatrix) -> (i32, i32) {
        let col = sq.entries().next().map_or(0, |(_, j, _)| j);
        offsets
            .iter()
            .filter(|((p, q), _)| p + q == n)
            .filter(|(_, &off)| off <= col)
            .max_by_key(|(_, &off)| off)
            .map_or((0, n), |(k, _)| *k)
    }
}

/// Public wrapper: totalize a grid.
pub fn total_complex(grid: &DoubleComplex) -> Result<VectComplex> {
    grid.total()
}

/// Alternating trace `sum_n (-1)^n tr(phi^n)` of a chain endomorphism.
pub fn trace_endo(v: &VectComplex, phi: &ChainMap) -> Result<Q> {
    phi.check(v, v)?;
    Ok(supertrace(v, phi))
}

pub(crate) fn supertrace(v: &VectComplex, phi: &ChainMap) -> Q {
    v.degrees().fold(Q::zero(), |acc, n| match phi.block_ref(n) {
        Some(m) => acc + m.trace() * q(parity_sign(n as i64)),
        None => acc,
    })
}

/// Alternating trace of the map induced on cohomology.
pub fn cohomology_trace(v: &VectComplex, phi: &ChainMap) -> Result<Q> {
    phi.check(v, v)?;
    let mut total = Q::zero();
    for n in v.degrees() {
        let dim = v.dim(n);
        let cycles = v.differential(n).nullspace();
        if cycles.is_empty() {
            continue;
        }
        let bounds = v.differential(n - 1);
        let joined = bounds.hcat(&RationalMatrix::from_columns(dim, &cycles));
        let pivots = joined.pivot_columns();
        let boundary_basis: Vec<usize> = pivots.iter().copied().filter(|&c| c < bounds.cols()).collect();
        let harmonic: Vec<usize> = pivots.iter().copied().filter(|&c| c >= bounds.cols()).collect();
        if harmonic.is_empty() {
            continue;
        }
        let mut cols: Vec<usize> = boundary_basis.clone();
        cols.extend(&harmonic);
        let all_rows: Vec<usize> = (0..dim).collect();
        let basis = joined.select(&all_rows, &cols);
        let reps = joined.select(&all_rows, &harmonic);
        let image = phi.block(n, v, v).mul(&reps);
        let coords = basis.solve(&image).expect("image of a cycle lies in the cycle space");
        let nb = boundary_basis.len();
        let tr = (0..harmonic.len()).fold(Q::zero(), |s, i| s + coords.get(nb + i, i));
        total += tr * q(parity_sign(n as i64));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id_complex() -> VectComplex {
        VectComplex::new(0, vec![1, 1], vec![RationalMatrix::identity(1)]).unwrap()
    }

    #[test]
    fn homology_examples() {
        assert!(id_complex().betti().is_empty());
        let zero_map = VectComplex::new(0, vec![1, 1], vec![RationalMatrix::zeros(1, 1)]).unwrap();
        let h = zero_map.homology_ranks();
        assert_eq!(h[&0], 1);
        assert_eq!(h[&1], 1);
    }

    #[test]
    fn rejects_nonzero_square() {
        let d = RationalMatrix::identity(1);
        let err = VectComplex::new(3, vec![1, 1, 1], vec![d.clone(), d]).unwrap_err();
        assert!(matches!(err, Error::NotAComplex { degree: 3 }));
    }

    #[test]
    fn euler_examples() {
        assert_eq!(VectComplex::line(0).euler(), 1);
        assert_eq!(VectComplex::with_zero_differentials(0, vec![1, 1]).euler(), 0);
        assert_eq!(VectComplex::with_zero_differentials(0, vec![2, 3]).euler(), -1);
    }

    #[test]
    fn shift_and_dual_degrees() {
        let v = VectComplex::line(0).shift(1);
        assert_eq!(v.degree_range(), Some((-1, -1)));
        let w = VectComplex::with_zero_differentials(-1, vec![2, 0, 5]);
        let d = w.dual();
        assert_eq!(d.dim(1), 2);
        assert_eq!(d.dim(-1), 5);
        assert_eq!(d.euler(), w.euler());
    }

    #[test]
    fn tensor_is_a_complex() {
        let a = id_complex();
        let b = VectComplex::new(-1, vec![2, 1], vec![RationalMatrix::from_i64(1, 2, &[&[1, -1]])]).unwrap();
        let t = a.tensor(&b);
        let rebuilt = VectComplex::new(t.lo, t.dims.clone(), t.diffs.clone());
        assert!(rebuilt.is_ok());
        assert_eq!(t.euler(), a.euler() * b.euler());
        assert!(t.betti().is_empty());
    }

    #[test]
    fn total_complex_examples() {
        let single = DoubleComplex::column(&id_complex());
        assert_eq!(single.total().unwrap(), id_complex());

        let mut two = DoubleComplex::new();
        two.set_dim(0, 0, 1);
        two.set_dim(1, 0, 1);
        two.set_horizontal(0, 0, RationalMatrix::identity(1));
        let t = two.total().unwrap();
        assert!(t.betti().is_empty());
    }

    #[test]
    fn total_complex_rejects_anticommuting_square() {
        // Square k -> k both ways with identity maps commutes, so a vertical
        // map that anticommutes breaks d^2 = 0 after the sign twist.
        let mut g = DoubleComplex::new();
        for (p, q) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            g.set_dim(p, q, 1);
        }
        g.set_horizontal(0, 0, RationalMatrix::identity(1));
        g.set_horizontal(0, 1, RationalMatrix::identity(1));
        g.set_vertical(0, 0, RationalMatrix::identity(1));
        g.set_vertical(1, 0, RationalMatrix::identity(1).neg());
        let err = g.total().unwrap_err();
        assert!(matches!(err, Error::TotalNotAComplex { bidegree: (0, 0) }));
    }

    #[test]
    fn trace_examples() {
        let v = id_complex();
        assert_eq!(trace_endo(&v, &ChainMap::identity(&v)).unwrap(), q(v.euler()));
        assert_eq!(trace_endo(&v, &ChainMap::zero()).unwrap(), q(0));
        let w = VectComplex::concentrated(1, 2);
        let c = q(7);
        assert_eq!(trace_endo(&w, &ChainMap::scalar(&w, &c)).unwrap(), q(-14));
    }

    #[test]
    fn trace_rejects_non_chain_map() {
        let v = id_complex();
        let mut blocks = BTreeMap::new();
        blocks.insert(0, RationalMatrix::identity(1));
        let phi = ChainMap::from_blocks(blocks);
        assert!(matches!(trace_endo(&v, &phi), Err(Error::NotAChainMap { .. })));
    }

    #[test]
    fn hopf_on_small_complex() {
        // k^2 --[1 1]--> k with the swap endomorphism.
        let v = VectComplex::new(0, vec![2, 1], vec![RationalMatrix::from_i64(1, 2, &[&[1, 1]])]).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert(0, RationalMatrix::from_i64(2, 2, &[&[0, 1], &[1, 0]]));
        blocks.insert(1, RationalMatrix::identity(1));
        let phi = ChainMap::from_blocks(blocks);
        assert_eq!(trace_endo(&v, &phi).unwrap(), cohomology_trace(&v, &phi).unwrap());
        assert_eq!(cohomology_trace(&v, &phi).unwrap(), q(-1));
    }
}
