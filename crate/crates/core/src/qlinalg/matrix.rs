//! Sparse exact rational matrices.
//!
//! Rows are stored as column-sorted `(col, value)` lists with no explicit
//! zeros. Matrices act on column vectors: a map `k^m -> k^n` is an `n x m`
//! matrix.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rational::Q;

type Row = Vec<(usize, Q)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Row>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Vec::new(); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let data = (0..n).map(|i| vec![(i, Q::one())]).collect();
        RationalMatrix { rows: n, cols: n, data }
    }

    pub fn scalar(n: usize, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zeros(n, n);
        }
        let data = (0..n).map(|i| vec![(i, c.clone())]).collect();
        RationalMatrix { rows: n, cols: n, data }
    }

    /// Builds a matrix from dense rows. All rows must have length `cols`.
    pub fn from_dense(rows: usize, cols: usize, dense: &[Vec<Q>]) -> Self {
        assert_eq!(dense.len(), rows, "row count mismatch");
        let data = dense
            .iter()
            .map(|r| {
                assert_eq!(r.len(), cols, "column count mismatch");
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(j, v)| (j, v.clone()))
                    .collect()
            })
            .collect();
        RationalMatrix { rows, cols, data }
    }

    pub fn from_i64(rows: usize, cols: usize, dense: &[&[i64]]) -> Self {
        let dense: Vec<Vec<Q>> = dense
            .iter()
            .map(|r| r.iter().map(|&v| Q::from_integer(BigInt::from(v))).collect())
            .collect();
        Self::from_dense(rows, cols, &dense)
    }

    /// Sums duplicate entries.
    pub fn from_triplets(rows: usize, cols: usize, entries: impl IntoIterator<Item = (usize, usize, Q)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, Q>> = vec![BTreeMap::new(); rows];
        for (i, j, v) in entries {
            assert!(i < rows && j < cols, "entry ({i},{j}) outside {rows}x{cols}");
            *acc[i].entry(j).or_insert_with(Q::zero) += v;
        }
        let data = acc
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        RationalMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[(usize, Q)] {
        &self.data[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Q {
        match self.data[i].binary_search_by_key(&j, |(c, _)| *c) {
            Ok(pos) => self.data[i][pos].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Vec::is_empty)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Q)> + '_ {
        self.data
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(j, v)| (i, *j, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<Q>> {
        let mut out = vec![vec![Q::zero(); self.cols]; self.rows];
        for (i, j, v) in self.entries() {
            out[i][j] = v.clone();
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut data: Vec<Row> = vec![Vec::new(); self.cols];
        for (i, j, v) in self.entries() {
            data[j].push((i, v.clone()));
        }
        RationalMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zeros(self.rows, self.cols);
        }
        let data = self
            .data
            .iter()
            .map(|r| r.iter().map(|(j, v)| (*j, v * c)).collect())
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn neg(&self) -> Self {
        let data = self
            .data
            .iter()
            .map(|r| r.iter().map(|(j, v)| (*j, -v)).collect())
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| merge_rows(a, b, &Q::one()))
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in sub");
        let minus_one = -Q::one();
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| merge_rows(a, b, &minus_one))
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols,
            other.rows,
            "shape mismatch in mul: {:?} * {:?}",
            self.shape(),
            other.shape()
        );
        let mut data = Vec::with_capacity(self.rows);
        let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
        for r in &self.data {
            acc.clear();
            for (k, a) in r {
                for (j, b) in &other.data[*k] {
                    *acc.entry(*j).or_insert_with(Q::zero) += a * b;
                }
            }
            data.push(
                std::mem::take(&mut acc)
                    .into_iter()
                    .filter(|(_, v)| !v.is_zero())
                    .collect(),
            );
        }
        RationalMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    pub fn mul_vec(&self, x: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, x.len(), "shape mismatch in mul_vec");
        self.data
            .iter()
            .map(|r| r.iter().fold(Q::zero(), |s, (j, v)| s + v * &x[*j]))
            .collect()
    }

    /// Kronecker product; index `(i, k)` maps to `i * other.rows + k`.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut data = Vec::with_capacity(rows);
        for ra in &self.data {
            for rb in &other.data {
                let mut row = Vec::with_capacity(ra.len() * rb.len());
                for (ja, va) in ra {
                    for (jb, vb) in rb {
                        row.push((ja * other.cols + jb, va * vb));
                    }
                }
                data.push(row);
            }
        }
        RationalMatrix { rows, cols, data }
    }

    pub fn trace(&self) -> Q {
        assert_eq!(self.rows, self.cols, "trace of a non-square matrix");
        (0..self.rows).fold(Q::zero(), |s, i| s + self.get(i, i))
    }

    /// Sub-matrix of the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_pos: BTreeMap<usize, usize> = BTreeMap::new();
        for (new, &old) in cols.iter().enumerate() {
            col_pos.insert(old, new);
        }
        let data = rows
            .iter()
            .map(|&i| {
                let mut r: Row = self.data[i]
                    .iter()
                    .filter_map(|(j, v)| col_pos.get(j).map(|&nj| (nj, v.clone())))
                    .collect();
                r.sort_by_key(|(j, _)| *j);
                r
            })
            .collect();
        RationalMatrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Column `j` as a dense vector.
    pub fn column(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Q>]) -> Self {
        let entries = columns.iter().enumerate().flat_map(|(j, c)| {
            assert_eq!(c.len(), rows, "column length mismatch");
            c.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(move |(i, v)| (i, j, v.clone()))
        });
        Self::from_triplets(rows, columns.len(), entries)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "row mismatch in hcat");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let mut r = a.clone();
                r.extend(b.iter().map(|(j, v)| (j + self.cols, v.clone())));
                r
            })
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        }
    }

    /// Rank by fraction-free elimination over the integers.
    ///
    /// Each row is scaled to a primitive integer vector; the pivot row is the
    /// first nonzero remaining row in row-major order and its leading entry
    /// is the pivot. Eliminated rows are divided by their content after every
    /// step, which keeps entry growth polynomial.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<(usize, BigInt)>> = self
            .data
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| primitive_integer_row(r))
            .collect();
        let mut rank = 0;
        while let Some(pos) = rows.iter().position(|r| !r.is_empty()) {
            let pivot_row = rows.swap_remove(pos);
            let (pc, pv) = pivot_row[0].clone();
            rank += 1;
            for r in rows.iter_mut() {
                let Ok(idx) = r.binary_search_by_key(&pc, |(c, _)| *c) else {
                    continue;
                };
                let a = r[idx].1.clone();
                let g = a.gcd(&pv);
                let ma = &pv / &g;
                let mp = &a / &g;
                *r = combine_int_rows(r, &ma, &pivot_row, &mp);
                make_primitive(r);
            }
            rows.retain(|r| !r.is_empty());
        }
        rank
    }

    /// Basis of the kernel, one dense vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<Q>> {
        let rref = Rref::new(self);
        let free: Vec<usize> = (0..self.cols).filter(|c| !rref.pivot_cols.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (r, &pc) in rref.rows.iter().zip(&rref.pivot_cols) {
                    if let Ok(idx) = r.binary_search_by_key(&f, |(c, _)| *c) {
                        v[pc] = -r[idx].1.clone();
                    }
                }
                v
            })
            .collect()
    }

    /// Indices of a maximal set of linearly independent columns, chosen
    /// greedily from the left.
    pub fn pivot_columns(&self) -> Vec<usize> {
        Rref::new(self).pivot_cols
    }

    /// One solution of `self * X = rhs`, with free variables set to zero
    /// (the unique one when `self` has independent columns). Returns `None`
    /// when some column of `rhs` is outside the column space.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        assert_eq!(self.rows, rhs.rows, "row mismatch in solve");
        let aug = self.hcat(rhs);
        let rref = Rref::new(&aug);
        let n = self.cols;
        if rref.pivot_cols.iter().any(|&c| c >= n) {
            return None;
        }
        let mut entries = Vec::new();
        for (r, &pc) in rref.rows.iter().zip(&rref.pivot_cols) {
            for (c, v) in r {
                if *c >= n {
                    entries.push((pc, c - n, v.clone()));
                }
            }
        }
        Some(Self::from_triplets(n, rhs.cols, entries))
    }
}

/// Reduced row echelon form over the rationals.
struct Rref {
    rows: Vec<Row>,
    pivot_cols: Vec<usize>,
}

impl Rref {
    fn new(m: &RationalMatrix) -> Self {
        let mut pending: Vec<Row> = m.data.iter().filter(|r| !r.is_empty()).cloned().collect();
        let mut done: Vec<Row> = Vec::new();
        let mut pivot_cols: Vec<usize> = Vec::new();
        for col in 0..m.cols {
            let Some(pos) = pending.iter().position(|r| r.first().is_some_and(|(c, _)| *c == col)) else {
                continue;
            };
            let mut prow = pending.swap_remove(pos);
            let inv = Q::one() / &prow[0].1;
            for (_, v) in prow.iter_mut() {
                *v *= &inv;
            }
            for r in pending.iter_mut().chain(done.iter_mut()) {
                if let Ok(idx) = r.binary_search_by_key(&col, |(c, _)| *c) {
                    let f = -r[idx].1.clone();
                    *r = merge_rows(r, &prow, &f);
                }
            }
            pending.retain(|r| !r.is_empty());
            done.push(prow);
            pivot_cols.push(col);
        }
        Rref { rows: done, pivot_cols }
    }
}

/// `a + f * b` for sparse rows.
fn merge_rows(a: &[(usize, Q)], b: &[(usize, Q)], f: &Q) -> Row {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, &b[j].1 * f));
            j += 1;
        } else {
            let v = &a[i].1 + &b[j].1 * f;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

fn primitive_integer_row(r: &[(usize, Q)]) -> Vec<(usize, BigInt)> {
    let lcm = r.iter().fold(BigInt::one(), |l, (_, v)| l.lcm(v.denom()));
    let mut out: Vec<(usize, BigInt)> = r.iter().map(|(j, v)| (*j, v.numer() * (&lcm / v.denom()))).collect();
    make_primitive(&mut out);
    out
}

fn make_primitive(r: &mut [(usize, BigInt)]) {
    let g = r.iter().fold(BigInt::zero(), |g, (_, v)| g.gcd(v));
    if !g.is_zero() && !g.is_one() {
        for (_, v) in r.iter_mut() {
            *v = &*v / &g;
        }
    }
}

/// `ma * a - mp * p`, dropping zeros.
fn combine_int_rows(a: &[(usize, BigInt)], ma: &BigInt, p: &[(usize, BigInt)], mp: &BigInt) -> Vec<(usize, BigInt)> {
    let mut out = Vec::with_capacity(a.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < p.len() {
        let take_a = j >= p.len() || (i < a.len() && a[i].0 < p[j].0);
        let take_p = i >= a.len() || (j < p.len() && p[j].0 < a[i].0);
        if take_a {
            out.push((a[i].0, &a[i].1 * ma));
            i += 1;
        } else if take_p {
            out.push((p[j].0, -(&p[j].1 * mp)));
            j += 1;
        } else {
            let v = &a[i].1 * ma - &p[j].1 * mp;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    if out.first().is_some_and(|(_, v)| v.is_negative()) {
        for (_, v) in out.iter_mut() {
            *v = -&*v;
        }
    }
    out
}
