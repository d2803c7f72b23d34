//! Finite regular cell complexes encoded as graded posets with `±1`
//! incidence numbers, cellular maps between them, and product complexes.
//!
//! Cells are addressed by their index in [`CellComplex::cells`]. The face
//! order is the transitive closure of the incidence pairs together with any
//! explicitly listed relations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cell {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct CellComplex {
    cells: Vec<Cell>,
    index: HashMap<String, usize>,
    /// Codimension-one faces with their incidence `[tau : sigma]`.
    facets: Vec<Vec<(usize, i8)>>,
    cofacets: Vec<Vec<(usize, i8)>>,
    /// Extra order relations `(face, coface)` not carried by an incidence.
    relations: Vec<(usize, usize)>,
    /// Sorted closed down-set of each cell (including the cell).
    below: Vec<Vec<usize>>,
    above: Vec<Vec<usize>>,
    vertices: Option<Vec<Vec<u32>>>,
    factors: Option<Arc<(Arc<CellComplex>, Arc<CellComplex>)>>,
}

impl PartialEq for CellComplex {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells && self.facets == other.facets && self.relations == other.relations
    }
}

impl Eq for CellComplex {}

impl CellComplex {
    /// Builds a complex from cells, incidences `(coface, face, sign)` and
    /// extra order relations `(face, coface)`. Only structural soundness is
    /// checked here (unique ids, indices in range, no repeated incidence);
    /// the combinatorial invariants are checked by [`CellComplex::validate`].
    pub fn from_parts(
        cells: Vec<Cell>,
        incidences: Vec<(usize, usize, i8)>,
        relations: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(cells.len());
        for (i, c) in cells.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::InvalidComplex(format!("duplicate cell id {:?}", c.id)));
            }
        }
        let n = cells.len();
        let mut facets = vec![Vec::new(); n];
        let mut cofacets = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(t, s, sign) in &incidences {
            if t >= n || s >= n {
                return Err(Error::InvalidComplex(format!("incidence ({t}, {s}) out of range")));
            }
            if !seen.insert((t, s)) {
                return Err(Error::InvalidComplex(format!(
                    "repeated incidence ({}, {})",
                    cells[t].id, cells[s].id
                )));
            }
            facets[t].push((s, sign));
            cofacets[s].push((t, sign));
        }
        for &(s, t) in &relations {
            if t >= n || s >= n {
                return Err(Error::InvalidComplex(format!("relation ({s}, {t}) out of range")));
            }
        }
        for f in facets.iter_mut().chain(cofacets.iter_mut()) {
            f.sort_unstable();
        }
        let mut cx = CellComplex {
            cells,
            index,
            facets,
            cofacets,
            relations,
            below: Vec::new(),
            above: Vec::new(),
            vertices: None,
            factors: None,
        };
        cx.close_order();
        Ok(cx)
    }

    fn close_order(&mut self) {
        let n = self.cells.len();
        let mut direct: Vec<Vec<usize>> = self
            .facets
            .iter()
            .map(|f| f.iter().map(|(s, _)| *s).collect())
            .collect();
        for &(s, t) in &self.relations {
            direct[t].push(s);
        }
        let below: Vec<Vec<usize>> = (0..n)
            .map(|start| {
                let mut seen = BTreeSet::new();
                let mut stack = vec![start];
                while let Some(c) = stack.pop() {
                    if seen.insert(c) {
                        stack.extend(direct[c].iter().copied());
                    }
                }
                seen.into_iter().collect()
            })
            .collect();
        let mut above = vec![Vec::new(); n];
        for (t, b) in below.iter().enumerate() {
            for &s in b {
                above[s].push(t);
            }
        }
        self.below = below;
        self.above = above;
    }

    /// The empty complex.
    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new(), Vec::new()).expect("empty complex")
    }

    pub fn point() -> Self {
        Self::from_simplicial(&[vec![0]]).expect("point")
    }

    /// Closed simplicial complex generated by the given simplices. Missing
    /// faces are added; incidence of `(tau, tau minus its i-th vertex)` is
    /// `(-1)^i`.
    pub fn from_simplicial(simplices: &[Vec<u32>]) -> Result<Self> {
        let mut listed = BTreeSet::new();
        for s in simplices {
            if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::UnsortedSimplex(s.clone()));
            }
            if !listed.insert(s.clone()) {
                return Err(Error::DuplicateSimplex(s.clone()));
            }
        }
        let mut all: BTreeSet<(usize, Vec<u32>)> = BTreeSet::new();
        for s in &listed {
            add_faces(s, &mut all);
        }
        let simplices: Vec<Vec<u32>> = all.into_iter().map(|(_, s)| s).collect();
        let pos: HashMap<&[u32], usize> = simplices.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let cells = simplices
            .iter()
            .map(|s| Cell {
                id: simplex_id(s),
                dim: s.len() - 1,
            })
            .collect();
        let mut incidences = Vec::new();
        for (t, s) in simplices.iter().enumerate() {
            if s.len() < 2 {
                continue;
            }
            for i in 0..s.len() {
                let mut face = s.clone();
                face.remove(i);
                let sign = if i % 2 == 0 { 1 } else { -1 };
                incidences.push((t, pos[face.as_slice()], sign));
            }
        }
        let mut cx = Self::from_parts(cells, incidences, Vec::new())?;
        cx.vertices = Some(simplices);
        Ok(cx)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn dim_of(&self, i: usize) -> usize {
        self.cells[i].dim
    }

    pub fn id_of(&self, i: usize) -> &str {
        &self.cells[i].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn lookup(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::UnknownCell(id.to_string()))
    }

    pub fn dimension(&self) -> Option<usize> {
        self.cells.iter().map(|c| c.dim).max()
    }

    /// Codimension-one faces of `cell` with incidence numbers.
    pub fn facets(&self, cell: usize) -> &[(usize, i8)] {
        &self.facets[cell]
    }

    /// Codimension-one cofaces of `cell` with incidence numbers.
    pub fn cofacets(&self, cell: usize) -> &[(usize, i8)] {
        &self.cofacets[cell]
    }

    pub fn incidence(&self, coface: usize, face: usize) -> i8 {
        self.facets[coface]
            .binary_search_by_key(&face, |(s, _)| *s)
            .map_or(0, |p| self.facets[coface][p].1)
    }

    pub fn incidences(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.facets
            .iter()
            .enumerate()
            .flat_map(|(t, f)| f.iter().map(move |(s, sign)| (t, *s, *sign)))
    }

    pub fn relations(&self) -> &[(usize, usize)] {
        &self.relations
    }

    /// `a <= b` in the face order.
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.below[b].binary_search(&a).is_ok()
    }

    /// Closed down-set of `cell`, sorted.
    pub fn closure(&self, cell: usize) -> &[usize] {
        &self.below[cell]
    }

    /// Open star `{tau : tau >= cell}`, sorted.
    pub fn star(&self, cell: usize) -> &[usize] {
        &self.above[cell]
    }

    pub fn is_up_set(&self, member: &[bool]) -> bool {
        self.first_non_open(member).is_none()
    }

    pub(crate) fn first_non_open(&self, member: &[bool]) -> Option<usize> {
        (0..self.len())
            .find(|&c| member[c] && self.cofacets[c].iter().any(|(t, _)| !member[*t]))
            .or_else(|| {
                self.relations
                    .iter()
                    .find(|(s, t)| member[*s] && !member[*t])
                    .map(|(s, _)| *s)
            })
    }

    pub fn is_down_set(&self, member: &[bool]) -> bool {
        (0..self.len()).all(|c| !member[c] || self.below[c].iter().all(|s| member[*s]))
    }

    /// Vertex lists when the complex came from simplices.
    pub fn simplices(&self) -> Option<&[Vec<u32>]> {
        self.vertices.as_deref()
    }

    /// The two factors when the complex was built by [`product`].
    pub fn factors(&self) -> Option<(&Arc<CellComplex>, &Arc<CellComplex>)> {
        self.factors.as_ref().map(|f| (&f.0, &f.1))
    }

    /// Alternating count of cells.
    pub fn euler(&self) -> i64 {
        self.cells.iter().map(|c| if c.dim % 2 == 0 { 1 } else { -1 }).sum()
    }

    /// Number of cells in each dimension.
    pub fn f_vector(&self) -> Vec<usize> {
        let mut f = vec![0; self.dimension().map_or(0, |d| d + 1)];
        for c in &self.cells {
            f[c.dim] += 1;
        }
        f
    }

    /// Cells ordered by `(dim, id)`.
    pub fn sorted_cells(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.len()).collect();
        v.sort_by(|a, b| (self.cells[*a].dim, &self.cells[*a].id).cmp(&(self.cells[*b].dim, &self.cells[*b].id)));
        v
    }

    /// Checks grading, incidence signs and totality, and `d^2 = 0`
    /// including the augmentation (every edge has incidence sum zero).
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let name = |i: usize| self.cells[i].id.clone();
        for (t, s, sign) in self.incidences() {
            if self.cells[t].dim != self.cells[s].dim + 1 {
                violations.push(Violation::IncidenceCodimension {
                    coface: name(t),
                    face: name(s),
                });
            }
            if sign != 1 && sign != -1 {
                violations.push(Violation::IncidenceSign {
                    coface: name(t),
                    face: name(s),
                    sign,
                });
            }
        }
        for &(s, t) in &self.relations {
            if self.cells[s].dim >= self.cells[t].dim {
                violations.push(Violation::Grading {
                    face: name(s),
                    coface: name(t),
                });
            } else if !self.facet_reachable(s, t) {
                violations.push(Violation::MissingIncidence {
                    coface: name(t),
                    face: name(s),
                });
            }
        }
        for (t, below) in self.below.iter().enumerate() {
            for &s in below {
                if s != t && self.leq(t, s) {
                    violations.push(Violation::Cycle { a: name(s), b: name(t) });
                }
            }
        }
        for t in 0..self.len() {
            let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
            for &(s, a) in &self.facets[t] {
                for &(r, b) in &self.facets[s] {
                    *acc.entry(r).or_insert(0) += a as i64 * b as i64;
                }
            }
            for (r, sum) in acc {
                if sum != 0 {
                    violations.push(Violation::BoundarySquare {
                        coface: name(t),
                        face: name(r),
                        sum,
                    });
                }
            }
            if self.cells[t].dim == 1 {
                let sum: i64 = self.facets[t].iter().map(|(_, a)| *a as i64).sum();
                if sum != 0 {
                    violations.push(Violation::BoundarySquare {
                        coface: name(t),
                        face: EMPTY_FACE.to_string(),
                        sum,
                    });
                }
            }
        }
        ValidationReport { violations }
    }
}

impl CellComplex {
    /// `s` is reachable from `t` through codimension-one incidences.
    fn facet_reachable(&self, s: usize, t: usize) -> bool {
        let mut stack = vec![t];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == s {
                return true;
            }
            if seen.insert(c) {
                stack.extend(self.facets[c].iter().map(|(f, _)| *f));
            }
        }
        false
    }
}

/// Name used for the empty face in augmentation violations.
pub const EMPTY_FACE: &str = "∅";

fn add_faces(s: &[u32], out: &mut BTreeSet<(usize, Vec<u32>)>) {
    if !out.insert((s.len(), s.to_vec())) {
        return;
    }
    if s.len() > 1 {
        for i in 0..s.len() {
            let mut f = s.to_vec();
            f.remove(i);
            add_faces(&f, out);
        }
    }
}

pub fn simplex_id(s: &[u32]) -> String {
    let parts: Vec<String> = s.iter().map(u32::to_string).collect();
    format!("[{}]", parts.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Grading { face: String, coface: String },
    IncidenceCodimension { coface: String, face: String },
    IncidenceSign { coface: String, face: String, sign: i8 },
    MissingIncidence { coface: String, face: String },
    Cycle { a: String, b: String },
    BoundarySquare { coface: String, face: String, sum: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Grading { face, coface } => write!(f, "grading: {face} < {coface} without a dimension increase"),
            Violation::IncidenceCodimension { coface, face } => {
                write!(f, "incidence ({coface}, {face}) is not between adjacent dimensions")
            }
            Violation::IncidenceSign { coface, face, sign } => {
                write!(f, "incidence ({coface}, {face}) = {sign}, expected +1 or -1")
            }
            Violation::MissingIncidence { coface, face } => {
                write!(f, "no incidence on covering pair ({coface}, {face})")
            }
            Violation::Cycle { a, b } => write!(f, "order cycle between {a} and {b}"),
            Violation::BoundarySquare { coface, face, sum } => {
                write!(f, "d^2 != 0 at ({coface}, {face}): sum {sum}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidComplex(v.to_string())),
        }
    }
}

/// A product complex with its two projections.
#[derive(Debug, Clone)]
pub struct Product {
    pub complex: Arc<CellComplex>,
    pub first: CellularMap,
    pub second: CellularMap,
}

/// `A x B` with cells `(a, b)`, componentwise order and Leibniz incidences
/// `[(a,b):(a',b)] = [a:a']`, `[(a,b):(a,b')] = (-1)^{dim a} [b:b']`.
/// Cell `(i, j)` has index `i * |B| + j`.
pub fn product(a: &Arc<CellComplex>, b: &Arc<CellComplex>) -> Product {
    let nb = b.len();
    let idx = |i: usize, j: usize| i * nb + j;
    let mut cells = Vec::with_capacity(a.len() * nb);
    for ca in &a.cells {
        for cb in &b.cells {
            cells.push(Cell {
                id: format!("({},{})", ca.id, cb.id),
                dim: ca.dim + cb.dim,
            });
        }
    }
    let mut incidences = Vec::new();
    let mut relations = Vec::new();
    for i in 0..a.len() {
        for j in 0..nb {
            for &(fi, s) in &a.facets[i] {
                incidences.push((idx(i, j), idx(fi, j), s));
            }
            let sign: i8 = if a.cells[i].dim.is_multiple_of(2) { 1 } else { -1 };
            for &(fj, s) in &b.facets[j] {
                incidences.push((idx(i, j), idx(i, fj), sign * s));
            }
            for &(s, t) in &a.relations {
                relations.push((idx(s, j), idx(t, j)));
            }
        }
        for &(s, t) in &b.relations {
            relations.push((idx(i, s), idx(i, t)));
        }
    }
    let mut cx = CellComplex::from_parts(cells, incidences, relations).expect("product of valid complexes");
    cx.factors = Some(Arc::new((a.clone(), b.clone())));
    let complex = Arc::new(cx);
    let first = CellularMap {
        source: complex.clone(),
        target: a.clone(),
        assignment: (0..complex.len()).map(|c| c / nb.max(1)).collect(),
        orientation: (0..complex.len())
            .map(|c| (b.cells[c % nb].dim == 0).then_some(1))
            .collect(),
        kind: MapKind::FirstProjection,
    };
    let second = CellularMap {
        source: complex.clone(),
        target: b.clone(),
        assignment: (0..complex.len()).map(|c| c % nb).collect(),
        orientation: (0..complex.len())
            .map(|c| (a.cells[c / nb].dim == 0).then_some(1))
            .collect(),
        kind: MapKind::SecondProjection,
    };
    Product { complex, first, second }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    General,
    FirstProjection,
    SecondProjection,
}

/// An order-preserving, dimension-nonincreasing map of face posets with an
/// orientation sign on every cell whose dimension is preserved.
#[derive(Debug, Clone)]
pub struct CellularMap {
    source: Arc<CellComplex>,
    target: Arc<CellComplex>,
    assignment: Vec<usize>,
    orientation: Vec<Option<i8>>,
    kind: MapKind,
}

impl CellularMap {
    pub fn new(
        source: Arc<CellComplex>,
        target: Arc<CellComplex>,
        assignment: Vec<usize>,
        orientation: Vec<Option<i8>>,
    ) -> Result<Self> {
        let f = CellularMap {
            source,
            target,
            assignment,
            orientation,
            kind: MapKind::General,
        };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        let (src, tgt) = (&self.source, &self.target);
        if self.assignment.len() != src.len() || self.orientation.len() != src.len() {
            return Err(Error::InvalidMap("assignment does not cover the source".into()));
        }
        for (c, &img) in self.assignment.iter().enumerate() {
            if img >= tgt.len() {
                return Err(Error::InvalidMap(format!("image of {} out of range", src.id_of(c))));
            }
            let (d, e) = (src.dim_of(c), tgt.dim_of(img));
            if e > d {
                return Err(Error::InvalidMap(format!(
                    "{} (dim {d}) maps to {} (dim {e})",
                    src.id_of(c),
                    tgt.id_of(img)
                )));
            }
            match (d == e, self.orientation[c]) {
                (true, Some(1 | -1)) | (false, None) => {}
                _ => {
                    return Err(Error::InvalidMap(format!(
                        "orientation sign on {} must be ±1 exactly when dimension is preserved",
                        src.id_of(c)
                    )))
                }
            }
        }
        for (t, s, _) in src.incidences() {
            if !tgt.leq(self.assignment[s], self.assignment[t]) {
                return Err(Error::InvalidMap(format!(
                    "order not preserved on {} < {}",
                    src.id_of(s),
                    src.id_of(t)
                )));
            }
        }
        for &(s, t) in src.relations() {
            if !tgt.leq(self.assignment[s], self.assignment[t]) {
                return Err(Error::InvalidMap(format!(
                    "order not preserved on {} < {}",
                    src.id_of(s),
                    src.id_of(t)
                )));
            }
        }
        Ok(())
    }

    pub fn identity(x: &Arc<CellComplex>) -> Self {
        CellularMap {
            source: x.clone(),
            target: x.clone(),
            assignment: (0..x.len()).collect(),
            orientation: vec![Some(1); x.len()],
            kind: MapKind::General,
        }
    }

    /// The constant map to a one-cell complex.
    pub fn to_point(x: &Arc<CellComplex>, point: &Arc<CellComplex>) -> Result<Self> {
        if point.len() != 1 {
            return Err(Error::NotAPoint(point.len()));
        }
        Self::new(
            x.clone(),
            point.clone(),
            vec![0; x.len()],
            x.cells.iter().map(|c| (c.dim == 0).then_some(1)).collect(),
        )
    }

    /// Simplicial map given by vertex images. Every simplex must map onto a
    /// simplex of the target; the orientation sign is the parity of the
    /// permutation that sorts the image vertices.
    pub fn from_vertex_map(
        source: &Arc<CellComplex>,
        target: &Arc<CellComplex>,
        vertex_map: &BTreeMap<u32, u32>,
    ) -> Result<Self> {
        let (Some(ss), Some(_)) = (source.simplices(), target.simplices()) else {
            return Err(Error::InvalidMap("vertex maps need simplicial complexes".into()));
        };
        let mut assignment = Vec::with_capacity(ss.len());
        let mut orientation = Vec::with_capacity(ss.len());
        for s in ss {
            let imgs: Vec<u32> = s
                .iter()
                .map(|v| {
                    vertex_map
                        .get(v)
                        .copied()
                        .ok_or_else(|| Error::InvalidMap(format!("vertex {v} has no image")))
                })
                .collect::<Result<_>>()?;
            let mut sorted = imgs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let img = target
                .index_of(&simplex_id(&sorted))
                .ok_or_else(|| Error::InvalidMap(format!("image of {} is not a simplex", simplex_id(s))))?;
            assignment.push(img);
            orientation.push((sorted.len() == s.len()).then(|| permutation_sign(&imgs)));
        }
        Self::new(source.clone(), target.clone(), assignment, orientation)
    }

    /// Inclusion of a complex whose cells (by id) and incidences appear in
    /// `target`.
    pub fn inclusion(sub: &Arc<CellComplex>, target: &Arc<CellComplex>) -> Result<Self> {
        let assignment = sub
            .cells
            .iter()
            .map(|c| target.lookup(&c.id))
            .collect::<Result<Vec<_>>>()?;
        for (t, s, sign) in sub.incidences() {
            if target.incidence(assignment[t], assignment[s]) != sign {
                return Err(Error::InvalidMap(format!(
                    "incidence ({}, {}) differs in the target",
                    sub.id_of(t),
                    sub.id_of(s)
                )));
            }
        }
        Self::new(sub.clone(), target.clone(), assignment, vec![Some(1); sub.len()])
    }

    /// `f x g : A x B -> C x D`, orientation signs multiplied.
    pub fn product_map(f: &CellularMap, g: &CellularMap, source: &Product, target: &Product) -> Result<Self> {
        let nsb = g.source.len();
        let ntb = g.target.len();
        let mut assignment = Vec::with_capacity(source.complex.len());
        let mut orientation = Vec::with_capacity(source.complex.len());
        for c in 0..source.complex.len() {
            let (i, j) = (c / nsb, c % nsb);
            assignment.push(f.assignment[i] * ntb + g.assignment[j]);
            orientation.push(match (f.orientation[i], g.orientation[j]) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            });
        }
        Self::new(source.complex.clone(), target.complex.clone(), assignment, orientation)
    }

    pub fn source(&self) -> &Arc<CellComplex> {
        &self.source
    }

    pub fn target(&self) -> &Arc<CellComplex> {
        &self.target
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn image(&self, cell: usize) -> usize {
        self.assignment[cell]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn orientation_sign(&self, cell: usize) -> Option<i8> {
        self.orientation[cell]
    }

    /// Cells with `f(cell) == cell`; only meaningful for self-maps.
    pub fn fixed_cells(&self) -> Vec<usize> {
        if self.source != self.target {
            return Vec::new();
        }
        (0..self.source.len()).filter(|&c| self.assignment[c] == c).collect()
    }

    /// No facet pair is sent to a pair more than one dimension apart. The
    /// cellular direct image needs this.
    pub fn check_codim_regular(&self) -> Result<()> {
        for (t, s, _) in self.source.incidences() {
            let (ft, fs) = (self.assignment[t], self.assignment[s]);
            if self.target.dim_of(ft) > self.target.dim_of(fs) + 1 {
                return Err(Error::InvalidMap(format!(
                    "facet pair ({}, {}) maps to ({}, {}) of codimension > 1",
                    self.source.id_of(t),
                    self.source.id_of(s),
                    self.target.id_of(ft),
                    self.target.id_of(fs)
                )));
            }
        }
        Ok(())
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &CellularMap) -> Result<Self> {
        if first.target != self.source {
            return Err(Error::InvalidMap("composable maps need matching complexes".into()));
        }
        let assignment: Vec<usize> = first.assignment.iter().map(|&c| self.assignment[c]).collect();
        let orientation = (0..first.source.len())
            .map(
                |c| match (first.orientation[c], self.orientation[first.assignment[c]]) {
                    (Some(a), Some(b)) => Some(a * b),
                    _ => None,
                },
            )
            .collect();
        Self::new(first.source.clone(), self.target.clone(), assignment, orientation)
    }
}

/// Parity of the permutation sorting `v` (entries distinct).
pub fn permutation_sign(v: &[u32]) -> i8 {
    let mut inversions = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Common small complexes used by fixtures and tests.
pub mod shapes {
    use super::*;

    pub fn interval() -> CellComplex {
        CellComplex::from_simplicial(&[vec![0, 1]]).expect("interval")
    }

    /// Boundary of a triangle, a circle with three vertices and three edges.
    pub fn hollow_triangle() -> CellComplex {
        CellComplex::from_simplicial(&[vec![0, 1], vec![1, 2], vec![0, 2]]).expect("hollow triangle")
    }

    pub fn filled_triangle() -> CellComplex {
        CellComplex::from_simplicial(&[vec![0, 1, 2]]).expect("triangle")
    }

    /// Boundary of the tetrahedron, a 2-sphere.
    pub fn tetrahedron_boundary() -> CellComplex {
        CellComplex::from_simplicial(&[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]])
            .expect("tetrahedron boundary")
    }

    /// Boundary of an `n`-gon.
    pub fn polygon(n: u32) -> CellComplex {
        let edges: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let (a, b) = (i, (i + 1) % n);
                vec![a.min(b), a.max(b)]
            })
            .collect();
        CellComplex::from_simplicial(&edges).expect("polygon")
    }

    /// Seven-vertex minimal triangulation of the torus.
    pub fn torus7() -> CellComplex {
        let mut tris = Vec::new();
        for i in 0..7u32 {
            for t in [[i, i + 1, i + 3], [i, i + 2, i + 3]] {
                let mut s: Vec<u32> = t.iter().map(|v| v % 7).collect();
                s.sort_unstable();
                tris.push(s);
            }
        }
        CellComplex::from_simplicial(&tris).expect("torus")
    }
}

#[cfg(test)]
mod tests {
    use super::shapes::*;
    use super::*;

    #[test]
    fn simplicial_counts() {
        let t = hollow_triangle();
        assert_eq!(t.f_vector(), vec![3, 3]);
        assert!(t.validate().is_valid());
        assert_eq!(CellComplex::point().len(), 1);
        let s2 = tetrahedron_boundary();
        assert_eq!(s2.len(), 14);
        assert_eq!(s2.euler(), 2);
        let torus = torus7();
        assert_eq!(torus.f_vector(), vec![7, 21, 14]);
        assert_eq!(torus.euler(), 0);
        assert!(torus.validate().is_valid());
    }

    #[test]
    fn duplicate_simplex_rejected() {
        let err = CellComplex::from_simplicial(&[vec![0, 1], vec![0, 1]]).unwrap_err();
        assert_eq!(err, Error::DuplicateSimplex(vec![0, 1]));
        assert!(matches!(
            CellComplex::from_simplicial(&[vec![1, 0]]),
            Err(Error::UnsortedSimplex(_))
        ));
    }

    #[test]
    fn product_counts() {
        let i = Arc::new(interval());
        let sq = product(&i, &i);
        assert_eq!(sq.complex.f_vector(), vec![4, 4, 1]);
        assert!(sq.complex.validate().is_valid());
        let s1 = Arc::new(hollow_triangle());
        let torus = product(&s1, &s1);
        assert_eq!(torus.complex.len(), 36);
        assert_eq!(torus.complex.euler(), 0);
        assert!(torus.complex.validate().is_valid());
        let pt = Arc::new(CellComplex::point());
        let px = product(&pt, &s1);
        assert_eq!(px.complex.f_vector(), s1.f_vector());
        assert_eq!(px.second.assignment(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn flipped_sign_located() {
        let t = filled_triangle();
        let e = t.lookup("[0,1]").unwrap();
        let v = t.lookup("[0]").unwrap();
        let mut inc: Vec<(usize, usize, i8)> = t.incidences().collect();
        for x in inc.iter_mut() {
            if x.0 == e && x.1 == v {
                x.2 = -x.2;
            }
        }
        let bad = CellComplex::from_parts(t.cells().to_vec(), inc, Vec::new()).unwrap();
        let report = bad.validate();
        assert!(report.violations.contains(&Violation::BoundarySquare {
            coface: "[0,1,2]".into(),
            face: "[0]".into(),
            sum: 2
        }));
    }

    #[test]
    fn flipped_sign_in_circle_found_by_augmentation() {
        let t = hollow_triangle();
        let e = t.lookup("[1,2]").unwrap();
        let mut inc: Vec<(usize, usize, i8)> = t.incidences().collect();
        let x = inc.iter_mut().find(|x| x.0 == e).unwrap();
        x.2 = -x.2;
        let bad = CellComplex::from_parts(t.cells().to_vec(), inc, Vec::new()).unwrap();
        let report = bad.validate();
        assert_eq!(report.violations.len(), 1);
        assert!(
            matches!(&report.violations[0], Violation::BoundarySquare { coface, face, .. }
            if coface == "[1,2]" && face == EMPTY_FACE)
        );
    }

    #[test]
    fn empty_complex_is_valid() {
        let e = Arc::new(CellComplex::empty());
        assert!(e.validate().is_valid());
        let p = product(&e, &Arc::new(interval()));
        assert!(p.complex.is_empty());
    }

    #[test]
    fn vertex_maps() {
        let s1 = Arc::new(hollow_triangle());
        let rot: BTreeMap<u32, u32> = [(0, 1), (1, 2), (2, 0)].into_iter().collect();
        let f = CellularMap::from_vertex_map(&s1, &s1, &rot).unwrap();
        assert!(f.fixed_cells().is_empty());
        let refl: BTreeMap<u32, u32> = [(0, 0), (1, 2), (2, 1)].into_iter().collect();
        let g = CellularMap::from_vertex_map(&s1, &s1, &refl).unwrap();
        let e12 = s1.lookup("[1,2]").unwrap();
        assert_eq!(g.fixed_cells(), vec![s1.lookup("[0]").unwrap(), e12]);
        assert_eq!(g.orientation_sign(e12), Some(-1));
    }

    #[test]
    fn collapse_is_cellular() {
        let i = Arc::new(interval());
        let pt = Arc::new(CellComplex::point());
        let f = CellularMap::to_point(&i, &pt).unwrap();
        assert!(f.check_codim_regular().is_ok());
        assert_eq!(f.orientation_sign(2), None);
    }

    #[test]
    fn product_projections_surjective() {
        let a = Arc::new(hollow_triangle());
        let b = Arc::new(interval());
        let p = product(&a, &b);
        let hit: BTreeSet<usize> = p.first.assignment().iter().copied().collect();
        assert_eq!(hit.len(), a.len());
        let hit: BTreeSet<usize> = p.second.assignment().iter().copied().collect();
        assert_eq!(hit.len(), b.len());
    }
}
