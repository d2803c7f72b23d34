//! JSON instance files.
//!
//! A file names complexes, sheaves, maps, cycles, trace kernels and
//! Lefschetz instances. Cells are addressed by id (`"[0,1]"` for simplices,
//! `"(a,b)"` for product cells), matrices are row-major arrays of rational
//! strings (`"3/4"`) or integers, and complexes are referenced by name,
//! with `"main"` (or no `base` at all) meaning the top-level `complex` and
//! `{"product": [a, b]}` meaning a product.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellcx::{product, Cell, CellComplex, CellularMap, MapKind};
use crate::error::Error;
use crate::lefschetz::LefschetzInstance;
use crate::mueu::LagCycle;
use crate::qlinalg::{format_rational, parse_rational, ChainMap, RationalMatrix, VectComplex, Q};
use crate::sheaf::CellularSheaf;
use crate::tracekernel::{compose_tk, external_tk, shift_twist, tk, Provenance, TraceKernel};

pub const FORMAT_VERSION: &str = "1";
pub const MAIN: &str = "main";

#[derive(Debug, Error)]
pub enum LoadError {
    /// Malformed JSON or a payload that does not fit the schema.
    #[error("parse error: {0}")]
    Parse(String),
    /// Well-formed payload that violates an invariant.
    #[error("validation failed: {0}")]
    Invalid(String),
}

impl From<Error> for LoadError {
    fn from(e: Error) -> Self {
        LoadError::Invalid(e.to_string())
    }
}

type Load<T> = std::result::Result<T, LoadError>;

fn parse_err<T>(msg: impl Into<String>) -> Load<T> {
    Err(LoadError::Parse(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<ComplexSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub complexes: BTreeMap<String, ComplexSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sheaves: BTreeMap<String, SheafSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub maps: BTreeMap<String, MapSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cycles: BTreeMap<String, CycleSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kernels: BTreeMap<String, KernelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lefschetz: BTreeMap<String, LefschetzSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Simplices { simplices: Vec<Vec<u32>> },
    Poset { poset: PosetSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetSpec {
    pub cells: Vec<CellSpec>,
    /// `(coface, face, sign)`.
    #[serde(default)]
    pub incidence: Vec<(String, String, i8)>,
    /// Extra order relations `(face, coface)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexRef {
    Name(String),
    Product {
        product: (Box<ComplexRef>, Box<ComplexRef>),
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Int(i64),
    Text(String),
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StalkSpec {
    pub lo: i32,
    pub dims: Vec<usize>,
    /// `d[i]` is the differential out of degree `lo + i`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionSpec {
    pub face: String,
    pub coface: String,
    /// Degree (as a string key) to matrix.
    pub blocks: BTreeMap<String, MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SheafSpec {
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<ComplexRef>,
        #[serde(default)]
        degree: i32,
        /// Locally closed support; all cells when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<Vec<String>>,
    },
    Zero {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<ComplexRef>,
    },
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<ComplexRef>,
        stalks: BTreeMap<String, StalkSpec>,
        #[serde(default)]
        restrictions: Vec<RestrictionSpec>,
    },
    ExtendByZero {
        sheaf: String,
        open: Vec<String>,
    },
    Dual {
        sheaf: String,
    },
    Shift {
        sheaf: String,
        by: i32,
    },
    Tensor {
        left: String,
        right: String,
    },
    External {
        left: String,
        right: String,
    },
    Pullback {
        map: String,
        sheaf: String,
    },
    Pushforward {
        map: String,
        sheaf: String,
    },
    Compose {
        left: String,
        right: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Vertex {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<ComplexRef>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ComplexRef>,
        vertices: BTreeMap<String, u32>,
    },
    Cells {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<ComplexRef>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ComplexRef>,
        cells: BTreeMap<String, String>,
        #[serde(default)]
        orientation: BTreeMap<String, i8>,
    },
    Identity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<ComplexRef>,
    },
    ToPoint {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<ComplexRef>,
        target: ComplexRef,
    },
    Inclusion {
        source: ComplexRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ComplexRef>,
    },
    /// Projection of a product onto factor 1 or 2.
    Projection { source: ComplexRef, factor: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ComplexRef>,
    pub weights: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelRef {
    Name(String),
    Tree(Box<KernelSpec>),
}

/// Provenance tree of a trace kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `TK(F)` of a named sheaf.
    Tk(String),
    External(KernelRef, KernelRef),
    Compose(KernelRef, KernelRef),
    Twist(KernelRef, i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LefschetzSpec {
    pub map: String,
    pub sheaf: String,
    /// Per cell, degree to matrix `F(f s)^q -> F(s)^q`. Identity
    /// components when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<BTreeMap<String, BTreeMap<String, MatrixSpec>>>,
}

/// A loaded and validated instance file.
#[derive(Debug, Clone, Default)]
pub struct Instance {
    pub complex: Option<Arc<CellComplex>>,
    pub complexes: BTreeMap<String, Arc<CellComplex>>,
    pub sheaves: BTreeMap<String, CellularSheaf>,
    pub maps: BTreeMap<String, CellularMap>,
    pub cycles: BTreeMap<String, LagCycle>,
    pub kernels: BTreeMap<String, TraceKernel>,
    pub lefschetz: BTreeMap<String, LefschetzInstance>,
}

pub fn parse_file(text: &str) -> Load<InstanceFile> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    if file.version != FORMAT_VERSION {
        return parse_err(format!("unsupported version {:?}", file.version));
    }
    Ok(file)
}

pub fn load_str(text: &str) -> Load<Instance> {
    Instance::load(&parse_file(text)?)
}

fn entry_value(e: &Entry) -> Load<Q> {
    match e {
        Entry::Int(i) => Ok(Q::from_integer((*i).into())),
        Entry::Text(s) => parse_rational(s).map_err(|e| LoadError::Parse(e.to_string())),
    }
}

fn matrix_from_spec(m: &MatrixSpec, rows: usize, cols: usize, what: &str) -> Load<RationalMatrix> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(LoadError::Invalid(format!("{what}: expected a {rows}x{cols} matrix")));
    }
    let mut entries = Vec::new();
    for (i, r) in m.iter().enumerate() {
        for (j, e) in r.iter().enumerate() {
            entries.push((i, j, entry_value(e)?));
        }
    }
    Ok(RationalMatrix::from_triplets(rows, cols, entries))
}

fn matrix_to_spec(m: &RationalMatrix) -> MatrixSpec {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| Entry::Text(format_rational(&m.get(i, j))))
                .collect()
        })
        .collect()
}

fn complex_from_spec(spec: &ComplexSpec) -> Load<CellComplex> {
    let cx = match spec {
        ComplexSpec::Simplices { simplices } => CellComplex::from_simplicial(simplices)?,
        ComplexSpec::Poset { poset } => {
            let index: HashMap<&str, usize> = poset
                .cells
                .iter()
                .enumerate()
                .map(|(i, c)| (c.id.as_str(), i))
                .collect();
            let find = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| LoadError::Invalid(format!("unknown cell {id:?}")))
            };
            let cells = poset
                .cells
                .iter()
                .map(|c| Cell {
                    id: c.id.clone(),
                    dim: c.dim,
                })
                .collect();
            let incidences = poset
                .incidence
                .iter()
                .map(|(t, s, e)| Ok((find(t)?, find(s)?, *e)))
                .collect::<Load<Vec<_>>>()?;
            let relations = poset
                .relations
                .iter()
                .map(|(s, t)| Ok((find(s)?, find(t)?)))
                .collect::<Load<Vec<_>>>()?;
            CellComplex::from_parts(cells, incidences, relations)?
        }
    };
    let report = cx.validate();
    if !report.is_valid() {
        let list: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(LoadError::Invalid(list.join("; ")));
    }
    Ok(cx)
}

fn complex_to_spec(cx: &CellComplex) -> ComplexSpec {
    if let Some(s) = cx.simplices() {
        return ComplexSpec::Simplices { simplices: s.to_vec() };
    }
    ComplexSpec::Poset {
        poset: PosetSpec {
            cells: cx
                .cells()
                .iter()
                .map(|c| CellSpec {
                    id: c.id.clone(),
                    dim: c.dim,
                })
                .collect(),
            incidence: cx
                .incidences()
                .map(|(t, s, e)| (cx.id_of(t).to_string(), cx.id_of(s).to_string(), e))
                .collect(),
            relations: cx
                .relations()
                .iter()
                .map(|&(s, t)| (cx.id_of(s).to_string(), cx.id_of(t).to_string()))
                .collect(),
        },
    }
}

fn stalk_from_spec(s: &StalkSpec, what: &str) -> Load<VectComplex> {
    if s.d.len() != s.dims.len().saturating_sub(1) {
        return Err(LoadError::Invalid(format!(
            "{what}: need {} differentials",
            s.dims.len().saturating_sub(1)
        )));
    }
    let diffs =
        s.d.iter()
            .enumerate()
            .map(|(i, m)| matrix_from_spec(m, s.dims[i + 1], s.dims[i], what))
            .collect::<Load<Vec<_>>>()?;
    Ok(VectComplex::new(s.lo, s.dims.clone(), diffs)?)
}

fn stalk_to_spec(v: &VectComplex) -> StalkSpec {
    let Some((lo, hi)) = v.degree_range() else {
        return StalkSpec {
            lo: 0,
            dims: Vec::new(),
            d: Vec::new(),
        };
    };
    StalkSpec {
        lo,
        dims: (lo..=hi).map(|n| v.dim(n)).collect(),
        d: (lo..hi).map(|n| matrix_to_spec(&v.differential(n))).collect(),
    }
}

fn chain_map_from_spec(
    blocks: &BTreeMap<String, MatrixSpec>,
    src: &VectComplex,
    dst: &VectComplex,
    what: &str,
) -> Load<ChainMap> {
    let mut out = BTreeMap::new();
    for (k, m) in blocks {
        let n: i32 = k
            .parse()
            .map_err(|_| LoadError::Parse(format!("{what}: degree key {k:?}")))?;
        out.insert(n, matrix_from_spec(m, dst.dim(n), src.dim(n), what)?);
    }
    Ok(ChainMap::from_blocks(out))
}

fn chain_map_to_spec(m: &ChainMap) -> BTreeMap<String, MatrixSpec> {
    m.blocks().map(|(n, b)| (n.to_string(), matrix_to_spec(b))).collect()
}

fn cell_set(base: &CellComplex, ids: &[String]) -> Load<Vec<bool>> {
    let mut member = vec![false; base.len()];
    for id in ids {
        member[base.lookup(id)?] = true;
    }
    Ok(member)
}

/// Resolution state while loading a file.
struct Loader<'a> {
    file: &'a InstanceFile,
    out: Instance,
    products: BTreeMap<ComplexRef, Arc<CellComplex>>,
    pending: BTreeSet<String>,
}

impl<'a> Loader<'a> {
    fn complex(&mut self, r: Option<&ComplexRef>) -> Load<Arc<CellComplex>> {
        match r {
            None => self
                .out
                .complex
                .clone()
                .ok_or_else(|| LoadError::Invalid("no top-level complex".into())),
            Some(ComplexRef::Name(n)) if n == MAIN => self.complex(None),
            Some(ComplexRef::Name(n)) => self
                .out
                .complexes
                .get(n)
                .cloned()
                .ok_or_else(|| LoadError::Invalid(format!("unknown complex {n:?}"))),
            Some(r @ ComplexRef::Product { product: (a, b) }) => {
                if let Some(p) = self.products.get(r) {
                    return Ok(p.clone());
                }
                let (a, b) = (self.complex(Some(a))?, self.complex(Some(b))?);
                let p = product(&a, &b).complex;
                self.products.insert(r.clone(), p.clone());
                Ok(p)
            }
        }
    }

    fn product_of(&mut self, r: &ComplexRef) -> Load<crate::cellcx::Product> {
        match r {
            ComplexRef::Product { product: (a, b) } => {
                let (a, b) = (self.complex(Some(a))?, self.complex(Some(b))?);
                let p = product(&a, &b);
                Ok(p)
            }
            ComplexRef::Name(_) => Err(LoadError::Invalid("projection needs a product source".into())),
        }
    }

    fn sheaf(&mut self, name: &str) -> Load<CellularSheaf> {
        if let Some(s) = self.out.sheaves.get(name) {
            return Ok(s.clone());
        }
        let spec = self
            .file
            .sheaves
            .get(name)
            .ok_or_else(|| LoadError::Invalid(format!("unknown sheaf {name:?}")))?;
        if !self.pending.insert(name.to_string()) {
            return Err(LoadError::Invalid(format!("sheaf {name:?} refers to itself")));
        }
        let what = format!("sheaf {name:?}");
        let sheaf = match spec {
            SheafSpec::Constant { base, degree, support } => {
                let base = self.complex(base.as_ref())?;
                let member = match support {
                    Some(ids) => cell_set(&base, ids)?,
                    None => vec![true; base.len()],
                };
                CellularSheaf::constant_on(&base, &member, *degree)?
            }
            SheafSpec::Zero { base } => CellularSheaf::zero(&self.complex(base.as_ref())?),
            SheafSpec::Explicit {
                base,
                stalks,
                restrictions,
            } => {
                let base = self.complex(base.as_ref())?;
                let mut vs = vec![VectComplex::zero(); base.len()];
                for (id, s) in stalks {
                    vs[base.lookup(id)?] = stalk_from_spec(s, &format!("{what} stalk {id}"))?;
                }
                let mut res = HashMap::new();
                for r in restrictions {
                    let (s, t) = (base.lookup(&r.face)?, base.lookup(&r.coface)?);
                    let m = chain_map_from_spec(
                        &r.blocks,
                        &vs[s],
                        &vs[t],
                        &format!("{what} restriction {} -> {}", r.face, r.coface),
                    )?;
                    if res.insert((s, t), m).is_some() {
                        return Err(LoadError::Invalid(format!(
                            "{what}: repeated restriction {} -> {}",
                            r.face, r.coface
                        )));
                    }
                }
                CellularSheaf::new(base, vs, res)?
            }
            SheafSpec::ExtendByZero { sheaf, open } => {
                let f = self.sheaf(sheaf)?;
                let member = cell_set(f.base(), open)?;
                f.extend_by_zero(&member)?
            }
            SheafSpec::Dual { sheaf } => self.sheaf(sheaf)?.verdier_dual()?,
            SheafSpec::Shift { sheaf, by } => self.sheaf(sheaf)?.shift(*by),
            SheafSpec::Tensor { left, right } => self.sheaf(left)?.tensor(&self.sheaf(right)?)?,
            SheafSpec::External { left, right } => self.sheaf(left)?.external(&self.sheaf(right)?),
            SheafSpec::Pullback { map, sheaf } => CellularSheaf::pullback(&self.map(map)?, &self.sheaf(sheaf)?)?,
            SheafSpec::Pushforward { map, sheaf } => CellularSheaf::pushforward(&self.map(map)?, &self.sheaf(sheaf)?)?,
            SheafSpec::Compose { left, right } => {
                CellularSheaf::kernel_compose(&self.sheaf(left)?, &self.sheaf(right)?)?
            }
        };
        self.pending.remove(name);
        self.out.sheaves.insert(name.to_string(), sheaf.clone());
        Ok(sheaf)
    }

    fn map(&mut self, name: &str) -> Load<CellularMap> {
        if let Some(m) = self.out.maps.get(name) {
            return Ok(m.clone());
        }
        let spec = self
            .file
            .maps
            .get(name)
            .ok_or_else(|| LoadError::Invalid(format!("unknown map {name:?}")))?;
        let map = match spec {
            MapSpec::Vertex {
                source,
                target,
                vertices,
            } => {
                let (s, t) = (self.complex(source.as_ref())?, self.complex(target.as_ref())?);
                let vm = vertices
                    .iter()
                    .map(|(k, v)| {
                        k.parse::<u32>()
                            .map(|k| (k, *v))
                            .map_err(|_| LoadError::Parse(format!("map {name:?}: vertex key {k:?}")))
                    })
                    .collect::<Load<BTreeMap<u32, u32>>>()?;
                CellularMap::from_vertex_map(&s, &t, &vm)?
            }
            MapSpec::Cells {
                source,
                target,
                cells,
                orientation,
            } => {
                let (s, t) = (self.complex(source.as_ref())?, self.complex(target.as_ref())?);
                let mut assignment = vec![usize::MAX; s.len()];
                for (a, b) in cells {
                    assignment[s.lookup(a)?] = t.lookup(b)?;
                }
                if let Some(c) = assignment.iter().position(|&x| x == usize::MAX) {
                    return Err(LoadError::Invalid(format!("map {name:?}: no image for {}", s.id_of(c))));
                }
                let mut orient = vec![None; s.len()];
                for (a, e) in orientation {
                    orient[s.lookup(a)?] = Some(*e);
                }
                CellularMap::new(s, t, assignment, orient)?
            }
            MapSpec::Identity { source } => CellularMap::identity(&self.complex(source.as_ref())?),
            MapSpec::ToPoint { source, target } => {
                let (s, t) = (self.complex(source.as_ref())?, self.complex(Some(target))?);
                CellularMap::to_point(&s, &t)?
            }
            MapSpec::Inclusion { source, target } => {
                let (s, t) = (self.complex(Some(source))?, self.complex(target.as_ref())?);
                CellularMap::inclusion(&s, &t)?
            }
            MapSpec::Projection { source, factor } => {
                let p = self.product_of(source)?;
                match factor {
                    1 => p.first,
                    2 => p.second,
                    _ => return Err(LoadError::Invalid(format!("map {name:?}: factor must be 1 or 2"))),
                }
            }
        };
        self.out.maps.insert(name.to_string(), map.clone());
        Ok(map)
    }

    fn kernel(&mut self, r: &KernelRef, depth: usize) -> Load<TraceKernel> {
        if depth > 64 {
            return Err(LoadError::Invalid("kernel provenance is cyclic or too deep".into()));
        }
        let spec = match r {
            KernelRef::Name(n) => {
                if let Some(k) = self.out.kernels.get(n) {
                    return Ok(k.clone());
                }
                let spec = self
                    .file
                    .kernels
                    .get(n)
                    .ok_or_else(|| LoadError::Invalid(format!("unknown kernel {n:?}")))?
                    .clone();
                let k = self.kernel_spec(&spec, depth)?;
                self.out.kernels.insert(n.clone(), k.clone());
                return Ok(k);
            }
            KernelRef::Tree(t) => t.as_ref().clone(),
        };
        self.kernel_spec(&spec, depth)
    }

    fn kernel_spec(&mut self, spec: &KernelSpec, depth: usize) -> Load<TraceKernel> {
        Ok(match spec {
            KernelSpec::Tk(sheaf) => tk(&self.sheaf(sheaf)?)?,
            KernelSpec::External(a, b) => external_tk(&self.kernel(a, depth + 1)?, &self.kernel(b, depth + 1)?)?,
            KernelSpec::Compose(a, b) => compose_tk(&self.kernel(a, depth + 1)?, &self.kernel(b, depth + 1)?)?,
            KernelSpec::Twist(a, d) => shift_twist(&self.kernel(a, depth + 1)?, *d)?,
        })
    }
}

impl Instance {
    pub fn load(file: &InstanceFile) -> Load<Self> {
        let mut l = Loader {
            file,
            out: Instance::default(),
            products: BTreeMap::new(),
            pending: BTreeSet::new(),
        };
        if let Some(c) = &file.complex {
            l.out.complex = Some(Arc::new(complex_from_spec(c).map_err(|e| prefix(e, "complex"))?));
        }
        for (name, c) in &file.complexes {
            if name == MAIN {
                return parse_err(format!("{MAIN:?} is reserved for the top-level complex"));
            }
            let cx = complex_from_spec(c).map_err(|e| prefix(e, &format!("complex {name:?}")))?;
            l.out.complexes.insert(name.clone(), Arc::new(cx));
        }
        for name in file.maps.keys() {
            l.map(name)?;
        }
        for name in file.sheaves.keys() {
            l.sheaf(name)?;
        }
        for (name, c) in &file.cycles {
            let base = l.complex(c.base.as_ref())?;
            l.out
                .cycles
                .insert(name.clone(), LagCycle::from_map(&base, &c.weights)?);
        }
        for name in file.kernels.keys() {
            l.kernel(&KernelRef::Name(name.clone()), 0)?;
        }
        for (name, spec) in &file.lefschetz {
            let f = l.map(&spec.map)?;
            let sheaf = l.sheaf(&spec.sheaf)?;
            let base = sheaf.base().clone();
            let phi = match &spec.phi {
                None => sheaf.stalks().iter().map(ChainMap::identity).collect(),
                Some(per_cell) => {
                    let mut phi = vec![ChainMap::zero(); base.len()];
                    for (id, blocks) in per_cell {
                        let c = base.lookup(id)?;
                        let src = sheaf.stalk(f.image(c));
                        phi[c] =
                            chain_map_from_spec(blocks, src, sheaf.stalk(c), &format!("lefschetz {name:?} at {id}"))?;
                    }
                    phi
                }
            };
            let inst = LefschetzInstance::new(f, sheaf, phi)
                .map_err(|e| LoadError::Invalid(format!("lefschetz {name:?}: {e}")))?;
            l.out.lefschetz.insert(name.clone(), inst);
        }
        Ok(l.out)
    }

    /// Serializes every payload in explicit form.
    pub fn to_file(&self) -> InstanceFile {
        let mut w = Writer::new(self.complex.clone());
        for (n, c) in &self.complexes {
            w.named.push((n.clone(), c.clone()));
        }
        for (n, s) in &self.sheaves {
            let spec = w.sheaf(s);
            w.file.sheaves.insert(n.clone(), spec);
        }
        for (n, m) in &self.maps {
            let spec = w.map(m);
            w.file.maps.insert(n.clone(), spec);
        }
        for (n, c) in &self.cycles {
            let spec = CycleSpec {
                base: w.complex_ref(c.base()),
                weights: c.to_map(),
            };
            w.file.cycles.insert(n.clone(), spec);
        }
        for (n, k) in &self.kernels {
            let spec = w.kernel(n, k.provenance());
            w.file.kernels.insert(n.clone(), spec);
        }
        for (n, inst) in &self.lefschetz {
            let map = format!("{n}.map");
            let sheaf = format!("{n}.sheaf");
            let ms = w.map(inst.map());
            w.file.maps.insert(map.clone(), ms);
            let ss = w.sheaf(inst.sheaf());
            w.file.sheaves.insert(sheaf.clone(), ss);
            let phi = (0..inst.sheaf().base().len())
                .filter(|&c| !inst.phi()[c].is_zero())
                .map(|c| {
                    (
                        inst.sheaf().base().id_of(c).to_string(),
                        chain_map_to_spec(&inst.phi()[c]),
                    )
                })
                .collect();
            w.file.lefschetz.insert(
                n.clone(),
                LefschetzSpec {
                    map,
                    sheaf,
                    phi: Some(phi),
                },
            );
        }
        w.finish()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable")
    }

    /// Total number of cells over all payload bases, a rough size measure
    /// for picking the smallest counterexample.
    pub fn size(&self) -> usize {
        self.sheaves.values().map(|s| s.base().len()).sum::<usize>()
            + self
                .maps
                .values()
                .map(|m| m.source().len() + m.target().len())
                .sum::<usize>()
            + self.cycles.values().map(|c| c.base().len()).sum::<usize>()
            + self
                .kernels
                .values()
                .map(|k| k.underlying().base().len())
                .sum::<usize>()
            + self.lefschetz.values().map(|l| l.sheaf().base().len()).sum::<usize>()
    }
}

fn prefix(e: LoadError, what: &str) -> LoadError {
    match e {
        LoadError::Parse(m) => LoadError::Parse(format!("{what}: {m}")),
        LoadError::Invalid(m) => LoadError::Invalid(format!("{what}: {m}")),
    }
}

struct Writer {
    file: InstanceFile,
    main: Option<Arc<CellComplex>>,
    named: Vec<(String, Arc<CellComplex>)>,
}

impl Writer {
    fn new(main: Option<Arc<CellComplex>>) -> Self {
        Writer {
            file: InstanceFile {
                version: FORMAT_VERSION.into(),
                complex: None,
                complexes: BTreeMap::new(),
                sheaves: BTreeMap::new(),
                maps: BTreeMap::new(),
                cycles: BTreeMap::new(),
                kernels: BTreeMap::new(),
                lefschetz: BTreeMap::new(),
            },
            main,
            named: Vec::new(),
        }
    }

    fn leaf_name(&mut self, cx: &Arc<CellComplex>) -> String {
        if self.main.is_none() {
            self.main = Some(cx.clone());
        }
        if self.main.as_deref() == Some(cx.as_ref()) {
            return MAIN.to_string();
        }
        if let Some((n, _)) = self.named.iter().find(|(_, c)| **c == **cx) {
            return n.clone();
        }
        let name = format!("X{}", self.named.len() + 1);
        self.named.push((name.clone(), cx.clone()));
        name
    }

    fn full_ref(&mut self, cx: &Arc<CellComplex>) -> ComplexRef {
        match cx.factors() {
            Some((a, b)) => {
                let (a, b) = (a.clone(), b.clone());
                ComplexRef::Product {
                    product: (Box::new(self.full_ref(&a)), Box::new(self.full_ref(&b))),
                }
            }
            None => ComplexRef::Name(self.leaf_name(cx)),
        }
    }

    fn complex_ref(&mut self, cx: &Arc<CellComplex>) -> Option<ComplexRef> {
        match self.full_ref(cx) {
            ComplexRef::Name(n) if n == MAIN => None,
            r => Some(r),
        }
    }

    fn sheaf(&mut self, s: &CellularSheaf) -> SheafSpec {
        let base = s.base();
        let stalks = (0..base.len())
            .filter(|&c| !s.stalk(c).is_zero())
            .map(|c| (base.id_of(c).to_string(), stalk_to_spec(s.stalk(c))))
            .collect();
        let restrictions = base
            .incidences()
            .filter_map(|(t, f, _)| {
                let m = s.restriction_map(f, t)?;
                (!m.is_zero()).then(|| RestrictionSpec {
                    face: base.id_of(f).to_string(),
                    coface: base.id_of(t).to_string(),
                    blocks: chain_map_to_spec(m),
                })
            })
            .collect();
        SheafSpec::Explicit {
            base: self.complex_ref(base),
            stalks,
            restrictions,
        }
    }

    fn map(&mut self, m: &CellularMap) -> MapSpec {
        let (src, tgt) = (m.source().clone(), m.target().clone());
        match m.kind() {
            MapKind::FirstProjection | MapKind::SecondProjection => {
                return MapSpec::Projection {
                    source: self.full_ref(&src),
                    factor: if m.kind() == MapKind::FirstProjection { 1 } else { 2 },
                };
            }
            MapKind::General => {}
        }
        if let (Some(ss), Some(_)) = (src.simplices(), tgt.simplices()) {
            let vertices: BTreeMap<u32, u32> = ss
                .iter()
                .enumerate()
                .filter(|(_, s)| s.len() == 1)
                .filter_map(|(c, s)| {
                    let img = tgt.simplices()?.get(m.image(c))?;
                    (img.len() == 1).then_some((s[0], img[0]))
                })
                .collect();
            if let Ok(again) = CellularMap::from_vertex_map(&src, &tgt, &vertices) {
                if again.assignment() == m.assignment()
                    && (0..src.len()).all(|c| again.orientation_sign(c) == m.orientation_sign(c))
                {
                    return MapSpec::Vertex {
                        source: self.complex_ref(&src),
                        target: self.complex_ref(&tgt),
                        vertices: vertices.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                    };
                }
            }
        }
        MapSpec::Cells {
            source: self.complex_ref(&src),
            target: self.complex_ref(&tgt),
            cells: (0..src.len())
                .map(|c| (src.id_of(c).to_string(), tgt.id_of(m.image(c)).to_string()))
                .collect(),
            orientation: (0..src.len())
                .filter_map(|c| Some((src.id_of(c).to_string(), m.orientation_sign(c)?)))
                .collect(),
        }
    }

    fn kernel(&mut self, name: &str, p: &Provenance) -> KernelSpec {
        let mut counter = 0;
        self.kernel_tree(name, p, &mut counter)
    }

    fn kernel_tree(&mut self, name: &str, p: &Provenance, counter: &mut usize) -> KernelSpec {
        let sub = |w: &mut Self, k: &TraceKernel, counter: &mut usize| {
            KernelRef::Tree(Box::new(w.kernel_tree(name, k.provenance(), counter)))
        };
        match p {
            Provenance::Tk(f) => {
                *counter += 1;
                let sheaf_name = format!("{name}.tk{counter}");
                let spec = self.sheaf(f);
                self.file.sheaves.insert(sheaf_name.clone(), spec);
                KernelSpec::Tk(sheaf_name)
            }
            Provenance::External(a, b) => {
                let (x, y) = (sub(self, a, counter), sub(self, b, counter));
                KernelSpec::External(x, y)
            }
            Provenance::Compose(a, b) => {
                let (x, y) = (sub(self, a, counter), sub(self, b, counter));
                KernelSpec::Compose(x, y)
            }
            Provenance::ShiftTwist(a, d) => KernelSpec::Twist(sub(self, a, counter), *d),
        }
    }

    fn finish(mut self) -> InstanceFile {
        self.file.complex = self.main.as_deref().map(complex_to_spec);
        self.file.complexes = self
            .named
            .iter()
            .map(|(n, c)| (n.clone(), complex_to_spec(c)))
            .collect();
        self.file
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCLE: &str = r#"{
        "version": "1",
        "complex": {"simplices": [[0,1],[1,2],[0,2]]},
        "complexes": {"pt": {"simplices": [[0]]}},
        "sheaves": {
            "k": {"kind": "constant"},
            "w": {"kind": "dual", "sheaf": "k"},
            "j": {"kind": "extend_by_zero", "sheaf": "k", "open": ["[0,1]"]},
            "e": {"kind": "explicit", "stalks": {"[0]": {"lo": 0, "dims": [1]}, "[0,1]": {"lo": 0, "dims": [1]}},
                  "restrictions": [{"face": "[0]", "coface": "[0,1]", "blocks": {"0": [["2/3"]]}}]}
        },
        "maps": {"rot": {"kind": "vertex", "vertices": {"0": 1, "1": 2, "2": 0}},
                 "c": {"kind": "to_point", "target": "pt"}},
        "cycles": {"m": {"weights": {"[0]": 1, "[0,1]": -1}}},
        "kernels": {"K": {"twist": [{"tk": "k"}, 2]}},
        "lefschetz": {"L": {"map": "rot", "sheaf": "k"}}
    }"#;

    #[test]
    fn loads_and_round_trips() {
        let inst = load_str(CIRCLE).unwrap();
        assert_eq!(inst.sheaves["w"].euler_char().unwrap(), 0);
        assert_eq!(inst.sheaves["j"].euler_char().unwrap(), -1);
        assert_eq!(inst.cycles["m"].degree(), 0);
        assert_eq!(inst.kernels["K"].class().degree(), 0);
        assert_eq!(inst.lefschetz["L"].global_trace().unwrap(), crate::qlinalg::q(0));
        let text = inst.to_json();
        let again = load_str(&text).unwrap();
        for (n, s) in &inst.sheaves {
            assert_eq!(&again.sheaves[n], s, "sheaf {n}");
        }
        assert_eq!(again.cycles["m"], inst.cycles["m"]);
        assert_eq!(again.kernels["K"].class(), inst.kernels["K"].class());
        assert_eq!(again.kernels["K"].underlying(), inst.kernels["K"].underlying());
        assert_eq!(again.maps["rot"].assignment(), inst.maps["rot"].assignment());
        assert_eq!(
            again.lefschetz["L"].local_trace_sum(),
            inst.lefschetz["L"].local_trace_sum()
        );
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn product_bases_round_trip() {
        let text = r#"{"version": "1", "complex": {"simplices": [[0,1]]},
            "sheaves": {"f": {"kind": "constant", "base": {"product": ["main", "main"]}}}}"#;
        let inst = load_str(text).unwrap();
        assert_eq!(inst.sheaves["f"].base().len(), 9);
        let again = load_str(&inst.to_json()).unwrap();
        assert_eq!(again.sheaves["f"], inst.sheaves["f"]);
        assert!(again.sheaves["f"].base().factors().is_some());
    }

    #[test]
    fn errors_are_classified() {
        assert!(matches!(load_str("{not json"), Err(LoadError::Parse(_))));
        assert!(matches!(load_str(r#"{"version": "9"}"#), Err(LoadError::Parse(_))));
        let flipped = r#"{"version": "1", "complex": {"poset": {
            "cells": [{"id": "a", "dim": 0}, {"id": "b", "dim": 0}, {"id": "e", "dim": 1}],
            "incidence": [["e", "a", 1], ["e", "b", 1]]}}}"#;
        match load_str(flipped) {
            Err(LoadError::Invalid(m)) => assert!(m.contains('e'), "{m}"),
            other => panic!("expected a validation failure, got {other:?}"),
        }
        let bad_shape = r#"{"version": "1", "complex": {"simplices": [[0,1]]},
            "sheaves": {"e": {"kind": "explicit", "stalks": {"[0]": {"lo": 0, "dims": [1]}, "[0,1]": {"lo": 0, "dims": [1]}},
            "restrictions": [{"face": "[0]", "coface": "[0,1]", "blocks": {"0": [["1", "2"]]}}]}}}"#;
        assert!(matches!(load_str(bad_shape), Err(LoadError::Invalid(_))));
    }
}
