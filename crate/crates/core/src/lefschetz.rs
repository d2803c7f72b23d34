//! Lefschetz numbers of cellular self-maps with coefficients in a sheaf.
//!
//! A lift `phi: f^{-1}F -> F` is a chain map `F(f s) -> F(s)` on every cell,
//! natural in restrictions. Its global trace is the alternating trace of the
//! induced endomorphism of the global sections complex; its local trace sum
//! runs over the cells that `f` fixes.

use crate::cellcx::CellularMap;
use crate::error::{Error, Result};
use crate::qlinalg::{cohomology_trace, parity_sign, push_block, supertrace, trace_endo, ChainMap, RationalMatrix, Q};
use crate::sheaf::{CellularSheaf, SheafMorphism};

#[derive(Debug, Clone)]
pub struct LefschetzInstance {
    f: CellularMap,
    sheaf: CellularSheaf,
    phi: Vec<ChainMap>,
}

impl LefschetzInstance {
    pub fn new(f: CellularMap, sheaf: CellularSheaf, phi: Vec<ChainMap>) -> Result<Self> {
        if f.source() != f.target() {
            return Err(Error::InvalidMap("a Lefschetz instance needs a self-map".into()));
        }
        if f.source() != sheaf.base() && **f.source() != **sheaf.base() {
            return Err(Error::BaseMismatch);
        }
        let pulled = CellularSheaf::pullback(&f, &sheaf)?;
        SheafMorphism::new(pulled, sheaf.clone(), phi.clone())?;
        Ok(LefschetzInstance { f, sheaf, phi })
    }

    /// `phi = c * id` over the identity map.
    pub fn scalar(sheaf: &CellularSheaf, c: &Q) -> Self {
        LefschetzInstance {
            f: CellularMap::identity(sheaf.base()),
            sheaf: sheaf.clone(),
            phi: sheaf.stalks().iter().map(|v| ChainMap::scalar(v, c)).collect(),
        }
    }

    pub fn map(&self) -> &CellularMap {
        &self.f
    }

    pub fn sheaf(&self) -> &CellularSheaf {
        &self.sheaf
    }

    pub fn phi(&self) -> &[ChainMap] {
        &self.phi
    }

    /// The endomorphism of the global sections complex: on the block of `s`
    /// it reads the block of `f(s)` through `sign(s) * phi_s`, and it is zero
    /// where `f` lowers dimension.
    pub fn global_endomorphism(&self) -> Result<(crate::qlinalg::VectComplex, ChainMap)> {
        let sections = self.sheaf.sections_over(&vec![true; self.sheaf.base().len()])?;
        let base = self.sheaf.base();
        let mut per_degree: std::collections::BTreeMap<i32, Vec<(usize, usize, Q)>> = Default::default();
        for s in 0..base.len() {
            let Some(sign) = self.f.orientation_sign(s) else {
                continue;
            };
            let fs = self.f.image(s);
            let factor = Q::from_integer(i64::from(sign).into());
            for (q, m) in self.phi[s].blocks() {
                let (Some(&row), Some(&col)) = (sections.index.get(&(s, q)), sections.index.get(&(fs, q))) else {
                    continue;
                };
                let n = base.dim_of(s) as i32 + q;
                push_block(per_degree.entry(n).or_default(), row, col, m, &factor);
            }
        }
        let v = sections.complex;
        let blocks = per_degree
            .into_iter()
            .map(|(n, e)| (n, RationalMatrix::from_triplets(v.dim(n), v.dim(n), e)))
            .collect();
        Ok((v, ChainMap::from_blocks(blocks)))
    }

    /// Alternating trace of the global endomorphism at chain level.
    pub fn global_trace(&self) -> Result<Q> {
        let (v, phi) = self.global_endomorphism()?;
        trace_endo(&v, &phi)
    }

    /// Alternating trace on cohomology. Equal to [`Self::global_trace`] by
    /// the Hopf trace formula; computed separately as a check.
    pub fn cohomology_trace(&self) -> Result<Q> {
        let (v, phi) = self.global_endomorphism()?;
        cohomology_trace(&v, &phi)
    }

    /// `sum over f(s) = s of (-1)^{dim s} sign(s) str(phi_s)`.
    pub fn local_trace_sum(&self) -> Q {
        let base = self.sheaf.base();
        self.f
            .fixed_cells()
            .into_iter()
            .map(|s| {
                let sign = parity_sign(base.dim_of(s) as i64) * i64::from(self.f.orientation_sign(s).unwrap_or(0));
                supertrace(self.sheaf.stalk(s), &self.phi[s]) * Q::from_integer(sign.into())
            })
            .sum()
    }
}

pub fn global_trace(inst: &LefschetzInstance) -> Result<Q> {
    inst.global_trace()
}

pub fn local_trace_sum(inst: &LefschetzInstance) -> Q {
    inst.local_trace_sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellcx::shapes::*;
    use crate::cellcx::CellComplex;
    use crate::qlinalg::q;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn vertex_map(x: &Arc<CellComplex>, images: &[(u32, u32)]) -> CellularMap {
        let m: BTreeMap<u32, u32> = images.iter().copied().collect();
        CellularMap::from_vertex_map(x, x, &m).unwrap()
    }

    fn identity_lift(f: &CellularMap, k: &CellularSheaf) -> LefschetzInstance {
        let phi = k.stalks().iter().map(ChainMap::identity).collect();
        LefschetzInstance::new(f.clone(), k.clone(), phi).unwrap()
    }

    #[test]
    fn worked_examples_on_the_circle() {
        let s1 = Arc::new(hollow_triangle());
        let k = CellularSheaf::constant(&s1);

        let id = identity_lift(&CellularMap::identity(&s1), &k);
        assert_eq!(id.global_trace().unwrap(), q(0));
        assert_eq!(id.local_trace_sum(), q(0));

        let rot = identity_lift(&vertex_map(&s1, &[(0, 1), (1, 2), (2, 0)]), &k);
        assert_eq!(rot.global_trace().unwrap(), q(0));
        assert_eq!(rot.cohomology_trace().unwrap(), q(0));
        assert_eq!(rot.local_trace_sum(), q(0));

        let refl = identity_lift(&vertex_map(&s1, &[(0, 0), (1, 2), (2, 1)]), &k);
        assert_eq!(refl.global_trace().unwrap(), q(2));
        assert_eq!(refl.cohomology_trace().unwrap(), q(2));
        assert_eq!(refl.local_trace_sum(), q(2));
    }

    #[test]
    fn scalar_on_interval() {
        let i = Arc::new(interval());
        let inst = LefschetzInstance::scalar(&CellularSheaf::constant(&i), &q(5));
        assert_eq!(inst.global_trace().unwrap(), q(5));
        assert_eq!(inst.local_trace_sum(), q(5));
    }

    #[test]
    fn identity_gives_euler_characteristic() {
        let t = Arc::new(torus7());
        let d = CellularSheaf::constant(&t).verdier_dual().unwrap();
        let inst = LefschetzInstance::scalar(&d, &q(1));
        assert_eq!(inst.global_trace().unwrap(), q(d.euler_char().unwrap()));
        assert_eq!(inst.local_trace_sum(), q(d.euler_char().unwrap()));
    }

    #[test]
    fn incompatible_lift_rejected() {
        let i = Arc::new(interval());
        let k = CellularSheaf::constant(&i);
        let line = crate::qlinalg::VectComplex::line(0);
        let phi = vec![
            ChainMap::identity(&line),
            ChainMap::scalar(&line, &q(2)),
            ChainMap::identity(&line),
        ];
        assert!(LefschetzInstance::new(CellularMap::identity(&i), k, phi).is_err());
    }
}
