//! Trace kernels generated by `TK(F) = F ⊠ DF` and closed under external
//! product, shift twist and composition.
//!
//! The structure maps `k_Δ -> K -> ω_Δ` are not materialized: the diagonal
//! is not a subcomplex of a product cell structure. Each kernel instead
//! records how it was built, and its class on the diagonal factor is carried
//! along by the cycle algebra. Every constructor also keeps a sheaf on the
//! diagonal factor whose `mueu` must equal the class, and checks that it
//! does.

use std::sync::Arc;

use crate::cellcx::{product, CellComplex, CellularMap};
use crate::error::{Error, Result};
use crate::mueu::{compose_cycle, external_cycle, mueu, LagCycle};
use crate::sheaf::CellularSheaf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Tk(CellularSheaf),
    External(Box<TraceKernel>, Box<TraceKernel>),
    Compose(Box<TraceKernel>, Box<TraceKernel>),
    ShiftTwist(Box<TraceKernel>, i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceKernel {
    underlying: CellularSheaf,
    provenance: Provenance,
    class: LagCycle,
    generator: CellularSheaf,
}

impl TraceKernel {
    fn assemble(
        underlying: CellularSheaf,
        provenance: Provenance,
        class: LagCycle,
        generator: CellularSheaf,
    ) -> Result<Self> {
        let base = generator.base();
        if class.base() != base {
            return Err(Error::Consistency("class does not live on the diagonal factor".into()));
        }
        match underlying.base().factors() {
            Some((a, b)) if a == base && b == base => {}
            _ => return Err(Error::Consistency("underlying sheaf is not on M x M".into())),
        }
        let expected = mueu(&generator);
        if class != expected {
            return Err(Error::Consistency(format!(
                "class {:?} differs from mueu of the generating sheaf {:?}",
                class.to_map(),
                expected.to_map()
            )));
        }
        let chi = generator.euler_char()?;
        if class.degree() != chi {
            return Err(Error::Consistency(format!(
                "class has degree {} but the generating sheaf has chi {chi}",
                class.degree()
            )));
        }
        Ok(TraceKernel {
            underlying,
            provenance,
            class,
            generator,
        })
    }

    pub fn underlying(&self) -> &CellularSheaf {
        &self.underlying
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn class(&self) -> &LagCycle {
        &self.class
    }

    /// The diagonal factor `M`.
    pub fn diagonal(&self) -> &Arc<CellComplex> {
        self.class.base()
    }

    /// Sheaf on `M` whose microlocal Euler class is the class of `self`.
    pub fn generator(&self) -> &CellularSheaf {
        &self.generator
    }
}

/// `TK(F) = F ⊠ DF` with class `mueu(F)`.
pub fn tk(f: &CellularSheaf) -> Result<TraceKernel> {
    let underlying = f.external(&f.verdier_dual()?);
    TraceKernel::assemble(underlying, Provenance::Tk(f.clone()), mueu(f), f.clone())
}

/// The degree of the class of a kernel over a point.
pub fn eu_point(k: &TraceKernel) -> Result<i64> {
    let n = k.diagonal().len();
    if n != 1 {
        return Err(Error::NotAPoint(n));
    }
    Ok(k.class.degree())
}

/// Relabels a sheaf on `(A x B) x (C x D)` as one on `(A x C) x (B x D)`.
/// Stalks and restrictions are unchanged.
fn middle_swap(k: &CellularSheaf) -> Result<CellularSheaf> {
    let outer = k.base();
    let not_nested = || Error::NotAProduct("expected a product of two products".into());
    let (ab, cd) = outer.factors().ok_or_else(not_nested)?;
    let (a, b) = ab.factors().ok_or_else(not_nested)?;
    let (c, d) = cd.factors().ok_or_else(not_nested)?;
    let ac = product(a, c).complex;
    let bd = product(b, d).complex;
    let q = product(&ac, &bd).complex;
    let (nb, nc, nd) = (b.len(), c.len(), d.len());
    let mut assignment = Vec::with_capacity(q.len());
    let mut orientation = Vec::with_capacity(q.len());
    for cell in 0..q.len() {
        let (iac, ibd) = (cell / (nb * nd), cell % (nb * nd));
        let (ia, ic) = (iac / nc, iac % nc);
        let (ib, id) = (ibd / nd, ibd % nd);
        assignment.push((ia * nb + ib) * (nc * nd) + ic * nd + id);
        let odd = b.dim_of(ib) * c.dim_of(ic) % 2 == 1;
        orientation.push(Some(if odd { -1 } else { 1 }));
    }
    let g = CellularMap::new(q, outer.clone(), assignment, orientation)?;
    CellularSheaf::pullback(&g, k)
}

/// External product of kernels on `M` and `N`, a kernel on `M x N`.
pub fn external_tk(k1: &TraceKernel, k2: &TraceKernel) -> Result<TraceKernel> {
    let underlying = middle_swap(&k1.underlying.external(&k2.underlying))?;
    let generator = k1.generator.external(&k2.generator);
    let class = external_cycle(&k1.class, &k2.class);
    TraceKernel::assemble(
        underlying,
        Provenance::External(Box::new(k1.clone()), Box::new(k2.clone())),
        class,
        generator,
    )
}

/// `K ⊗ (k[d] ⊠ k[-d])`. The class is unchanged.
pub fn shift_twist(k: &TraceKernel, d: i32) -> Result<TraceKernel> {
    let underlying = match &k.provenance {
        Provenance::Tk(f) => f.shift(d).external(&f.verdier_dual()?.shift(-d)),
        _ => {
            let m = k.diagonal();
            let line = CellularSheaf::constant(m);
            let twist = line.shift(d).external_on(&line.shift(-d), k.underlying.base());
            k.underlying.tensor(&twist)?
        }
    };
    TraceKernel::assemble(
        underlying,
        Provenance::ShiftTwist(Box::new(k.clone()), d),
        k.class.clone(),
        k.generator.clone(),
    )
}

/// Composition of a kernel on `M1 x M2` with one on `M2 x M3`, a kernel on
/// `M1 x M3`. The underlying sheaves are composed over the doubled middle
/// factor `M2 x M2`.
pub fn compose_tk(k12: &TraceKernel, k23: &TraceKernel) -> Result<TraceKernel> {
    let middle = |k: &TraceKernel, second: bool| -> Result<Arc<CellComplex>> {
        let (a, b) = k
            .diagonal()
            .factors()
            .ok_or_else(|| Error::NotAProduct("kernel diagonal".into()))?;
        Ok(if second { b.clone() } else { a.clone() })
    };
    if middle(k12, true)? != middle(k23, false)? {
        return Err(Error::MiddleMismatch);
    }
    let left = middle_swap(&k12.underlying)?;
    let right = middle_swap(&k23.underlying)?;
    let underlying = middle_swap(&CellularSheaf::kernel_compose(&left, &right)?)?;
    let generator = CellularSheaf::kernel_compose(&k12.generator, &k23.generator)?;
    let class = compose_cycle(&k12.class, &k23.class)?;
    TraceKernel::assemble(
        underlying,
        Provenance::Compose(Box::new(k12.clone()), Box::new(k23.clone())),
        class,
        generator,
    )
}

/// Rebuilds a kernel bottom-up from its provenance tree.
pub fn expand(p: &Provenance) -> Result<TraceKernel> {
    match p {
        Provenance::Tk(f) => tk(f),
        Provenance::External(a, b) => external_tk(&expand(&a.provenance)?, &expand(&b.provenance)?),
        Provenance::Compose(a, b) => compose_tk(&expand(&a.provenance)?, &expand(&b.provenance)?),
        Provenance::ShiftTwist(a, d) => shift_twist(&expand(&a.provenance)?, *d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellcx::shapes::*;
    use crate::qlinalg::{RationalMatrix, VectComplex};

    fn arc(c: CellComplex) -> Arc<CellComplex> {
        Arc::new(c)
    }

    fn on_point(v: VectComplex) -> CellularSheaf {
        let pt = arc(CellComplex::point());
        CellularSheaf::new(pt, vec![v], Default::default()).unwrap()
    }

    #[test]
    fn tk_examples() {
        let pt = arc(CellComplex::point());
        let k = tk(&CellularSheaf::constant(&pt)).unwrap();
        assert_eq!(k.underlying().stalks(), &[VectComplex::line(0)]);
        assert_eq!(k.class().weights(), &[1]);

        let s1 = arc(hollow_triangle());
        let k = tk(&CellularSheaf::constant(&s1)).unwrap();
        assert_eq!(k.underlying().base().len(), 36);
        assert_eq!(k.class().degree(), 0);

        let z = tk(&CellularSheaf::zero(&s1)).unwrap();
        assert!(z.underlying().is_zero() && z.class().is_zero());
    }

    #[test]
    fn eu_point_examples() {
        let pt = arc(CellComplex::point());
        assert_eq!(eu_point(&tk(&CellularSheaf::constant(&pt)).unwrap()).unwrap(), 1);
        let v = VectComplex::with_zero_differentials(0, vec![1, 1]);
        assert_eq!(eu_point(&tk(&on_point(v)).unwrap()).unwrap(), 0);
        let d = RationalMatrix::from_i64(3, 2, &[&[1, 0], &[0, 0], &[0, 1]]);
        let v = VectComplex::new(0, vec![2, 3], vec![d]).unwrap();
        assert_eq!(eu_point(&tk(&on_point(v)).unwrap()).unwrap(), -1);
        let s1 = arc(hollow_triangle());
        assert!(matches!(
            eu_point(&tk(&CellularSheaf::constant(&s1)).unwrap()),
            Err(Error::NotAPoint(6))
        ));
    }

    #[test]
    fn external_tk_examples() {
        let pt = arc(CellComplex::point());
        let s1 = arc(hollow_triangle());
        let f = CellularSheaf::constant(&s1);
        let kp = tk(&CellularSheaf::constant(&pt)).unwrap();
        let kf = tk(&f).unwrap();
        let e = external_tk(&kp, &kf).unwrap();
        assert_eq!(e.class().weights(), kf.class().weights());
        let ee = external_tk(&kf, &kf).unwrap();
        assert_eq!(ee.class().degree(), 0);
        assert_eq!(ee.class(), &mueu(&f.external(&f)));
        assert!(ee.underlying().check().is_ok());
    }

    #[test]
    fn shift_twist_examples() {
        let pt = arc(CellComplex::point());
        let k = tk(&CellularSheaf::constant(&pt)).unwrap();
        assert_eq!(shift_twist(&k, 0).unwrap().underlying(), k.underlying());
        let t = shift_twist(&k, 1).unwrap();
        assert_eq!(t.class(), k.class());
        // k[1] ⊠ k[-1]: a line in degree -1 + 1
        assert_eq!(t.underlying().stalk(0), &VectComplex::line(0));
        let s1 = arc(hollow_triangle());
        let kf = tk(&CellularSheaf::constant(&s1)).unwrap();
        let e = external_tk(&kf, &k).unwrap();
        let t = shift_twist(&e, 3).unwrap();
        assert_eq!(t.class(), e.class());
        for c in 0..t.underlying().base().len() {
            assert_eq!(t.underlying().stalk_euler(c), e.underlying().stalk_euler(c));
        }
    }

    #[test]
    fn compose_tk_examples() {
        let pt = arc(CellComplex::point());
        let s1 = arc(hollow_triangle());
        let f12 = CellularSheaf::constant(&product(&pt, &s1).complex);
        let f23 = CellularSheaf::constant(&product(&s1, &pt).complex);
        let k = compose_tk(&tk(&f12).unwrap(), &tk(&f23).unwrap()).unwrap();
        assert_eq!(k.class().degree(), 0);
        assert_eq!(k.class(), &mueu(&CellularSheaf::kernel_compose(&f12, &f23).unwrap()));
        assert!(k.underlying().check().is_ok());

        let z = compose_tk(&tk(&f12).unwrap(), &tk(&CellularSheaf::zero(f23.base())).unwrap()).unwrap();
        assert!(z.class().is_zero());

        // a single middle vertex degenerates to the external product
        let i = arc(interval());
        let g12 = CellularSheaf::constant(&product(&i, &pt).complex);
        let g23 = CellularSheaf::constant(&product(&pt, &s1).complex)
            .verdier_dual()
            .unwrap();
        let c = compose_tk(&tk(&g12).unwrap(), &tk(&g23).unwrap()).unwrap();
        let e = external_cycle(
            &mueu(&CellularSheaf::constant(&i)),
            &mueu(&CellularSheaf::constant(&s1).verdier_dual().unwrap()),
        );
        assert_eq!(c.class().weights(), e.weights());

        assert!(matches!(
            compose_tk(&tk(&f12).unwrap(), &tk(&f12).unwrap()),
            Err(Error::MiddleMismatch)
        ));
    }

    #[test]
    fn expand_rebuilds() {
        let pt = arc(CellComplex::point());
        let s1 = arc(hollow_triangle());
        let k = shift_twist(
            &external_tk(
                &tk(&CellularSheaf::constant(&s1)).unwrap(),
                &tk(&CellularSheaf::constant(&pt)).unwrap(),
            )
            .unwrap(),
            -2,
        )
        .unwrap();
        assert_eq!(expand(k.provenance()).unwrap(), k);
    }
}
