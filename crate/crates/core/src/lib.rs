//! Exact finite models of constructible sheaves on regular cell complexes,
//! their Euler-type characteristic cycles, trace kernels and Lefschetz
//! numbers, all over the rationals.

pub mod cellcx;
pub mod error;
pub mod exec;
pub mod gen;
pub mod io;
pub mod lefschetz;
pub mod mueu;
pub mod qlinalg;
pub mod sheaf;
pub mod suites;
pub mod tracekernel;

pub use cellcx::{product, CellComplex, CellularMap, MapKind, Product};
pub use error::{Error, Result};
pub use qlinalg::{ChainMap, RationalMatrix, VectComplex, Q};
pub use sheaf::{CellularSheaf, SheafMorphism};
