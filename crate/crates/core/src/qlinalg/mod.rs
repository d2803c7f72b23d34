//! Exact rational linear algebra and the homological primitives built on it.

mod complex;
mod matrix;
mod rational;

pub(crate) use complex::{block_diag, push_block, supertrace};
pub use complex::{cohomology_trace, total_complex, trace_endo, ChainMap, DoubleComplex, VectComplex};
pub use matrix::RationalMatrix;
pub use rational::{format_rational, parity_sign, parse_rational, q, q_frac, to_i64, ParseRationalError, Q};
