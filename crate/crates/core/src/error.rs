use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("d^2 != 0 starting in degree {degree}")]
    NotAComplex { degree: i32 },
    #[error("total complex has d^2 != 0 at bidegree {bidegree:?}")]
    TotalNotAComplex { bidegree: (i32, i32) },
    #[error("map does not commute with differentials in degree {degree}")]
    NotAChainMap { degree: i32 },
    #[error("duplicate simplex {0:?}")]
    DuplicateSimplex(Vec<u32>),
    #[error("simplex {0:?} is not strictly sorted")]
    UnsortedSimplex(Vec<u32>),
    #[error("invalid cell complex: {0}")]
    InvalidComplex(String),
    #[error("invalid cellular map: {0}")]
    InvalidMap(String),
    #[error("invalid sheaf: {0}")]
    InvalidSheaf(String),
    #[error("sheaves live on different base complexes")]
    BaseMismatch,
    #[error("middle factors of the kernels differ")]
    MiddleMismatch,
    #[error("complex is not a product: {0}")]
    NotAProduct(String),
    #[error("cell set is not open (not an up-set): {0} has a coface outside")]
    NotAnUpSet(String),
    #[error("map is not a projection registered by a product")]
    NotAProjection,
    #[error("expected a one-point base, found {0} cells")]
    NotAPoint(usize),
    #[error("unknown cell {0:?}")]
    UnknownCell(String),
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
