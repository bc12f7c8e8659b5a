use thiserror::Error;

/// Errors raised by the solver and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("entropy is not convex: second derivative {value} at u = {at}")]
    NonConvexEntropy { at: f64, value: f64 },
    #[error("empty sample grid")]
    EmptyGrid,
    #[error("degenerate domain [{left}, {right}]")]
    DegenerateDomain { left: f64, right: f64 },
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),
    #[error("polynomial degree {0} outside supported range 0..=4")]
    UnsupportedDegree(usize),
    #[error("non-finite value {value} at {what}")]
    NonFinite { what: String, value: f64 },
    #[error("unknown element id {0}")]
    UnknownElement(usize),
    #[error("singular affine map (scale {0:?})")]
    SingularMap(Vec<f64>),
    #[error("zero vector has no l^q normalisation")]
    ZeroVector,
    #[error("matrix is not symmetric positive semidefinite (eigenvalue {eigenvalue})")]
    NotPsd { eigenvalue: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("q must be an even integer >= 2, got {0}")]
    InvalidExponent(u32),
    #[error("unknown conservation law '{0}'")]
    UnknownLaw(String),
    #[error("Engquist-Osher flux requires f(0) = 0, law '{name}' has f(0) = {f0}")]
    FluxNotZeroAtOrigin { name: String, f0: f64 },
    #[error("invalid stabilization parameter: {0}")]
    InvalidStabilization(String),
    #[error("slab {slab}: predecessor slab is not solved")]
    UnsolvedPredecessor { slab: usize },
    #[error("slab {slab}: Newton failed after {iterations} iterations, residual {residual:e}")]
    NewtonDivergence {
        slab: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("slab {slab}: singular Jacobian block at cell {cell}")]
    SingularJacobian { slab: usize, cell: usize },
    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },
    #[error("malformed solution dump, line {line}: {reason}")]
    Dump { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
