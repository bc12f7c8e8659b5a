//! Space-time discontinuous Galerkin solver for scalar conservation laws with
//! streamline diffusion and shock capturing, plus the diagnostics used to check it.

pub mod diagnostics;
pub mod elements;
pub mod error;
pub mod exec;
pub mod law;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
