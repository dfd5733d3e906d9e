//! Numerical laboratory for compressible Navier-Stokes flow on thin
//! collapsing domains: the 2D thin solver, the weighted 1D limit equations,
//! canonical lifts, the relative-entropy meter and convergence studies.

pub mod config;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod korn;
pub mod lift;
pub mod limit_solver;
pub mod mms;
pub mod study;
pub mod tensor;
pub mod thermo;
pub mod thin_solver;

pub use error::{Error, Result};
