//! Integrability, Hamilton–Jacobi theory and constraint algorithms for
//! implicit dynamics generated by Morse families.

pub mod expr;
pub mod linalg;
pub mod sampling;
pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod affine;
pub mod report;
pub mod morse;
pub mod ide;
pub mod hj;
pub mod lagrangian;
pub mod sysfile;
pub mod cli;
