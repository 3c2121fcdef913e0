//! Data-driven model reference control.
//!
//! Given raw input/state trajectory data from an unknown discrete-time
//! linear system, this crate decides whether the data are informative for
//! (approximate) model reference control, synthesizes controller gains with
//! optional closed-loop stability certificates, and verifies every
//! certificate against an independent brute-force oracle over the set of
//! data-consistent systems.

// Link the system BLAS/LAPACK used by the semidefinite backend.
extern crate openblas_src;

pub mod config;
pub mod linalg;
pub mod conic;
pub mod exact_mrc;
pub mod jsonmat;
pub mod qmi;

pub use config::NumericConfig;
pub use linalg::{Definiteness, Mat, Vector};
