//! A pseudo-spectral laboratory for the geometric structure of the heat
//! equation `ω_t = ω_xx` on the periodic interval `[-a, a)`.
//!
//! Everything lives on one discretized field space: fields are sample
//! vectors, integro-differential operators are dense `N×N` matrices, and
//! tensor structures of every valence — symmetries (vectors), Lagrangian
//! one-forms, Lagrange brackets (0,2), Poisson bivectors (2,0), strong
//! symmetries (1,1) and metrics — are either constant-coefficient matrix
//! families in time or field-dependent closures. Each claimed identity
//! (flow-along transport, bracket axioms, action principles, conservation,
//! Cole-Hopf naturality) is checked as a numerical residual against an
//! explicit tolerance.

pub mod cole_hopf;
pub mod config;
pub mod dsl;
pub mod grid;
pub mod hamiltonian;
pub mod heat;
pub mod metric;
pub mod operator;
pub mod report;
pub mod sampling;
pub mod suites;
pub mod tensor;

pub use grid::{Field, GridSpec};
