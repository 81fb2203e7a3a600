//! Exact-diagonalization toolkit for the thermalization regimes of a
//! Tavis-Cummings cavity coupled to a disordered hardcore-boson exciton lattice.
//!
//! The pipeline runs basis -> Hamiltonian -> eigendecomposition -> dynamics,
//! with thermal comparisons, spectral statistics and signal analysis on top,
//! and disorder-averaged sweeps in [`ensemble`].

pub mod basis;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod observables;
pub mod output;
pub mod signal;
pub mod spectral;
pub mod thermal;

pub use error::{Error, Result};
