//! Exact diagonalization toolkit for a one-dimensional Z_n lattice gauge
//! theory coupled to staggered fermions.
//!
//! The crate is organised bottom-up:
//!
//! * [`weyl`] builds the single-link clock and shift operators and the
//!   electric-field energy.
//! * [`lattice`] enumerates the site-and-link Hilbert space, embeds fermion
//!   and link operators and evaluates the local Gauss operators.
//! * [`hamiltonians`] assembles the gauge Hamiltonian, the uncorrelated
//!   implementation Hamiltonian, the penalty operator and the closed-form
//!   correlated-hopping target.
//! * [`effective`] computes the second-order effective Hamiltonian on the
//!   physical sector and certifies it against the closed form.
//! * [`solver`] diagonalizes, evolves and measures.
//! * [`cli`] and [`config`] drive everything from a configuration file.

pub mod cli;
pub mod config;
pub mod effective;
pub mod error;
pub mod hamiltonians;
pub mod lattice;
pub mod output;
pub mod solver;
pub mod sparse;
pub mod weyl;

pub use num_complex::Complex64 as C64;

pub use effective::SectorProjector;
pub use error::{Error, Result};
pub use hamiltonians::{CountertermMode, ModelParams, PenaltyParams};
pub use lattice::{BasisState, Boundary, LatticeSpec, StateIndex};
pub use solver::{ObservableSeries, SpectralDecomposition};
pub use sparse::SparseOperator;
pub use weyl::DenseOperator;
