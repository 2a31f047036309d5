//! Numerical workbench for one- and two-dimensional multi-well Schrödinger
//! problems: basis diagonalization, split-operator propagation, SUSY
//! isospectral constructions, classical chaos diagnostics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classical;
pub mod diag;
pub mod error;
pub mod fft;
pub mod grid;
pub mod potentials;
pub mod propagate;
pub mod specfun;
pub mod spectrum;
pub mod susy;

pub use diag::{assemble, eigen_lowest, grid_eigen_1d, truncation_order, BasisFamily, BasisSpec, HamiltonianMatrix};
pub use error::{Error, Result};
pub use grid::{inner_product, make_grid, Grid, Grid1D, Grid2D, WaveFunction};
pub use potentials::{CriticalKind, CriticalPoint, PotentialSpec};
pub use spectrum::{Method, SpectrumLevel, SpectrumResult};
pub use susy::{SolvableModel, SusyParams};
