//! Projective quantum Monte Carlo (PQMC) tunneling-time laboratory.
//!
//! The crate measures how long diffusion Monte Carlo (continuous space) and
//! Green-function Monte Carlo (spin models) populations need to leak from one
//! well of a double-well landscape into the other, with and without guiding
//! wave functions, and compares that imaginary time with the first energy gap.
//!
//! Layout:
//! - [`population`]: walkers, branching, reference-energy control, statistics.
//! - [`potential`], [`spectral`]: the 1D double well and its deterministic
//!   reference results (finite differences, WKB, Kramers).
//! - [`dmc`]: diffusion Monte Carlo and the continuum tunneling protocol.
//! - [`spin`], [`exact`]: spin models and exact gaps (free fermions, Lanczos).
//! - [`gwf`]: spin guiding wave functions and their variational optimisation.
//! - [`gfmc`]: Green-function Monte Carlo and the spin tunneling protocol.
//! - [`harness`]: configuration, sweeps, power-law fits and reports.

pub mod dmc;
pub mod error;
pub mod exact;
pub mod gfmc;
pub mod gwf;
pub mod harness;
pub mod kv;
pub mod population;
pub mod potential;
pub mod spectral;
pub mod spin;

pub use error::{Error, Result};
pub use population::{
    branch, repetition_rng, summarize, PopulationControl, RunStatistics, SimRng, Walker,
};
pub use potential::{PotentialKind, PotentialSpec};
pub use spectral::{solve_lowest_two, wkb_gap, Grid1D, SpectralResult};

pub use spin::{SpinConfig, SpinHamiltonian, SpinModel};
pub use exact::{exact_diag, exact_diag_gap, free_fermion_gap, ExactSpectrum};
pub use dmc::{DmcConfig, GuidingWf1d};
pub use gfmc::{GfmcConfig, SpinWalker};
pub use gwf::{GwfRecord, SpinGwf};
