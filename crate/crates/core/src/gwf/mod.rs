//! Guiding wave functions for the spin models.
//!
//! - [`BoltzmannGwf`]: `Psi_G(x) = exp(-beta E_cl(x))`.
//! - [`Urbm`]: `Psi_G(x) = sum_h phi(x, h)` with nearest-neighbour couplings
//!   inside both layers and a local visible-hidden coupling.
//! - [`SpinGwf::Tabulated`]: log amplitudes for every configuration, used with
//!   exact ground states.

mod boltzmann;
mod record;
mod urbm;
mod variational;

use std::sync::Arc;

pub use boltzmann::BoltzmannGwf;
pub use record::GwfRecord;
pub use urbm::{HiddenState, Urbm};
pub use variational::{
    optimize_boltzmann_beta_spin, optimize_urbm, variational_energy, variational_energy_exact,
    variational_energy_sampled, BetaMethod, BetaOptimumSpin, EnergyMode, SgdConfig, SrConfig,
    SrIteration, SrResult, VariationalEstimate, EXACT_ENUMERATION_LIMIT,
};

use crate::error::{Error, Result};
use crate::spin::{SpinConfig, SpinModel};

#[derive(Debug, Clone, PartialEq)]
pub enum SpinGwf {
    None,
    Boltzmann(BoltzmannGwf),
    Urbm(Urbm),
    /// `ln Psi_G` indexed by configuration bits.
    Tabulated(Arc<Vec<f64>>),
}

impl SpinGwf {
    pub fn tabulated(log_amplitudes: Vec<f64>, n: usize) -> Result<Self> {
        if log_amplitudes.len() != 1usize << n {
            return Err(Error::invalid(format!(
                "expected {} log amplitudes for {n} spins, got {}",
                1usize << n,
                log_amplitudes.len()
            )));
        }
        Ok(SpinGwf::Tabulated(Arc::new(log_amplitudes)))
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            SpinGwf::None => "none",
            SpinGwf::Boltzmann(_) => "boltzmann",
            SpinGwf::Urbm(_) => "urbm",
            SpinGwf::Tabulated(_) => "exact",
        }
    }

    /// `"key=value;..."` description of the parameters.
    pub fn params_string(&self) -> String {
        match self {
            SpinGwf::None | SpinGwf::Tabulated(_) => String::new(),
            SpinGwf::Boltzmann(b) => format!("beta={}", b.beta),
            SpinGwf::Urbm(u) => format!("k1={};k2={};k3={}", u.k1, u.k2, u.k3),
        }
    }

    pub fn needs_hidden(&self) -> bool {
        matches!(self, SpinGwf::Urbm(_))
    }

    /// Checks that the wave function fits `model`.
    pub fn validate_for(&self, model: &SpinModel) -> Result<()> {
        let n = model.n();
        match self {
            SpinGwf::Urbm(u) if u.n != n => {
                Err(Error::invalid(format!("uRBM has {} visible spins, model has {n}", u.n)))
            }
            SpinGwf::Urbm(_) if !matches!(model, SpinModel::IsingChain { .. }) => {
                Err(Error::invalid("the uRBM ansatz is only defined for the chain"))
            }
            SpinGwf::Tabulated(t) if t.len() != 1usize << n => {
                Err(Error::invalid("tabulated amplitudes do not match the model size"))
            }
            _ => Ok(()),
        }
    }

    /// `ln Psi_G(x)`; the uRBM is traced over the hidden layer exactly.
    pub fn log_psi(&self, model: &SpinModel, x: &SpinConfig) -> f64 {
        match self {
            SpinGwf::None => 0.0,
            SpinGwf::Boltzmann(b) => b.log_psi(model, x),
            SpinGwf::Urbm(u) => u.log_trace(x),
            SpinGwf::Tabulated(t) => t[x.bits() as usize],
        }
    }

    /// `ln Psi_G(flip(x, i)) - ln Psi_G(x)` given `Delta E_cl` for the flip.
    /// The uRBM uses `phi` at hidden state `h`, or the exact trace without one.
    #[inline]
    pub fn log_ratio(&self, x: &SpinConfig, i: usize, delta_e: f64, h: Option<&HiddenState>) -> f64 {
        match self {
            SpinGwf::None => 0.0,
            SpinGwf::Boltzmann(b) => -b.beta * delta_e,
            SpinGwf::Urbm(u) => match h {
                Some(h) => u.log_phi_ratio(x, h, i),
                None => u.log_trace(&x.flipped(i)) - u.log_trace(x),
            },
            SpinGwf::Tabulated(t) => t[x.flipped(i).bits() as usize] - t[x.bits() as usize],
        }
    }
}
