//! Variational energies and optimisers for the spin guiding wave functions.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;

use super::{BoltzmannGwf, HiddenState, SpinGwf, Urbm};
use crate::dmc::golden_section;
use crate::error::{Error, Result};
use crate::population::{blocked_mean, SimRng};
use crate::spin::{SpinConfig, SpinModel};

/// Largest system for which energies are computed by full enumeration.
pub const EXACT_ENUMERATION_LIMIT: usize = 14;

/// `<Psi_G|H|Psi_G> / <Psi_G|Psi_G>` by enumeration of all `2^N` states; the
/// uRBM is traced exactly.
pub fn variational_energy_exact(gwf: &SpinGwf, model: &SpinModel) -> Result<f64> {
    let n = model.n();
    if n > EXACT_ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "exact variational energy supports at most {EXACT_ENUMERATION_LIMIT} spins, got {n}"
        )));
    }
    gwf.validate_for(model)?;
    let dim = 1u64 << n;
    let logs: Vec<f64> = (0..dim)
        .into_par_iter()
        .map(|b| gwf.log_psi(model, &SpinConfig::from_bits(b, n).expect("valid bits")))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let amp: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let gamma = model.gamma();
    let (num, den) = (0..dim as usize)
        .into_par_iter()
        .map(|b| {
            let x = SpinConfig::from_bits(b as u64, n).expect("valid bits");
            let a = amp[b];
            let hop: f64 = (0..n).map(|i| amp[b ^ (1 << i)]).sum();
            (a * a * model.classical_energy(&x) - gamma * a * hop, a * a)
        })
        .reduce(|| (0.0, 0.0), |p, q| (p.0 + q.0, p.1 + q.1));
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalEstimate {
    pub energy: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    /// Sampled stderr above the configured bound.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyMode {
    Exact,
    Sampled { samples: usize, hidden_sweeps: usize, stderr_bound: f64 },
}

pub fn variational_energy(
    gwf: &SpinGwf,
    model: &SpinModel,
    mode: EnergyMode,
    rng: &mut SimRng,
) -> Result<VariationalEstimate> {
    match mode {
        EnergyMode::Exact => Ok(VariationalEstimate {
            energy: variational_energy_exact(gwf, model)?,
            stderr: 0.0,
            flagged: false,
        }),
        EnergyMode::Sampled { samples, hidden_sweeps, stderr_bound } => {
            variational_energy_sampled(gwf, model, samples, hidden_sweeps, stderr_bound, rng)
        }
    }
}

/// Blocks used for sampled error bars.
const ERROR_BLOCKS: usize = 20;

/// Monte Carlo average of the local energy over `|Psi_G|^2`.
pub fn variational_energy_sampled(
    gwf: &SpinGwf,
    model: &SpinModel,
    samples: usize,
    hidden_sweeps: usize,
    stderr_bound: f64,
    rng: &mut SimRng,
) -> Result<VariationalEstimate> {
    if samples < ERROR_BLOCKS {
        return Err(Error::invalid(format!("need at least {ERROR_BLOCKS} samples")));
    }
    let mut sampler = Sampler::new(gwf, model, hidden_sweeps, rng)?;
    sampler.burn_in(rng, burn_in_sweeps(samples));
    let series: Vec<f64> = (0..samples)
        .map(|_| {
            sampler.sweep(rng);
            let obs = sampler.observe();
            0.5 * (obs.energy[0] + obs.energy[1])
        })
        .collect();
    let (energy, stderr) = blocked_mean(&series, ERROR_BLOCKS)?;
    Ok(VariationalEstimate { energy, stderr, flagged: !(stderr <= stderr_bound) })
}

fn burn_in_sweeps(samples: usize) -> usize {
    (samples / 10).max(200)
}

/// Local energy and log-derivatives from the two hidden replicas of a
/// visible sample (identical replicas when there is no hidden layer).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation {
    pub energy: [f64; 2],
    pub derivs: [[f64; 3]; 2],
}

/// Metropolis chain over `|Psi_G|^2`. For the uRBM it runs on
/// `(x, h, h')` with weight `phi(x, h) phi(x, h')`, whose `x` marginal is
/// `|Psi_G(x)|^2`.
pub(crate) struct Sampler<'a> {
    gwf: &'a SpinGwf,
    model: &'a SpinModel,
    x: SpinConfig,
    hidden: Option<[HiddenState; 2]>,
    hidden_sweeps: usize,
    flips: Vec<(usize, f64)>,
}

impl<'a> Sampler<'a> {
    /// The chain starts from the all-up configuration.
    pub fn new(gwf: &'a SpinGwf, model: &'a SpinModel, hidden_sweeps: usize, rng: &mut SimRng) -> Result<Self> {
        gwf.validate_for(model)?;
        let n = model.n();
        let x = SpinConfig::all_up(n)?;
        let hidden = match gwf {
            SpinGwf::Urbm(_) => {
                if hidden_sweeps == 0 {
                    return Err(Error::invalid("the uRBM sampler needs at least one hidden sweep"));
                }
                Some([HiddenState::random(n, rng)?, HiddenState::random(n, rng)?])
            }
            _ => None,
        };
        Ok(Sampler { gwf, model, x, hidden, hidden_sweeps, flips: Vec::with_capacity(n) })
    }

    pub fn burn_in(&mut self, rng: &mut SimRng, sweeps: usize) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }

    /// `N` single-flip proposals at random visible sites, then hidden sweeps
    /// on both replicas.
    pub fn sweep(&mut self, rng: &mut SimRng) {
        let n = self.model.n();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let log_a = match (self.gwf, &self.hidden) {
                (SpinGwf::Urbm(u), Some([h0, h1])) => u.log_phi_ratio(&self.x, h0, i) + u.log_phi_ratio(&self.x, h1, i),
                _ => 2.0 * self.gwf.log_ratio(&self.x, i, self.model.flip_delta(&self.x, i), None),
            };
            if log_a >= 0.0 || rng.random::<f64>() < log_a.exp() {
                self.x.flip(i);
            }
        }
        if let (SpinGwf::Urbm(u), Some(hs)) = (self.gwf, self.hidden.as_mut()) {
            for h in hs.iter_mut() {
                u.hidden_metropolis_sweep(&self.x, h, rng, self.hidden_sweeps);
            }
        }
    }

    fn local_energy(&mut self, h: Option<&HiddenState>) -> f64 {
        self.model.single_flip_neighbors_into(&self.x, &mut self.flips);
        let off: f64 = self.flips.iter().map(|&(i, d)| self.gwf.log_ratio(&self.x, i, d, h).exp()).sum();
        self.model.classical_energy(&self.x) - self.model.gamma() * off
    }

    pub fn observe(&mut self) -> Observation {
        let classical = self.model.classical_energy(&self.x);
        match (self.gwf, self.hidden) {
            (SpinGwf::Urbm(u), Some([h0, h1])) => {
                let e0 = self.local_energy(Some(&h0));
                let e1 = self.local_energy(Some(&h1));
                Observation {
                    energy: [e0, e1],
                    derivs: [u.hidden_log_derivatives(&self.x, &h0), u.hidden_log_derivatives(&self.x, &h1)],
                }
            }
            _ => {
                let e = self.local_energy(None);
                // Boltzmann ansatz: d ln Psi_G / d beta = -E_cl
                let d = [-classical, 0.0, 0.0];
                Observation { energy: [e, e], derivs: [d, d] }
            }
        }
    }
}

/// Upper end of the Boltzmann `beta` search interval for spin models.
pub const SPIN_BETA_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub initial_beta: f64,
    /// Step size at the first iteration; it decays as `1 / (1 + t / decay)`.
    pub learning_rate: f64,
    pub decay_iterations: f64,
    pub iterations: usize,
    pub samples: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { initial_beta: 0.1, learning_rate: 0.01, decay_iterations: 50.0, iterations: 200, samples: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMethod {
    /// Golden-section search on the exact energy; needs enumeration.
    GoldenSection,
    Sgd(SgdConfig),
}

impl BetaMethod {
    /// Golden section where enumeration is possible, SGD otherwise.
    pub fn auto(model: &SpinModel) -> Self {
        if model.n() <= EXACT_ENUMERATION_LIMIT {
            BetaMethod::GoldenSection
        } else {
            BetaMethod::Sgd(SgdConfig::default())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaOptimumSpin {
    pub beta: f64,
    pub energy: f64,
    pub stderr: f64,
    /// `false` when the optimum sits on the search boundary or SGD did not
    /// settle.
    pub converged: bool,
    /// The energy showed no dependence on `beta` along the search.
    pub flat: bool,
    /// `beta` after each SGD iteration (empty for golden section).
    pub trajectory: Vec<f64>,
    /// Sampled energy at each SGD iteration.
    pub energies: Vec<f64>,
}

pub fn optimize_boltzmann_beta_spin(model: &SpinModel, method: BetaMethod, rng: &mut SimRng) -> Result<BetaOptimumSpin> {
    match method {
        BetaMethod::GoldenSection => golden_beta(model),
        BetaMethod::Sgd(config) => sgd_beta(model, &config, rng),
    }
}

fn boltzmann_energy(model: &SpinModel, beta: f64) -> f64 {
    let gwf = SpinGwf::Boltzmann(BoltzmannGwf { beta });
    variational_energy_exact(&gwf, model).expect("size checked by the caller")
}

fn golden_beta(model: &SpinModel) -> Result<BetaOptimumSpin> {
    if model.n() > EXACT_ENUMERATION_LIMIT {
        return Err(Error::invalid("golden-section search needs exact enumeration"));
    }
    let (beta, energy) = golden_section(|b| boltzmann_energy(model, b), 0.0, SPIN_BETA_MAX, 1e-8);
    let margin = 1e-4 * SPIN_BETA_MAX;
    let converged = beta > margin && beta < SPIN_BETA_MAX - margin;
    let ends = [boltzmann_energy(model, 0.0), boltzmann_energy(model, SPIN_BETA_MAX)];
    let flat = (ends[0] - energy).abs().max((ends[1] - energy).abs()) <= 1e-12 * (1.0 + energy.abs());
    Ok(BetaOptimumSpin { beta, energy, stderr: 0.0, converged, flat, trajectory: vec![], energies: vec![] })
}

fn sgd_beta(model: &SpinModel, config: &SgdConfig, rng: &mut SimRng) -> Result<BetaOptimumSpin> {
    if !(config.initial_beta >= 0.0 && config.learning_rate > 0.0) || config.iterations < 2 || config.samples < 2 {
        return Err(Error::invalid("invalid SGD configuration"));
    }
    let mut beta = config.initial_beta;
    let mut trajectory = Vec::with_capacity(config.iterations);
    let mut energies = Vec::with_capacity(config.iterations);
    let mut last_variance = 0.0;
    let mut x = SpinConfig::all_up(model.n())?;
    for t in 0..config.iterations {
        let gwf = SpinGwf::Boltzmann(BoltzmannGwf { beta });
        let mut sampler = Sampler::new(&gwf, model, 0, rng)?;
        // keep the chain position across iterations
        sampler.x = x;
        let burn = if t == 0 { burn_in_sweeps(config.samples) } else { 10 };
        sampler.burn_in(rng, burn);
        let (mut se, mut so, mut seo, mut soo) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..config.samples {
            sampler.sweep(rng);
            let obs = sampler.observe();
            let (e, o) = (obs.energy[0], obs.derivs[0][0]);
            se += e;
            so += o;
            seo += e * o;
            soo += o * o;
        }
        x = sampler.x;
        let m = config.samples as f64;
        let (me, mo) = (se / m, so / m);
        let gradient = 2.0 * (seo / m - me * mo);
        last_variance = soo / m - mo * mo;
        if !gradient.is_finite() || !me.is_finite() {
            return Err(Error::Diverged(format!("non-finite gradient at beta = {beta}")));
        }
        let rate = config.learning_rate / (1.0 + t as f64 / config.decay_iterations);
        beta = (beta - rate * gradient).clamp(0.0, SPIN_BETA_MAX);
        trajectory.push(beta);
        energies.push(me);
    }
    // average the second half of the trajectory
    let half = &trajectory[trajectory.len() / 2..];
    let mean = half.iter().sum::<f64>() / half.len() as f64;
    let spread = (half.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / half.len() as f64).sqrt();
    let tail = &energies[energies.len() / 2..];
    let energy = tail.iter().sum::<f64>() / tail.len() as f64;
    let stderr = (tail.iter().map(|e| (e - energy).powi(2)).sum::<f64>() / (tail.len() * (tail.len() - 1)) as f64).sqrt();
    let flat = last_variance <= 1e-12;
    Ok(BetaOptimumSpin {
        beta: mean,
        energy,
        stderr,
        converged: !flat && spread <= 0.05 * mean.max(1e-12),
        flat,
        trajectory,
        energies,
    })
}

/// Stochastic-reconfiguration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrConfig {
    pub learning_rate: f64,
    pub initial_lambda: f64,
    pub iterations: usize,
    pub samples: usize,
    pub hidden_sweeps: usize,
    /// Relative change of the windowed energy that counts as converged.
    pub tolerance: f64,
    pub window: usize,
    /// Coupling magnitude treated as divergence.
    pub max_coupling: f64,
    /// Largest allowed step norm; longer steps raise the regulariser.
    pub max_step: f64,
}

impl Default for SrConfig {
    fn default() -> Self {
        SrConfig {
            learning_rate: 0.05,
            initial_lambda: 1e-3,
            iterations: 200,
            samples: 5000,
            hidden_sweeps: 5,
            tolerance: 1e-4,
            window: 20,
            max_coupling: 50.0,
            max_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrIteration {
    pub energy: f64,
    pub stderr: f64,
    pub params: [f64; 3],
    pub lambda: f64,
    /// Covariance matrix of the log-derivatives.
    pub s_matrix: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrResult {
    pub urbm: Urbm,
    /// Exact for `N <= 14`, sampled otherwise.
    pub energy: f64,
    pub stderr: f64,
    pub converged: bool,
    /// Number of times the regulariser had to be raised.
    pub escalations: usize,
    pub history: Vec<SrIteration>,
}

const MAX_ESCALATIONS: usize = 10;

/// Symmetric part of `m` with negative eigenvalues set to zero.
fn psd_part(m: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = (0.5 * (m + m.transpose())).symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let s = eig.eigenvectors * Matrix3::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    0.5 * (s + s.transpose())
}
const CONDITION_LIMIT: f64 = 1e10;

/// Solves `(S + lambda I) d = -eta f`, raising `lambda` tenfold while the
/// system is singular, badly conditioned or the step is longer than
/// `max_step`. Returns the step, the `lambda` used and the number of
/// escalations.
fn sr_solve(
    s: &Matrix3<f64>,
    f: &Vector3<f64>,
    eta: f64,
    lambda: f64,
    max_step: f64,
) -> Result<(Vector3<f64>, f64, usize)> {
    let mut lambda = lambda;
    for escalation in 0..=MAX_ESCALATIONS {
        let a = s + Matrix3::identity() * lambda;
        let eig = a.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo > 0.0 && hi / lo < CONDITION_LIMIT {
            if let Some(chol) = a.cholesky() {
                let step = chol.solve(&(-eta * f));
                if step.iter().all(|v| v.is_finite()) && step.norm() <= max_step {
                    return Ok((step, lambda, escalation));
                }
            }
        }
        lambda *= 10.0;
    }
    Err(Error::Diverged("stochastic reconfiguration matrix stayed singular".into()))
}

/// Optimises the three uRBM couplings by stochastic reconfiguration.
///
/// Each visible sample carries two independent hidden replicas `h, h'`.
/// Both `S` and the force are built from cross products between replicas,
/// `O(h) O(h')` and `E_L(h) O(h')`, so hidden-layer noise does not bias
/// them; `S` is then projected onto the positive semidefinite cone.
pub fn optimize_urbm(initial: Urbm, model: &SpinModel, config: &SrConfig, rng: &mut SimRng) -> Result<SrResult> {
    if config.samples < 2 || config.iterations == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid("invalid stochastic-reconfiguration configuration"));
    }
    let mut urbm = initial;
    let mut history = Vec::with_capacity(config.iterations);
    let mut escalations = 0;
    let mut x = SpinConfig::all_up(model.n())?;
    let mut hidden: Option<[HiddenState; 2]> = None;
    let mut converged = false;
    for t in 0..config.iterations {
        let gwf = SpinGwf::Urbm(urbm);
        let mut sampler = Sampler::new(&gwf, model, config.hidden_sweeps, rng)?;
        sampler.x = x;
        if let Some(h) = hidden {
            sampler.hidden = Some(h);
        }
        sampler.burn_in(rng, if t == 0 { burn_in_sweeps(config.samples) } else { 10 });

        let m = config.samples as f64;
        let mut mean_e = 0.0;
        let mut mean_e2 = 0.0;
        let mut mean_o = Vector3::zeros();
        let mut mean_oo = Matrix3::zeros();
        let mut mean_eo = Vector3::zeros();
        for _ in 0..config.samples {
            sampler.sweep(rng);
            let obs = sampler.observe();
            let o0 = Vector3::from(obs.derivs[0]);
            let o1 = Vector3::from(obs.derivs[1]);
            let o = 0.5 * (o0 + o1);
            let e = 0.5 * (obs.energy[0] + obs.energy[1]);
            mean_e += e / m;
            mean_e2 += e * e / m;
            mean_o += o / m;
            mean_oo += 0.5 * (o0 * o1.transpose() + o1 * o0.transpose()) / m;
            mean_eo += 0.5 * (obs.energy[0] * o1 + obs.energy[1] * o0) / m;
        }
        x = sampler.x;
        hidden = sampler.hidden;

        if !mean_e.is_finite() {
            return Err(Error::Diverged(format!("non-finite energy at iteration {t}")));
        }
        let s = psd_part(&(mean_oo - mean_o * mean_o.transpose()));
        let f = mean_eo - mean_e * mean_o;
        let (step, lambda, esc) = sr_solve(&s, &f, config.learning_rate, config.initial_lambda, config.max_step)?;
        escalations += esc;
        let k = Vector3::from(urbm.params()) + step;
        if k.iter().any(|v| !(v.abs() <= config.max_coupling)) {
            return Err(Error::Diverged(format!("couplings left the allowed range at iteration {t}")));
        }
        let stderr = ((mean_e2 - mean_e * mean_e).max(0.0) / m).sqrt();
        let mut s_matrix = [[0.0; 3]; 3];
        for (a, row) in s_matrix.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = s[(a, b)];
            }
        }
        history.push(SrIteration { energy: mean_e, stderr, params: urbm.params(), lambda, s_matrix });
        urbm = urbm.with_params([k[0], k[1], k[2]])?;

        let w = config.window;
        if history.len() >= 2 * w {
            let recent: f64 = history[history.len() - w..].iter().map(|h| h.energy).sum::<f64>() / w as f64;
            let before: f64 =
                history[history.len() - 2 * w..history.len() - w].iter().map(|h| h.energy).sum::<f64>() / w as f64;
            if ((recent - before) / before).abs() < config.tolerance {
                converged = true;
                break;
            }
        }
    }
    let gwf = SpinGwf::Urbm(urbm);
    let (energy, stderr) = if model.n() <= EXACT_ENUMERATION_LIMIT {
        (variational_energy_exact(&gwf, model)?, 0.0)
    } else {
        let est = variational_energy_sampled(&gwf, model, 10 * config.samples, config.hidden_sweeps, f64::INFINITY, rng)?;
        (est.energy, est.stderr)
    };
    Ok(SrResult { urbm, energy, stderr, converged, escalations, history })
}
