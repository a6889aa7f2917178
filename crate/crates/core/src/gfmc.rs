//! Discrete-time Green-function Monte Carlo for the spin models.
//!
//! From configuration `x` a walker stays with weight `1 - tau (E_cl(x) - E_T)`
//! or flips spin `i` with weight `tau Gamma Psi_G(x^i) / Psi_G(x)`. It moves
//! with probabilities proportional to these entries and carries their sum,
//! `w = 1 - tau (E_L(x) - E_T)`, as its weight into branching.
//!
//! With a uRBM guide every walker also carries a hidden configuration; the
//! importance ratios use `phi(x, h)` at the walker's current `h`, which is
//! refreshed by Metropolis sweeps after each move.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gwf::{HiddenState, SpinGwf};
use crate::population::{branch_into, EnergyTracker, PopulationControl, SimRng, Walker};
use crate::spin::{SpinConfig, SpinModel};

pub const DEFAULT_TIME_STEP: f64 = 0.05;
pub const DEFAULT_CROSSING_FRACTION: f64 = 0.10;
pub const DEFAULT_HIDDEN_SWEEPS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GfmcConfig {
    pub time_step: f64,
    pub target_walkers: usize,
    /// Fraction `p` of walkers with negative magnetisation that ends a run.
    pub crossing_fraction: f64,
    /// Hidden Metropolis sweeps after each move (uRBM only).
    pub hidden_sweeps: usize,
    /// Imaginary-time cap; runs reaching it are censored.
    pub max_time: f64,
    pub gain: f64,
    pub energy_decay_steps: f64,
}

impl GfmcConfig {
    pub fn new(time_step: f64, target_walkers: usize, max_time: f64) -> Self {
        GfmcConfig {
            time_step,
            target_walkers,
            crossing_fraction: DEFAULT_CROSSING_FRACTION,
            hidden_sweeps: DEFAULT_HIDDEN_SWEEPS,
            max_time,
            gain: PopulationControl::DEFAULT_GAIN,
            energy_decay_steps: EnergyTracker::DEFAULT_DECAY_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_step > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        if self.target_walkers == 0 {
            return Err(Error::invalid("target walker count must be positive"));
        }
        if !(self.crossing_fraction > 0.0 && self.crossing_fraction < 1.0) {
            return Err(Error::invalid("crossing fraction must lie in (0, 1)"));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::invalid("max time must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinWalker {
    pub visible: SpinConfig,
    /// Present only with a uRBM guide.
    pub hidden: Option<HiddenState>,
}

/// `E_L(x) = E_cl(x) - Gamma sum_i Psi_G(x^i) / Psi_G(x)`; the uRBM ratios
/// use `phi` at `h` when given and the exact trace otherwise.
pub fn local_energy_spin(gwf: &SpinGwf, model: &SpinModel, x: &SpinConfig, h: Option<&HiddenState>) -> f64 {
    let off: f64 = model
        .single_flip_neighbors(x)
        .into_iter()
        .map(|(i, d)| gwf.log_ratio(x, i, d, h).exp())
        .sum();
    model.classical_energy(x) - model.gamma() * off
}

/// Fills `entries` with the `N + 1` Green-function entries out of `x`
/// (stay first, then one per flipped site) and returns their sum.
pub fn green_function_entries(
    gwf: &SpinGwf,
    model: &SpinModel,
    x: &SpinConfig,
    h: Option<&HiddenState>,
    time_step: f64,
    reference_energy: f64,
    entries: &mut Vec<f64>,
    flips: &mut Vec<(usize, f64)>,
) -> Result<f64> {
    entries.clear();
    let stay = 1.0 - time_step * (model.classical_energy(x) - reference_energy);
    if !(stay >= 0.0) {
        return Err(Error::NegativeGreenFunction { state: x.bits(), entry: stay });
    }
    entries.push(stay);
    let hop = time_step * model.gamma();
    model.single_flip_neighbors_into(x, flips);
    let mut total = stay;
    for &(i, d) in flips.iter() {
        let g = hop * gwf.log_ratio(x, i, d, h).exp();
        entries.push(g);
        total += g;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub size: usize,
    /// Mean local energy of the walkers before the move.
    pub mean_local_energy: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    pub reference_energy: f64,
}

#[derive(Debug, Clone)]
pub struct GfmcRun<'a> {
    model: &'a SpinModel,
    gwf: &'a SpinGwf,
    pub control: PopulationControl,
    tracker: EnergyTracker,
    decay_steps: f64,
    hidden_sweeps: usize,
    walkers: Vec<Walker<SpinWalker>>,
    scratch: Vec<Walker<SpinWalker>>,
    entries: Vec<f64>,
    flips: Vec<(usize, f64)>,
    steps: u64,
}

impl<'a> GfmcRun<'a> {
    /// All walkers start at `start`. Hidden layers start random and are
    /// equilibrated at `start`; `E_T` starts at the local energy there.
    pub fn new(
        model: &'a SpinModel,
        gwf: &'a SpinGwf,
        config: &GfmcConfig,
        start: SpinConfig,
        rng: &mut SimRng,
    ) -> Result<Self> {
        config.validate()?;
        gwf.validate_for(model)?;
        if start.len() != model.n() {
            return Err(Error::invalid("start configuration does not match the model"));
        }
        if gwf.needs_hidden() && config.hidden_sweeps == 0 {
            return Err(Error::invalid("the uRBM guide needs at least one hidden sweep per step"));
        }
        let mut walkers = Vec::with_capacity(config.target_walkers);
        let mut e_sum = 0.0;
        for _ in 0..config.target_walkers {
            let hidden = match gwf {
                SpinGwf::Urbm(u) => {
                    let mut h = HiddenState::random(model.n(), rng)?;
                    u.hidden_metropolis_sweep(&start, &mut h, rng, 10 * config.hidden_sweeps);
                    Some(h)
                }
                _ => None,
            };
            e_sum += local_energy_spin(gwf, model, &start, hidden.as_ref());
            walkers.push(Walker::new(SpinWalker { visible: start, hidden }));
        }
        let e_start = e_sum / walkers.len() as f64;
        let control =
            PopulationControl::new(config.target_walkers, config.time_step, e_start)?.with_gain(config.gain);
        Ok(GfmcRun {
            model,
            gwf,
            control,
            tracker: EnergyTracker::with_decay(e_start, config.energy_decay_steps),
            decay_steps: config.energy_decay_steps,
            hidden_sweeps: config.hidden_sweeps,
            scratch: Vec::with_capacity(walkers.len()),
            walkers,
            entries: Vec::with_capacity(model.n() + 1),
            flips: Vec::with_capacity(model.n()),
            steps: 0,
        })
    }

    pub fn set_reference_energy(&mut self, energy: f64) {
        self.control.reference_energy = energy;
        self.tracker = EnergyTracker::with_decay(energy, self.decay_steps);
    }

    pub fn walkers(&self) -> impl Iterator<Item = &SpinWalker> + '_ {
        self.walkers.iter().map(|w| &w.state)
    }

    pub fn size(&self) -> usize {
        self.walkers.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn elapsed_time(&self) -> f64 {
        self.steps as f64 * self.control.time_step
    }

    pub fn energy_estimate(&self) -> f64 {
        self.tracker.estimate()
    }

    pub fn step(&mut self, rng: &mut SimRng) -> Result<StepReport> {
        self.step_with(rng, true)
    }

    /// One step; with `feedback = false` `E_T` stays fixed.
    pub fn step_with(&mut self, rng: &mut SimRng, feedback: bool) -> Result<StepReport> {
        let tau = self.control.time_step;
        let e_t = self.control.reference_energy;
        let mut e_sum = 0.0;
        let mut min_weight = f64::INFINITY;
        let mut max_weight = 0.0f64;
        for walker in self.walkers.iter_mut() {
            let state = &mut walker.state;
            let w = green_function_entries(
                self.gwf,
                self.model,
                &state.visible,
                state.hidden.as_ref(),
                tau,
                e_t,
                &mut self.entries,
                &mut self.flips,
            )?;
            e_sum += e_t + (1.0 - w) / tau;
            min_weight = min_weight.min(w);
            max_weight = max_weight.max(w);
            if w > 0.0 {
                let mut u = rng.random::<f64>() * w;
                let mut choice = 0;
                for (k, &g) in self.entries.iter().enumerate() {
                    if u < g {
                        choice = k;
                        break;
                    }
                    u -= g;
                    // round-off can leave u just above the last entry
                    choice = k;
                }
                if choice > 0 {
                    state.visible.flip(choice - 1);
                }
            }
            if let (SpinGwf::Urbm(u), Some(h)) = (self.gwf, state.hidden.as_mut()) {
                u.hidden_metropolis_sweep(&state.visible, h, rng, self.hidden_sweeps);
            }
            walker.weight = w;
        }
        let mean = e_sum / self.walkers.len() as f64;
        branch_into(&self.walkers, &mut self.scratch, rng)?;
        std::mem::swap(&mut self.walkers, &mut self.scratch);
        self.steps += 1;
        if feedback {
            let best = self.tracker.push(mean);
            self.control.update(self.walkers.len(), best)?;
        }
        self.control.check_size(self.walkers.len())?;
        Ok(StepReport {
            size: self.walkers.len(),
            mean_local_energy: mean,
            min_weight,
            max_weight,
            reference_energy: self.control.reference_energy,
        })
    }

    /// Fraction of walkers with negative magnetisation.
    pub fn fraction_negative(&self) -> f64 {
        let count = self.walkers.iter().filter(|w| w.state.visible.magnetization() < 0).count();
        count as f64 / self.walkers.len() as f64
    }
}

/// One tunneling-time sample: all walkers start fully magnetised up and the
/// imaginary time at which a fraction `p` first has `M < 0` is returned.
/// `Ok(None)` means the time cap was reached first.
pub fn measure_tunneling_time_spin(
    config: &GfmcConfig,
    gwf: &SpinGwf,
    model: &SpinModel,
    rng: &mut SimRng,
) -> Result<Option<f64>> {
    if let SpinModel::IsingChain { j, gamma, .. } = *model {
        if gamma >= j {
            return Err(Error::invalid("the chain is not ferromagnetic for Gamma >= J"));
        }
    }
    let start = SpinConfig::all_up(model.n())?;
    let mut run = GfmcRun::new(model, gwf, config, start, rng)?;
    let max_steps = (config.max_time / config.time_step).ceil() as u64;
    while run.steps() < max_steps {
        run.step(rng)?;
        if run.fraction_negative() >= config.crossing_fraction {
            return Ok(Some(run.elapsed_time()));
        }
    }
    Ok(None)
}
