//! Walker populations shared by the continuum and spin simulators.
//!
//! A population is a plain `Vec<Walker<S>>`. Each step the simulator assigns a
//! multiplicative weight to every walker and then calls [`branch`], which turns
//! weights into copy counts `floor(w + r)` with `r` uniform in `[0, 1)`. The
//! reference energy is steered with [`PopulationControl`] so that the size stays
//! close to the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The random stream type used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

/// One independent, explicitly seeded stream per repetition.
///
/// Streams with the same `master_seed` but different `repetition` indices are
/// statistically independent (distinct ChaCha stream ids).
pub fn repetition_rng(master_seed: u64, repetition: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(repetition);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walker<S> {
    pub state: S,
    pub weight: f64,
}

impl<S> Walker<S> {
    pub fn new(state: S) -> Self {
        Walker { state, weight: 1.0 }
    }
}

/// `floor(weight + r)`.
#[inline]
pub fn copy_count(weight: f64, r: f64) -> usize {
    (weight + r).floor() as usize
}

/// Replaces every walker by `floor(w_i + r_i)` unit-weight copies.
pub fn branch<S: Clone, R: Rng + ?Sized>(
    population: &[Walker<S>],
    rng: &mut R,
) -> Result<Vec<Walker<S>>> {
    let mut out = Vec::with_capacity(population.len());
    branch_into(population, &mut out, rng)?;
    Ok(out)
}

/// Buffer-reusing variant of [`branch`]. `out` is cleared first.
pub fn branch_into<S: Clone, R: Rng + ?Sized>(
    population: &[Walker<S>],
    out: &mut Vec<Walker<S>>,
    rng: &mut R,
) -> Result<()> {
    out.clear();
    for walker in population {
        let w = walker.weight;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::invalid(format!("walker weight {w} is not a finite nonnegative number")));
        }
        let r: f64 = rng.random();
        for _ in 0..copy_count(w, r) {
            out.push(Walker { state: walker.state.clone(), weight: 1.0 });
        }
    }
    if out.is_empty() {
        return Err(Error::Extinction);
    }
    Ok(())
}

/// Reference-energy feedback.
///
/// `gain` is the fraction of the log size deviation corrected per step.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationControl {
    pub target_size: usize,
    pub reference_energy: f64,
    pub gain: f64,
    pub time_step: f64,
}

impl PopulationControl {
    pub const DEFAULT_GAIN: f64 = 0.1;

    pub fn new(target_size: usize, time_step: f64, reference_energy: f64) -> Result<Self> {
        if target_size == 0 {
            return Err(Error::invalid("target population size must be at least 1"));
        }
        if !(time_step > 0.0 && time_step.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {time_step}")));
        }
        Ok(PopulationControl {
            target_size,
            reference_energy,
            gain: Self::DEFAULT_GAIN,
            time_step,
        })
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    /// Applies [`update_reference_energy`] and stores the result.
    pub fn update(&mut self, current_size: usize, best_energy: f64) -> Result<f64> {
        self.reference_energy = update_reference_energy(self, current_size, best_energy)?;
        Ok(self.reference_energy)
    }

    /// Extinction/explosion guard: the size must stay in `[target/10, 10*target]`.
    pub fn check_size(&self, size: usize) -> Result<()> {
        let lower = self.target_size.div_ceil(10);
        let upper = self.target_size.saturating_mul(10);
        if size == 0 {
            return Err(Error::Extinction);
        }
        if size < lower || size > upper {
            return Err(Error::PopulationOutOfBounds { size, target: self.target_size });
        }
        Ok(())
    }
}

/// `E_T' = best + (gain / tau) * ln(target / current)`.
pub fn update_reference_energy(
    ctrl: &PopulationControl,
    current_size: usize,
    best_energy_estimate: f64,
) -> Result<f64> {
    if current_size == 0 {
        return Err(Error::invalid("current population size must be at least 1"));
    }
    let log_ratio = (ctrl.target_size as f64 / current_size as f64).ln();
    Ok(best_energy_estimate + ctrl.gain / ctrl.time_step * log_ratio)
}

/// Exponentially weighted running estimate of the ground-state energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTracker {
    estimate: f64,
    decay_steps: f64,
}

impl EnergyTracker {
    pub const DEFAULT_DECAY_STEPS: f64 = 100.0;

    pub fn new(initial: f64) -> Self {
        Self::with_decay(initial, Self::DEFAULT_DECAY_STEPS)
    }

    pub fn with_decay(initial: f64, decay_steps: f64) -> Self {
        EnergyTracker { estimate: initial, decay_steps: decay_steps.max(1.0) }
    }

    pub fn push(&mut self, population_mean: f64) -> f64 {
        self.estimate += (population_mean - self.estimate) / self.decay_steps;
        self.estimate
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }
}

/// Mean and standard error of a set of repetition results.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation divided by `sqrt(count)`.
    pub stderr: f64,
}

pub fn summarize(samples: &[f64]) -> Result<RunStatistics> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // keep the mean inside the sample range despite rounding
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RunStatistics {
        samples: samples.to_vec(),
        mean: mean.clamp(lo, hi),
        stderr: (var / n).sqrt(),
    })
}

/// Mean and blocking-analysis standard error of a correlated time series.
pub fn blocked_mean(series: &[f64], blocks: usize) -> Result<(f64, f64)> {
    if blocks < 2 || series.len() < blocks {
        return Err(Error::invalid(format!(
            "cannot split {} values into {blocks} blocks",
            series.len()
        )));
    }
    let len = series.len() / blocks;
    let means: Vec<f64> = series
        .chunks_exact(len)
        .take(blocks)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let stats = summarize(&means)?;
    Ok((stats.mean, stats.stderr))
}

/// Result of one tunneling-time repetition.
#[derive(Debug, Clone, PartialEq)]
pub enum RepetitionOutcome {
    /// Imaginary time at which the crossing criterion was first met.
    Crossed(f64),
    /// The time cap was reached first.
    Censored,
    /// The repetition was aborted (extinction, explosion, invalid step).
    Aborted(String),
}

impl RepetitionOutcome {
    pub fn crossing_time(&self) -> Option<f64> {
        match self {
            RepetitionOutcome::Crossed(t) => Some(*t),
            _ => None,
        }
    }
}

/// Minimum fraction of crossed repetitions for a point to enter a fit.
pub const FIT_ELIGIBLE_FRACTION: f64 = 0.95;

/// All repetitions of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct TunnelingRunResult {
    pub outcomes: Vec<RepetitionOutcome>,
    /// Statistics over the crossed repetitions; `None` if fewer than two crossed.
    pub statistics: Option<RunStatistics>,
}

impl TunnelingRunResult {
    pub fn from_outcomes(outcomes: Vec<RepetitionOutcome>) -> Self {
        let times: Vec<f64> = outcomes.iter().filter_map(RepetitionOutcome::crossing_time).collect();
        let statistics = summarize(&times).ok();
        TunnelingRunResult { outcomes, statistics }
    }

    /// Repetitions without a crossing time (censored or aborted).
    pub fn censored_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.crossing_time().is_none()).count()
    }

    pub fn aborted_count(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, RepetitionOutcome::Aborted(_))).count()
    }

    pub fn crossed_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        1.0 - self.censored_count() as f64 / self.outcomes.len() as f64
    }

    pub fn fit_eligible(&self) -> bool {
        self.statistics.is_some() && self.crossed_fraction() >= FIT_ELIGIBLE_FRACTION
    }
}

/// Runs `repetitions` independent repetitions, each with its own stream from
/// [`repetition_rng`], in parallel; results are returned in repetition order.
///
/// The closure returns `Ok(Some(t))` for a crossing, `Ok(None)` when censored.
pub fn run_repetitions<F>(repetitions: usize, master_seed: u64, measure: F) -> TunnelingRunResult
where
    F: Fn(&mut SimRng) -> Result<Option<f64>> + Sync,
{
    use rayon::prelude::*;
    let outcomes: Vec<RepetitionOutcome> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = repetition_rng(master_seed, rep as u64);
            match measure(&mut rng) {
                Ok(Some(t)) => RepetitionOutcome::Crossed(t),
                Ok(None) => RepetitionOutcome::Censored,
                Err(e) => RepetitionOutcome::Aborted(e.to_string()),
            }
        })
        .collect();
    TunnelingRunResult::from_outcomes(outcomes)
}
