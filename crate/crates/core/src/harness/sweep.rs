//! Runs a tunneling or gap sweep point by point.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::dmc::{measure_tunneling_time, optimize_boltzmann_beta, DmcConfig, GuidingWf1d};
use crate::error::{Error, Result};
use crate::exact::exact_diag;
use crate::gfmc::{measure_tunneling_time_spin, GfmcConfig};
use crate::gwf::{optimize_boltzmann_beta_spin, optimize_urbm, BetaMethod, BoltzmannGwf, SpinGwf, SrConfig, Urbm};
use crate::population::{repetition_rng, run_repetitions, TunnelingRunResult};
use crate::potential::PotentialSpec;
use crate::spectral::{solve_lowest_two, Grid1D};
use crate::spin::SpinModel;

use super::config::{ExperimentConfig, ExperimentKind, GwfChoice, Protocol, System};
use super::fit::{fit_sampled, FitWindow, PowerLawFit, SampledPoint};
use super::table::{DmcRow, GapRow, ResultTable, SampleRow, SpinRow};

/// Largest spin count for which an exact guiding wave function is tabulated.
pub const MAX_TABULATED_SPINS: usize = 20;

/// Seed of sweep point `index`; point 0 uses the master seed itself.
pub fn point_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Everything measured at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub system: System,
    pub gap: Option<f64>,
    /// Time step actually used (GFMC may halve the configured one).
    pub time_step: f64,
    /// Parameters of the guiding wave function used, `key=value;...`.
    pub gwf_params: String,
    pub run: Option<TunnelingRunResult>,
    /// Why the point produced no usable data, if it did not.
    pub error: Option<String>,
}

impl PointResult {
    fn failed(system: System, time_step: f64, gap: Option<f64>, error: Error) -> Self {
        PointResult { system, gap, time_step, gwf_params: String::new(), run: None, error: Some(error.to_string()) }
    }

    /// Eligible for a fit: gap known and at least 95% of repetitions crossed.
    pub fn sampled_point(&self) -> Option<SampledPoint> {
        let run = self.run.as_ref()?;
        if !run.fit_eligible() {
            return None;
        }
        Some(SampledPoint { gap: self.gap?, samples: run.statistics.as_ref()?.samples.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub points: Vec<PointResult>,
    pub table: ResultTable,
}

impl SweepResult {
    pub fn samples(&self) -> Vec<SampleRow> {
        self.points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.run.as_ref().map(|r| SampleRow::from_run(i, r)))
            .flatten()
            .collect()
    }

    pub fn sampled_points(&self) -> Vec<SampledPoint> {
        self.points.iter().filter_map(PointResult::sampled_point).collect()
    }

    /// Power-law fit over the fit-eligible points.
    pub fn fit(&self, window: FitWindow, resamples: usize, seed: u64) -> Result<PowerLawFit> {
        fit_sampled(&self.sampled_points(), window, resamples, seed)
    }
}

/// Runs every point of `config`. Failures at one point are recorded in its
/// row (`xiMean = NaN`, all repetitions censored) and the sweep continues.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let systems = config.points()?;
    let mut points = Vec::with_capacity(systems.len());
    for (index, system) in systems.into_iter().enumerate() {
        let seed = point_seed(config.seed, index);
        let point = match (config.kind, system) {
            (ExperimentKind::DmcTunnel, System::Potential(spec)) => dmc_point(spec, config.gwf, &config.protocol, seed),
            (ExperimentKind::GfmcTunnel, System::Spin(model)) => gfmc_point(model, config.gwf, &config.protocol, seed),
            (ExperimentKind::Gap, system) => {
                let gap = system.gap();
                match gap {
                    Ok(g) => PointResult {
                        system,
                        gap: Some(g),
                        time_step: 0.0,
                        gwf_params: String::new(),
                        run: None,
                        error: None,
                    },
                    Err(e) => PointResult::failed(system, 0.0, None, e),
                }
            }
            (kind, _) => {
                return Err(Error::invalid(format!("`{}` is not a sweep experiment for this system", kind.as_str())))
            }
        };
        points.push(point);
    }
    let table = build_table(config, &points);
    Ok(SweepResult { kind: config.kind, points, table })
}

fn row_stats(run: Option<&TunnelingRunResult>, reps: usize) -> (f64, f64, usize) {
    match run {
        Some(r) => match &r.statistics {
            Some(s) => (s.mean, s.stderr, r.censored_count()),
            None => (f64::NAN, f64::NAN, r.censored_count()),
        },
        None => (f64::NAN, f64::NAN, reps),
    }
}

fn build_table(config: &ExperimentConfig, points: &[PointResult]) -> ResultTable {
    let p = &config.protocol;
    let mode = config.gwf.mode_name().to_string();
    match config.kind {
        ExperimentKind::DmcTunnel => ResultTable::Dmc(
            points
                .iter()
                .map(|pt| {
                    let System::Potential(spec) = pt.system else { unreachable!("dmc point without potential") };
                    let (xi_mean, xi_stderr, censored_count) = row_stats(pt.run.as_ref(), p.repetitions);
                    DmcRow {
                        g: spec.g,
                        x0: spec.x0,
                        gwf_mode: mode.clone(),
                        tau: pt.time_step,
                        nw: p.walkers,
                        p: p.crossing_fraction,
                        xth: p.threshold_fraction * spec.right_minimum(),
                        reps: p.repetitions,
                        xi_mean,
                        xi_stderr,
                        censored_count,
                    }
                })
                .collect(),
        ),
        ExperimentKind::GfmcTunnel => ResultTable::Spin(
            points
                .iter()
                .map(|pt| {
                    let (xi_mean, xi_stderr, censored_count) = row_stats(pt.run.as_ref(), p.repetitions);
                    SpinRow {
                        model: pt.system.name().to_string(),
                        params: pt.system.params_string(),
                        gwf_mode: mode.clone(),
                        tau: pt.time_step,
                        nw: p.walkers,
                        p: p.crossing_fraction,
                        reps: p.repetitions,
                        xi_mean,
                        xi_stderr,
                        censored_count,
                    }
                })
                .collect(),
        ),
        _ => ResultTable::Gap(
            points
                .iter()
                .map(|pt| GapRow {
                    model: pt.system.name().to_string(),
                    params: pt.system.params_string(),
                    gap: pt.gap.unwrap_or(f64::NAN),
                })
                .collect(),
        ),
    }
}

/// Guiding wave function for a double well, with its parameter string.
pub fn build_gwf_1d(spec: &PotentialSpec, choice: GwfChoice) -> Result<(GuidingWf1d, String, f64)> {
    let grid = Grid1D::for_potential(spec);
    let spectrum = solve_lowest_two(spec, &grid)?;
    let gwf = match choice {
        GwfChoice::None => GuidingWf1d::None,
        GwfChoice::Boltzmann(Some(beta)) => GuidingWf1d::boltzmann(beta)?,
        GwfChoice::Boltzmann(None) => {
            let opt = optimize_boltzmann_beta(spec, &grid);
            if !opt.converged {
                return Err(Error::invalid(format!("Boltzmann optimisation hit the search boundary at beta = {}", opt.beta)));
            }
            GuidingWf1d::boltzmann(opt.beta)?
        }
        GwfChoice::Exact => GuidingWf1d::exact(&spectrum),
        GwfChoice::Urbm(_) => return Err(Error::invalid("the uRBM ansatz applies to spin models only")),
    };
    let params = match &gwf {
        GuidingWf1d::Boltzmann { beta } => format!("beta={beta}"),
        _ => String::new(),
    };
    Ok((gwf, params, spectrum.gap))
}

fn dmc_point(spec: PotentialSpec, choice: GwfChoice, protocol: &Protocol, seed: u64) -> PointResult {
    let system = System::Potential(spec);
    let (gwf, gwf_params, gap) = match build_gwf_1d(&spec, choice) {
        Ok(v) => v,
        Err(e) => return PointResult::failed(system, protocol.time_step, None, e),
    };
    let config = DmcConfig {
        crossing_fraction: protocol.crossing_fraction,
        threshold: protocol.threshold_fraction * spec.right_minimum(),
        ..DmcConfig::with_defaults(&spec, protocol.time_step, protocol.walkers, protocol.max_time)
    };
    let run = run_repetitions(protocol.repetitions, seed, |rng| measure_tunneling_time(&config, &gwf, &spec, rng));
    PointResult { system, gap: Some(gap), time_step: protocol.time_step, gwf_params, run: Some(run), error: None }
}

/// Guiding wave function for a spin model. Missing Boltzmann or uRBM
/// parameters are optimised with a stream derived from `seed`.
pub fn build_gwf_spin(model: &SpinModel, choice: GwfChoice, seed: u64) -> Result<SpinGwf> {
    let mut rng = repetition_rng(seed, u64::MAX);
    let gwf = match choice {
        GwfChoice::None => SpinGwf::None,
        GwfChoice::Boltzmann(Some(beta)) => SpinGwf::Boltzmann(BoltzmannGwf::new(beta)?),
        GwfChoice::Boltzmann(None) => {
            let opt = optimize_boltzmann_beta_spin(model, BetaMethod::auto(model), &mut rng)?;
            SpinGwf::Boltzmann(BoltzmannGwf::new(opt.beta)?)
        }
        GwfChoice::Exact => {
            if model.n() > MAX_TABULATED_SPINS {
                return Err(Error::invalid(format!(
                    "exact guiding wave functions are tabulated up to {MAX_TABULATED_SPINS} spins"
                )));
            }
            SpinGwf::tabulated(exact_diag(model)?.log_amplitudes(), model.n())?
        }
        GwfChoice::Urbm(Some([k1, k2, k3])) => SpinGwf::Urbm(Urbm::new(model.n(), k1, k2, k3)?),
        GwfChoice::Urbm(None) => {
            let start = Urbm::new(model.n(), 0.0, 0.0, 0.0)?;
            SpinGwf::Urbm(optimize_urbm(start, model, &SrConfig::default(), &mut rng)?.urbm)
        }
    };
    gwf.validate_for(model)?;
    Ok(gwf)
}

fn gfmc_point(model: SpinModel, choice: GwfChoice, protocol: &Protocol, seed: u64) -> PointResult {
    let system = System::Spin(model);
    let gap = match system.gap() {
        Ok(g) => g,
        Err(e) => return PointResult::failed(system, protocol.time_step, None, e),
    };
    let gwf = match build_gwf_spin(&model, choice, seed) {
        Ok(g) => g,
        Err(e) => return PointResult::failed(system, protocol.time_step, Some(gap), e),
    };
    let mut config = GfmcConfig::new(protocol.time_step, protocol.walkers, protocol.max_time);
    config.crossing_fraction = protocol.crossing_fraction;
    config.hidden_sweeps = protocol.hidden_sweeps;
    let mut halvings = 0;
    loop {
        let negative = AtomicBool::new(false);
        let run = run_repetitions(protocol.repetitions, seed, |rng| {
            let r = measure_tunneling_time_spin(&config, &gwf, &model, rng);
            if matches!(r, Err(Error::NegativeGreenFunction { .. })) {
                negative.store(true, Ordering::Relaxed);
            }
            r
        });
        if negative.load(Ordering::Relaxed) && halvings < protocol.tau_halvings {
            halvings += 1;
            config.time_step *= 0.5;
            continue;
        }
        return PointResult {
            system,
            gap: Some(gap),
            time_step: config.time_step,
            gwf_params: gwf.params_string(),
            run: Some(run),
            error: None,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dmc_config(values: &str, reps: usize) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "kind = dmc-tunnel\nseed = 5\ngwf = exact\nsweep = g\nvalues = {values}\nreps = {reps}\nwalkers = 100\ntau = 0.02\n"
        ))
        .unwrap()
    }

    #[test]
    fn single_point_matches_direct_repetitions() {
        let cfg = dmc_config("5", 4);
        let sweep = run_sweep(&cfg).unwrap();
        let spec = PotentialSpec::quartic(5.0).unwrap();
        let (gwf, _, _) = build_gwf_1d(&spec, GwfChoice::Exact).unwrap();
        let dmc = DmcConfig::with_defaults(&spec, 0.02, 100, 1e5);
        let direct = run_repetitions(4, 5, |rng| measure_tunneling_time(&dmc, &gwf, &spec, rng));
        assert_eq!(sweep.points[0].run.as_ref().unwrap(), &direct);
        let ResultTable::Dmc(rows) = &sweep.table else { panic!() };
        assert_eq!(rows[0].xi_mean.to_bits(), direct.statistics.unwrap().mean.to_bits());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = dmc_config("4, 5", 3);
        let a = run_sweep(&cfg).unwrap().table.to_csv_string().unwrap();
        let b = run_sweep(&cfg).unwrap().table.to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_sweep_rows() {
        let cfg = ExperimentConfig::parse("kind = gap\nmodel = chain\nsweep = n\nvalues = 4, 6, 8\n").unwrap();
        let s = run_sweep(&cfg).unwrap();
        let ResultTable::Gap(rows) = s.table else { panic!() };
        assert_eq!(rows.len(), 3);
        assert!((rows[2].gap - 0.005885).abs() < 1e-6, "{rows:?}");
    }

    #[test]
    fn failed_point_is_recorded_and_sweep_continues() {
        // tau = 1 makes the Green function negative on the first step
        let cfg = ExperimentConfig::parse(
            "kind = gfmc-tunnel\nsweep = n\nvalues = 4, 6\nreps = 2\nwalkers = 20\ntau = 1\ntau_halvings = 0\nmax_time = 5\n",
        )
        .unwrap();
        let s = run_sweep(&cfg).unwrap();
        let ResultTable::Spin(rows) = &s.table else { panic!() };
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.xi_mean.is_nan() && r.censored_count == 2));
        assert!(s.points.iter().all(|p| p.sampled_point().is_none()));
    }

    #[test]
    fn negative_entries_halve_the_time_step() {
        let cfg = ExperimentConfig::parse(
            "kind = gfmc-tunnel\ngamma = 0.9\nn = 4\nreps = 2\nwalkers = 50\ntau = 0.8\ntau_halvings = 4\n",
        )
        .unwrap();
        let s = run_sweep(&cfg).unwrap();
        let pt = &s.points[0];
        assert!(pt.time_step < 0.8);
        assert_eq!(pt.run.as_ref().unwrap().aborted_count(), 0);
    }
}
