//! Experiment description read from a flat `key = value` file.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `kind` | `dmc-tunnel`, `gfmc-tunnel`, `gap`, `spectrum`, `optimize-gwf`, `fit` | required |
//! | `seed` | master seed | 1 |
//! | `out` | output path | none |
//! | `potential` | `quartic` or `plateau` | `quartic` |
//! | `g`, `x0` | double-well parameters | 8, 0 |
//! | `model` | `chain` or `shamrock` | `chain` |
//! | `n`, `k`, `j`, `gamma`, `epsilon` | spin-model parameters | 8, 3, 1 (chain) or 6 (shamrock), 0.6 (chain) or 0.5 (shamrock), 0.2 |
//! | `sweep` | `g`, `x0`, `n` or `k` | none (single point) |
//! | `values` | comma-separated sweep values | required with `sweep` |
//! | `gwf` | `none`, `boltzmann`, `exact`, `urbm` | `none` |
//! | `beta` | Boltzmann parameter; optimised per point when absent | |
//! | `k1`, `k2`, `k3` | uRBM couplings; optimised per point when absent | |
//! | `gwf_record` | path of a saved wave-function record, instead of `gwf` | |
//! | `tau` | time step | 0.01 (DMC), 0.05 (GFMC) |
//! | `walkers` | target population | 2000 (DMC), 5000 (GFMC) |
//! | `p` | crossing fraction | 0.25 (DMC), 0.10 (GFMC) |
//! | `threshold` | DMC threshold as a fraction of `x_R` | 0.5 |
//! | `reps` | repetitions per point | 300 (DMC), 1000 (GFMC) |
//! | `max_time` | imaginary-time cap per repetition | 1e5 |
//! | `hidden_sweeps` | hidden Metropolis sweeps per GFMC step | 5 |
//! | `tau_halvings` | automatic GFMC time-step halvings on a negative entry | 4 |
//! | `input` | rows CSV to fit (`fit` only) | |
//! | `window` | number of smallest-gap points in the fit | 5 |
//! | `bootstrap` | bootstrap resamples for the exponent error | 1000 |
//! | `b_min`, `b_max` | accepted exponent range; violations fail the run | none |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exact::{exact_diag_gap, free_fermion_gap};
use crate::gwf::{GwfRecord, SpinGwf};
use crate::kv::KvMap;
use crate::potential::{PotentialKind, PotentialSpec};
use crate::spectral::{solve_lowest_two, Grid1D};
use crate::spin::SpinModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DmcTunnel,
    GfmcTunnel,
    Gap,
    Spectrum,
    OptimizeGwf,
    Fit,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::DmcTunnel => "dmc-tunnel",
            ExperimentKind::GfmcTunnel => "gfmc-tunnel",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::OptimizeGwf => "optimize-gwf",
            ExperimentKind::Fit => "fit",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dmc-tunnel" => ExperimentKind::DmcTunnel,
            "gfmc-tunnel" => ExperimentKind::GfmcTunnel,
            "gap" => ExperimentKind::Gap,
            "spectrum" => ExperimentKind::Spectrum,
            "optimize-gwf" => ExperimentKind::OptimizeGwf,
            "fit" => ExperimentKind::Fit,
            other => return Err(Error::invalid(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// The physical system at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    Potential(PotentialSpec),
    Spin(SpinModel),
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Potential(p) => match p.kind {
                PotentialKind::Quartic => "quartic",
                PotentialKind::Plateau => "plateau",
            },
            System::Spin(m) => m.name(),
        }
    }

    pub fn params_string(&self) -> String {
        match self {
            System::Potential(p) => format!("g={};x0={}", p.g, p.x0),
            System::Spin(m) => m.params_string(),
        }
    }

    /// Rebuilds a system from the `name` and `params` columns of a row.
    pub fn from_name_params(name: &str, params: &str) -> Result<Self> {
        let mut kv = KvMap::parse(&params.replace(';', "\n"))?;
        let system = match name {
            "quartic" => {
                let g = kv.take_required("g")?;
                kv.take::<f64>("x0")?;
                System::Potential(PotentialSpec::quartic(g)?)
            }
            "plateau" => System::Potential(PotentialSpec::plateau(kv.take_required("g")?, kv.take_required("x0")?)?),
            "chain" => System::Spin(SpinModel::ising_chain(
                kv.take_required("n")?,
                kv.take_required("j")?,
                kv.take_required("gamma")?,
            )?),
            "shamrock" => System::Spin(SpinModel::shamrock(
                kv.take_required("k")?,
                kv.take_required("j")?,
                kv.take_required("epsilon")?,
                kv.take_required("gamma")?,
            )?),
            other => return Err(Error::invalid(format!("unknown system `{other}`"))),
        };
        kv.finish()?;
        Ok(system)
    }

    /// First gap from the matching oracle: grid eigensolver, free fermions
    /// for the chain, exact diagonalisation for the shamrock.
    pub fn gap(&self) -> Result<f64> {
        match self {
            System::Potential(p) => Ok(solve_lowest_two(p, &Grid1D::for_potential(p))?.gap),
            System::Spin(SpinModel::IsingChain { n, j, gamma }) => free_fermion_gap(*n, *j, *gamma),
            System::Spin(m) => Ok(exact_diag_gap(m)?.2),
        }
    }

    fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(format!("sweep value {v} is not a positive integer")))
            }
        };
        match (self, axis) {
            (System::Potential(p), SweepAxis::G) => Ok(System::Potential(PotentialSpec { g: value, ..*p }.validated()?)),
            (System::Potential(p), SweepAxis::X0) if p.kind == PotentialKind::Plateau => {
                Ok(System::Potential(PotentialSpec::plateau(p.g, value)?))
            }
            (System::Spin(SpinModel::IsingChain { j, gamma, .. }), SweepAxis::N) => {
                Ok(System::Spin(SpinModel::ising_chain(as_count(value)?, *j, *gamma)?))
            }
            (System::Spin(SpinModel::Shamrock { j, epsilon, gamma, .. }), SweepAxis::K) => {
                Ok(System::Spin(SpinModel::shamrock(as_count(value)?, *j, *epsilon, *gamma)?))
            }
            _ => Err(Error::invalid(format!("sweep axis `{}` does not apply to {}", axis.as_str(), self.name()))),
        }
    }
}

impl PotentialSpec {
    fn validated(self) -> Result<Self> {
        match self.kind {
            PotentialKind::Quartic => PotentialSpec::quartic(self.g),
            PotentialKind::Plateau => PotentialSpec::plateau(self.g, self.x0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    G,
    X0,
    N,
    K,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::G => "g",
            SweepAxis::X0 => "x0",
            SweepAxis::N => "n",
            SweepAxis::K => "k",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "g" => SweepAxis::G,
            "x0" => SweepAxis::X0,
            "n" => SweepAxis::N,
            "k" => SweepAxis::K,
            other => return Err(Error::invalid(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// Guiding wave function requested for every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GwfChoice {
    None,
    /// Optimised per point when `None`.
    Boltzmann(Option<f64>),
    /// Exact ground state: grid eigenvector or exact diagonalisation.
    Exact,
    /// `(K1, K2, K3)`; optimised per point when `None`.
    Urbm(Option<[f64; 3]>),
}

impl GwfChoice {
    pub fn mode_name(&self) -> &'static str {
        match self {
            GwfChoice::None => "none",
            GwfChoice::Boltzmann(_) => "boltzmann",
            GwfChoice::Exact => "exact",
            GwfChoice::Urbm(_) => "urbm",
        }
    }

    pub fn from_spin_gwf(gwf: &SpinGwf) -> Self {
        match gwf {
            SpinGwf::None => GwfChoice::None,
            SpinGwf::Boltzmann(b) => GwfChoice::Boltzmann(Some(b.beta)),
            SpinGwf::Urbm(u) => GwfChoice::Urbm(Some(u.params())),
            SpinGwf::Tabulated(_) => GwfChoice::Exact,
        }
    }
}

impl FromStr for GwfChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => GwfChoice::None,
            "boltzmann" => GwfChoice::Boltzmann(None),
            "exact" => GwfChoice::Exact,
            "urbm" => GwfChoice::Urbm(None),
            other => return Err(Error::invalid(format!("unknown gwf mode `{other}`"))),
        })
    }
}

/// Time step, population and crossing protocol shared by all points.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub time_step: f64,
    pub walkers: usize,
    pub crossing_fraction: f64,
    /// DMC threshold as a fraction of `x_R`.
    pub threshold_fraction: f64,
    pub repetitions: usize,
    pub max_time: f64,
    pub hidden_sweeps: usize,
    pub tau_halvings: u32,
}

impl Protocol {
    pub fn dmc_defaults() -> Self {
        Protocol {
            time_step: 0.01,
            walkers: 2000,
            crossing_fraction: 0.25,
            threshold_fraction: 0.5,
            repetitions: 300,
            max_time: 1e5,
            hidden_sweeps: 0,
            tau_halvings: 0,
        }
    }

    pub fn gfmc_defaults() -> Self {
        Protocol {
            time_step: crate::gfmc::DEFAULT_TIME_STEP,
            walkers: 5000,
            crossing_fraction: crate::gfmc::DEFAULT_CROSSING_FRACTION,
            threshold_fraction: 0.5,
            repetitions: 1000,
            max_time: 1e5,
            hidden_sweeps: crate::gfmc::DEFAULT_HIDDEN_SWEEPS,
            tau_halvings: 4,
        }
    }
}

/// Settings of the `fit` step.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub input: Option<PathBuf>,
    pub window: usize,
    pub bootstrap: usize,
    /// Accepted `[b_min, b_max]`; outside it the run reports a failure.
    pub b_range: Option<(f64, f64)>,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            input: None,
            window: super::fit::DEFAULT_FIT_WINDOW,
            bootstrap: super::fit::DEFAULT_BOOTSTRAP_RESAMPLES,
            b_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Base system; the sweep axis overrides one of its parameters.
    pub system: System,
    pub gwf: GwfChoice,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub protocol: Protocol,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub fit: FitSettings,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(KvMap::parse(text)?, None)
    }

    /// Reads a config file; a relative `gwf_record` path is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv(KvMap::parse(&text)?, path.parent())
    }

    pub fn from_kv(mut kv: KvMap, base_dir: Option<&Path>) -> Result<Self> {
        let kind: ExperimentKind = kv.take_required("kind")?;
        let seed = kv.take_or("seed", 1u64)?;
        let out = kv.take::<PathBuf>("out")?;

        let potential: Option<String> = kv.take("potential")?;
        let model: Option<String> = kv.take("model")?;
        let spin = match kind {
            ExperimentKind::GfmcTunnel | ExperimentKind::OptimizeGwf => true,
            ExperimentKind::DmcTunnel | ExperimentKind::Spectrum => false,
            _ => model.is_some() || (potential.is_none() && kv.contains("n")),
        };
        if spin && potential.is_some() {
            return Err(Error::invalid(format!("`potential` does not apply to `{}`", kind.as_str())));
        }
        if !spin && model.is_some() {
            return Err(Error::invalid(format!("`model` does not apply to `{}`", kind.as_str())));
        }
        let system = if spin {
            match model.as_deref().unwrap_or("chain") {
                "chain" => System::Spin(SpinModel::ising_chain(
                    kv.take_or("n", 8usize)?,
                    kv.take_or("j", 1.0)?,
                    kv.take_or("gamma", 0.6)?,
                )?),
                "shamrock" => System::Spin(SpinModel::shamrock(
                    kv.take_or("k", 3usize)?,
                    kv.take_or("j", 6.0)?,
                    kv.take_or("epsilon", 0.2)?,
                    kv.take_or("gamma", 0.5)?,
                )?),
                other => return Err(Error::invalid(format!("unknown model `{other}`"))),
            }
        } else {
            let g = kv.take_or("g", 8.0)?;
            match potential.as_deref().unwrap_or("quartic") {
                "quartic" => System::Potential(PotentialSpec::quartic(g)?),
                "plateau" => System::Potential(PotentialSpec::plateau(g, kv.take_or("x0", 0.0)?)?),
                other => return Err(Error::invalid(format!("unknown potential `{other}`"))),
            }
        };

        let record: Option<PathBuf> = kv.take("gwf_record")?;
        let mut gwf = kv.take_or("gwf", GwfChoice::None)?;
        if let Some(path) = record {
            if kv.contains("gwf") {
                return Err(Error::invalid("give either `gwf` or `gwf_record`, not both"));
            }
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            let rec = GwfRecord::load(&path)?;
            let System::Spin(model) = system else {
                return Err(Error::invalid("wave-function records apply to spin models only"));
            };
            if rec.model.name() != model.name() {
                return Err(Error::invalid("the record was optimised for a different model"));
            }
            gwf = GwfChoice::from_spin_gwf(&rec.gwf);
        }
        if let Some(beta) = kv.take::<f64>("beta")? {
            match gwf {
                GwfChoice::Boltzmann(_) => gwf = GwfChoice::Boltzmann(Some(beta)),
                _ => return Err(Error::invalid("`beta` needs gwf = boltzmann")),
            }
        }
        let couplings = [kv.take::<f64>("k1")?, kv.take::<f64>("k2")?, kv.take::<f64>("k3")?];
        match couplings {
            [None, None, None] => {}
            [Some(k1), Some(k2), Some(k3)] if matches!(gwf, GwfChoice::Urbm(_)) => gwf = GwfChoice::Urbm(Some([k1, k2, k3])),
            _ => return Err(Error::invalid("`k1`, `k2`, `k3` must all be given, with gwf = urbm")),
        }

        let sweep = match kv.take::<SweepAxis>("sweep")? {
            None => None,
            Some(axis) => {
                let values: Vec<f64> = kv
                    .take_list("values")?
                    .ok_or_else(|| Error::invalid("`sweep` needs `values`"))?;
                Some((axis, values))
            }
        };

        let mut protocol = if spin { Protocol::gfmc_defaults() } else { Protocol::dmc_defaults() };
        protocol.time_step = kv.take_or("tau", protocol.time_step)?;
        protocol.walkers = kv.take_or("walkers", protocol.walkers)?;
        protocol.crossing_fraction = kv.take_or("p", protocol.crossing_fraction)?;
        protocol.threshold_fraction = kv.take_or("threshold", protocol.threshold_fraction)?;
        protocol.repetitions = kv.take_or("reps", protocol.repetitions)?;
        protocol.max_time = kv.take_or("max_time", protocol.max_time)?;
        protocol.hidden_sweeps = kv.take_or("hidden_sweeps", protocol.hidden_sweeps)?;
        protocol.tau_halvings = kv.take_or("tau_halvings", protocol.tau_halvings)?;

        let mut fit = FitSettings { input: kv.take("input")?, ..FitSettings::default() };
        fit.window = kv.take_or("window", fit.window)?;
        fit.bootstrap = kv.take_or("bootstrap", fit.bootstrap)?;
        fit.b_range = match (kv.take::<f64>("b_min")?, kv.take::<f64>("b_max")?) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
        };
        kv.finish()?;

        let config = ExperimentConfig { kind, system, gwf, sweep, protocol, seed, out, fit };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((_, values)) = &self.sweep {
            if values.is_empty() {
                return Err(Error::invalid("sweep values are empty"));
            }
        }
        let p = &self.protocol;
        if p.repetitions < 2 {
            return Err(Error::invalid("at least two repetitions are needed"));
        }
        if !(p.time_step > 0.0) || p.walkers == 0 || !(p.max_time > 0.0) {
            return Err(Error::invalid("time step, walkers and max time must be positive"));
        }
        if !(p.crossing_fraction > 0.0 && p.crossing_fraction < 1.0) {
            return Err(Error::invalid("crossing fraction must lie in (0, 1)"));
        }
        if !(p.threshold_fraction >= 0.0) {
            return Err(Error::invalid("threshold fraction must be >= 0"));
        }
        if matches!(self.gwf, GwfChoice::Urbm(_)) && !matches!(self.system, System::Spin(SpinModel::IsingChain { .. })) {
            return Err(Error::invalid("the uRBM ansatz is only defined for the chain"));
        }
        if self.fit.window < super::fit::MIN_FIT_POINTS {
            return Err(Error::invalid("the fit window needs at least three points"));
        }
        self.points()?;
        Ok(())
    }

    /// Systems of the sweep in the order given; the base system alone
    /// without a sweep.
    pub fn points(&self) -> Result<Vec<System>> {
        match &self.sweep {
            None => Ok(vec![self.system]),
            Some((axis, values)) => values.iter().map(|&v| self.system.with_axis(*axis, v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dmc_sweep() {
        let text = "kind = dmc-tunnel\nseed = 7\n# comment\ngwf = boltzmann\nsweep = g\nvalues = 6, 7, 8\nreps = 10\nwalkers = 100\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.kind, ExperimentKind::DmcTunnel);
        assert_eq!(c.seed, 7);
        assert_eq!(c.gwf, GwfChoice::Boltzmann(None));
        assert_eq!(c.protocol.time_step, 0.01);
        assert_eq!(c.protocol.crossing_fraction, 0.25);
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2], System::Potential(PotentialSpec::quartic(8.0).unwrap()));
    }

    #[test]
    fn parses_spin_defaults() {
        let c = ExperimentConfig::parse("kind = gfmc-tunnel\nmodel = shamrock\nsweep = k\nvalues = 1,2\n").unwrap();
        assert_eq!(c.protocol.crossing_fraction, 0.10);
        assert_eq!(c.protocol.repetitions, 1000);
        assert_eq!(c.points().unwrap()[1], System::Spin(SpinModel::shamrock(2, 6.0, 0.2, 0.5).unwrap()));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "kind = dmc-tunnel\nreps = 1\n",
            "kind = dmc-tunnel\nsweep = g\nvalues =\n",
            "kind = dmc-tunnel\nsweep = n\nvalues = 4\n",
            "kind = gfmc-tunnel\nsweep = n\nvalues = 4.5\n",
            "kind = gfmc-tunnel\nmodel = shamrock\ngwf = urbm\n",
            "kind = dmc-tunnel\nunknown = 1\n",
            "kind = dmc-tunnel\nbeta = 1\n",
            "kind = gfmc-tunnel\ngwf = urbm\nk1 = 0.1\n",
            "kind = teleport\n",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn system_round_trips_through_row_columns() {
        for s in [
            System::Potential(PotentialSpec::quartic(7.5).unwrap()),
            System::Potential(PotentialSpec::plateau(8.0, 1.25).unwrap()),
            System::Spin(SpinModel::ising_chain(10, 1.0, 0.6).unwrap()),
            System::Spin(SpinModel::shamrock(4, 6.0, 0.2, 0.5).unwrap()),
        ] {
            assert_eq!(System::from_name_params(s.name(), &s.params_string()).unwrap(), s);
        }
    }

    #[test]
    fn reads_record() {
        let dir = tempfile::tempdir().unwrap();
        let rec = GwfRecord {
            model: SpinModel::ising_chain(8, 1.0, 0.6).unwrap(),
            gwf: SpinGwf::Urbm(crate::gwf::Urbm::new(8, 0.1, 1.2, 0.6).unwrap()),
            energy: -8.7,
            stderr: 0.0,
        };
        rec.save(&dir.path().join("urbm.gwf")).unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "kind = gfmc-tunnel\ngwf_record = urbm.gwf\nsweep = n\nvalues = 6, 8\n").unwrap();
        let c = ExperimentConfig::load(&cfg).unwrap();
        assert_eq!(c.gwf, GwfChoice::Urbm(Some([0.1, 1.2, 0.6])));
    }
}
