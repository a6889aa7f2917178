//! `pqmc`: tunneling-time experiments from the command line.
//!
//! Every experiment subcommand accepts the keys of the config file as flags
//! (`--tau 0.02`, `--sweep g --values 6,7,8`, ...); `--config FILE` loads a
//! file first and flags override its entries.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pqmc_core::gwf::{
    optimize_boltzmann_beta_spin, optimize_urbm, variational_energy_exact, BetaMethod, BoltzmannGwf, GwfRecord,
    SpinGwf, SrConfig, Urbm, EXACT_ENUMERATION_LIMIT,
};
use pqmc_core::harness::{
    emit_report, fit_table, read_samples, run_sweep, write_samples, ExperimentConfig, ExperimentKind, FitWindow,
    GwfChoice, ResultTable, SweepResult, System,
};
use pqmc_core::kv::KvMap;
use pqmc_core::spectral::{solve_lowest_two, wkb_gap, write_spectrum_csv, Grid1D};
use pqmc_core::{repetition_rng, PotentialKind};

#[derive(Parser, Debug)]
#[command(name = "pqmc", version, about = "Tunneling times of projective quantum Monte Carlo")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for repetitions (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two lowest double-well states as `x,V,psi0,psi1` CSV.
    Spectrum(ExperimentArgs),
    /// First gap of each sweep point.
    Gap(ExperimentArgs),
    /// Optimise a spin guiding wave function and save its record.
    OptimizeGwf(ExperimentArgs),
    /// DMC tunneling times in the double well.
    DmcTunnel(ExperimentArgs),
    /// GFMC tunneling times in the chain or the shamrock.
    GfmcTunnel(ExperimentArgs),
    /// Power-law fit of a saved rows CSV.
    Fit(ExperimentArgs),
    /// Run the experiment described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Flags mirroring the config-file keys.
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Config file loaded before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sweep axis: g, x0, n or k.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long)]
    values: Option<String>,
    /// none, boltzmann, exact or urbm.
    #[arg(long)]
    gwf: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k3: Option<f64>,
    /// Saved wave-function record to use instead of `--gwf`.
    #[arg(long)]
    gwf_record: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    walkers: Option<usize>,
    /// Crossing fraction.
    #[arg(long)]
    p: Option<f64>,
    /// DMC threshold as a fraction of the right minimum.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    hidden_sweeps: Option<usize>,
    #[arg(long)]
    tau_halvings: Option<u32>,
    /// Rows CSV to fit.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Samples CSV for the bootstrap; defaults to `<input>.samples.csv` when present.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    b_min: Option<f64>,
    #[arg(long)]
    b_max: Option<f64>,
}

impl ExperimentArgs {
    fn to_config(&self, kind: ExperimentKind, cli: &Cli) -> Result<ExperimentConfig> {
        let (mut kv, base) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                (KvMap::parse(&text)?, path.parent().map(Path::to_path_buf))
            }
            None => (KvMap::default(), None),
        };
        if let Some(file_kind) = kv.raw("kind") {
            if file_kind != kind.as_str() {
                bail!("config file is for `{file_kind}`, not `{}`", kind.as_str());
            }
        }
        kv.set("kind", kind.as_str());
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { kv.set(stringify!($field), v); })*
            };
        }
        put!(potential, g, x0, model, n, k, j, gamma, epsilon, sweep, values, gwf, beta, k1, k2, k3);
        put!(tau, walkers, p, threshold, reps, max_time, hidden_sweeps, tau_halvings, window, bootstrap, b_min, b_max);
        if let Some(path) = &self.gwf_record {
            kv.set("gwf_record", path.display());
        }
        if let Some(path) = &self.input {
            kv.set("input", path.display());
        }
        if let Some(seed) = cli.seed {
            kv.set("seed", seed);
        }
        if let Some(out) = &cli.out {
            kv.set("out", out.display());
        }
        Ok(ExperimentConfig::from_kv(kv, base.as_deref())?)
    }
}

/// Writes to `path`, or to standard output.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` when a configured tolerance is violated.
fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let config = match &cli.command {
        Command::Spectrum(a) => a.to_config(ExperimentKind::Spectrum, cli)?,
        Command::Gap(a) => a.to_config(ExperimentKind::Gap, cli)?,
        Command::OptimizeGwf(a) => a.to_config(ExperimentKind::OptimizeGwf, cli)?,
        Command::DmcTunnel(a) => a.to_config(ExperimentKind::DmcTunnel, cli)?,
        Command::GfmcTunnel(a) => a.to_config(ExperimentKind::GfmcTunnel, cli)?,
        Command::Fit(a) => a.to_config(ExperimentKind::Fit, cli)?,
        Command::Sweep { config } => {
            let mut kv = KvMap::parse(&std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?)?;
            if let Some(seed) = cli.seed {
                kv.set("seed", seed);
            }
            if let Some(out) = &cli.out {
                kv.set("out", out.display());
            }
            ExperimentConfig::from_kv(kv, config.parent())?
        }
    };
    let samples = match &cli.command {
        Command::Fit(a) => a.samples.clone(),
        _ => None,
    };
    execute(&config, samples)
}

fn execute(config: &ExperimentConfig, samples: Option<PathBuf>) -> Result<bool> {
    match config.kind {
        ExperimentKind::Spectrum => spectrum(config),
        ExperimentKind::Gap => {
            let sweep = run_sweep(config)?;
            sweep.table.write(output(config.out.as_deref())?)?;
            Ok(true)
        }
        ExperimentKind::OptimizeGwf => optimize(config),
        ExperimentKind::DmcTunnel | ExperimentKind::GfmcTunnel => tunnel(config),
        ExperimentKind::Fit => fit(config, samples),
    }
}

fn spectrum(config: &ExperimentConfig) -> Result<bool> {
    let System::Potential(spec) = config.system else { bail!("spectrum needs a double-well potential") };
    if config.sweep.is_some() {
        bail!("spectrum takes a single potential, not a sweep");
    }
    let s = solve_lowest_two(&spec, &Grid1D::for_potential(&spec))?;
    write_spectrum_csv(&s, output(config.out.as_deref())?)?;
    eprintln!("E0 = {:.10}  E1 = {:.10}  gap = {:.6e}", s.e0, s.e1, s.gap);
    if spec.kind == PotentialKind::Quartic {
        eprintln!("WKB gap = {:.6e}", wkb_gap(spec.g));
    }
    Ok(true)
}

fn optimize(config: &ExperimentConfig) -> Result<bool> {
    let System::Spin(model) = config.system else { bail!("optimize-gwf needs a spin model") };
    if config.sweep.is_some() {
        bail!("optimize-gwf takes a single model, not a sweep");
    }
    let mut rng = repetition_rng(config.seed, 0);
    let (gwf, energy, stderr) = match config.gwf {
        GwfChoice::Boltzmann(_) => {
            let opt = optimize_boltzmann_beta_spin(&model, BetaMethod::auto(&model), &mut rng)?;
            if !opt.converged {
                eprintln!("warning: beta optimisation did not converge (beta = {})", opt.beta);
            }
            (SpinGwf::Boltzmann(BoltzmannGwf::new(opt.beta)?), opt.energy, opt.stderr)
        }
        GwfChoice::Urbm(start) => {
            let [k1, k2, k3] = start.unwrap_or([0.0; 3]);
            let initial = Urbm::new(model.n(), k1, k2, k3)?;
            let sr = optimize_urbm(initial, &model, &SrConfig::default(), &mut rng)?;
            if !sr.converged {
                eprintln!("warning: stochastic reconfiguration did not meet its tolerance");
            }
            (SpinGwf::Urbm(sr.urbm), sr.energy, sr.stderr)
        }
        other => bail!("optimize-gwf supports boltzmann and urbm, not `{}`", other.mode_name()),
    };
    let record = GwfRecord { model, gwf, energy, stderr };
    if model.n() <= EXACT_ENUMERATION_LIMIT {
        eprintln!("variational energy {:.8} (exact enumeration {:.8})", energy, variational_energy_exact(&record.gwf, &model)?);
    }
    output(config.out.as_deref())?.write_all(record.to_text()?.as_bytes())?;
    Ok(true)
}

fn tunnel(config: &ExperimentConfig) -> Result<bool> {
    let sweep = run_sweep(config)?;
    for (i, p) in sweep.points.iter().enumerate() {
        if let Some(e) = &p.error {
            eprintln!("warning: point {i} ({}) failed: {e}", p.system.params_string());
        } else if let Some(run) = &p.run {
            if run.censored_count() > 0 {
                eprintln!(
                    "warning: point {i} ({}): {} of {} repetitions censored or aborted",
                    p.system.params_string(),
                    run.censored_count(),
                    run.outcomes.len()
                );
            }
        }
    }
    sweep.table.write(output(config.out.as_deref())?)?;
    if let Some(out) = &config.out {
        write_samples(File::create(sibling(out, "samples.csv"))?, &sweep.samples())?;
    }
    let report = sweep_report(config, &sweep);
    match &config.out {
        Some(out) => std::fs::write(sibling(out, "report.txt"), &report.text)?,
        None => eprint!("{}", report.text),
    }
    for v in &report.violations {
        eprintln!("tolerance violated: {v}");
    }
    Ok(report.passed())
}

fn sweep_report(config: &ExperimentConfig, sweep: &SweepResult) -> pqmc_core::harness::Report {
    let eligible = sweep.sampled_points().len();
    let window = FitWindow::smallest(config.fit.window.min(eligible));
    let mut fits = Vec::new();
    match sweep.fit(window, config.fit.bootstrap, config.seed) {
        Ok(f) => fits.push((config.gwf.mode_name().to_string(), f)),
        Err(e) if config.sweep.is_some() => eprintln!("no fit: {e}"),
        Err(_) => {}
    }
    let mut report = emit_report(&sweep.table, &fits, config.fit.b_range);
    if fits.is_empty() {
        if let Some((lo, hi)) = config.fit.b_range {
            report.violations.push(format!("no fit available to check b in [{lo}, {hi}]"));
        }
    }
    report
}

fn fit(config: &ExperimentConfig, samples: Option<PathBuf>) -> Result<bool> {
    let Some(input) = &config.fit.input else { bail!("fit needs --input") };
    let table = ResultTable::read(File::open(input).with_context(|| format!("opening {}", input.display()))?)?;
    let samples_path = samples.or_else(|| Some(sibling(input, "samples.csv")).filter(|p| p.exists()));
    let samples = match &samples_path {
        Some(p) => Some(read_samples(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    let window = FitWindow::smallest(config.fit.window);
    let label = match &table {
        ResultTable::Dmc(r) => r.first().map(|r| r.gwf_mode.clone()),
        ResultTable::Spin(r) => r.first().map(|r| r.gwf_mode.clone()),
        ResultTable::Gap(_) => bail!("gap tables have no tunneling times to fit"),
    }
    .unwrap_or_default();
    let fit = fit_table(&table, samples.as_deref(), window, config.fit.bootstrap, config.seed)?;
    let report = emit_report(&table, &[(label, fit)], config.fit.b_range);
    output(config.out.as_deref())?.write_all(report.text.as_bytes())?;
    for v in &report.violations {
        eprintln!("tolerance violated: {v}");
    }
    Ok(report.passed())
}
