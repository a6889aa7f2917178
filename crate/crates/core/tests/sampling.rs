use pqmc_core::gfmc::GfmcRun;
use pqmc_core::gwf::{BoltzmannGwf, Urbm};
use pqmc_core::population::blocked_mean;
use pqmc_core::{exact_diag, repetition_rng, GfmcConfig, SpinConfig, SpinGwf, SpinModel};

/// Mean local energy over `steps` steps after `burn` equilibration steps,
/// with a blocked error bar, plus the visited magnetisation histogram.
fn mixed_run(model: &SpinModel, gwf: &SpinGwf, config: &GfmcConfig, burn: usize, steps: usize, seed: u64) -> (f64, f64, Vec<f64>) {
    let mut rng = repetition_rng(seed, 0);
    let start = SpinConfig::all_up(model.n()).unwrap();
    let mut run = GfmcRun::new(model, gwf, config, start, &mut rng).unwrap();
    for _ in 0..burn {
        run.step(&mut rng).unwrap();
    }
    let n = model.n();
    let mut hist = vec![0.0; n + 1];
    let mut series = Vec::with_capacity(steps);
    for _ in 0..steps {
        let report = run.step(&mut rng).unwrap();
        series.push(report.mean_local_energy);
        for w in run.walkers() {
            hist[(w.visible.magnetization() + n as i32) as usize / 2] += 1.0;
        }
    }
    let total: f64 = hist.iter().sum();
    hist.iter_mut().for_each(|h| *h /= total);
    let (mean, err) = blocked_mean(&series, 20).unwrap();
    (mean, err, hist)
}

#[test]
fn walkers_sample_the_mixed_distribution() {
    // critical chain: both magnetisation sectors mix quickly
    let model = SpinModel::ising_chain(8, 1.0, 1.0).unwrap();
    let exact = exact_diag(&model).unwrap();
    let gwf = SpinGwf::Boltzmann(BoltzmannGwf::new(0.3).unwrap());
    let mut expected = vec![0.0; 9];
    let mut norm = 0.0;
    for bits in 0..256u64 {
        let x = SpinConfig::from_bits(bits, 8).unwrap();
        let p = gwf.log_psi(&model, &x).exp() * exact.ground_state[bits as usize];
        expected[(x.magnetization() + 8) as usize / 2] += p;
        norm += p;
    }
    expected.iter_mut().for_each(|p| *p /= norm);
    let config = GfmcConfig::new(0.05, 1000, 1e5);
    let (_, _, hist) = mixed_run(&model, &gwf, &config, 400, 2000, 21);
    for (m, (h, p)) in hist.iter().zip(&expected).enumerate() {
        assert!((h - p).abs() < 0.01, "bin {m}: sampled {h}, exact {p}");
    }
}

#[test]
fn mixed_estimator_matches_ground_energy() {
    let model = SpinModel::ising_chain(8, 1.0, 0.6).unwrap();
    let e0 = exact_diag(&model).unwrap().e0;
    let config = GfmcConfig::new(0.05, 1000, 1e5);
    for gwf in [SpinGwf::None, SpinGwf::Boltzmann(BoltzmannGwf::new(0.65).unwrap())] {
        let (mean, err, _) = mixed_run(&model, &gwf, &GfmcConfig { time_step: 0.02, ..config.clone() }, 500, 4000, 22);
        assert!((mean - e0).abs() < 4.0 * err + 2e-3, "{}: {mean} +- {err} vs {e0}", gwf.mode_name());
    }
}

#[test]
fn hidden_sweep_count_does_not_shift_the_energy() {
    let model = SpinModel::ising_chain(8, 1.0, 0.6).unwrap();
    let e0 = exact_diag(&model).unwrap().e0;
    let gwf = SpinGwf::Urbm(Urbm::new(8, 0.11, 1.07, 0.76).unwrap());
    let mut estimates = vec![];
    for sweeps in [1, 5, 20] {
        let config = GfmcConfig { hidden_sweeps: sweeps, ..GfmcConfig::new(0.02, 500, 1e5) };
        let (mean, err, _) = mixed_run(&model, &gwf, &config, 300, 1500, 23);
        assert!((mean - e0).abs() < 4.0 * err + 5e-3, "{sweeps} sweeps: {mean} +- {err} vs {e0}");
        estimates.push((mean, err));
    }
    let (a, ea) = estimates[1];
    let (b, eb) = estimates[2];
    assert!((a - b).abs() < 4.0 * (ea * ea + eb * eb).sqrt() + 5e-3);
}
