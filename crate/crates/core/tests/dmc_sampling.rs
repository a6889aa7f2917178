use pqmc_core::dmc::{optimize_boltzmann_beta, DmcRun};
use pqmc_core::{repetition_rng, solve_lowest_two, DmcConfig, Grid1D, GuidingWf1d, PotentialSpec};

const BINS: usize = 40;
const RANGE: (f64, f64) = (-4.0, 4.0);

fn bin(x: f64) -> Option<usize> {
    let u = (x - RANGE.0) / (RANGE.1 - RANGE.0);
    (0.0..1.0).contains(&u).then(|| (u * BINS as f64) as usize)
}

#[test]
fn walker_histogram_matches_mixed_density() {
    let spec = PotentialSpec::quartic(6.0).unwrap();
    let grid = Grid1D::for_potential(&spec);
    let s = solve_lowest_two(&spec, &grid).unwrap();
    let beta = optimize_boltzmann_beta(&spec, &grid).beta;
    let gwf = GuidingWf1d::boltzmann(beta).unwrap();

    let mut expected = vec![0.0; BINS];
    for i in 0..grid.n_points {
        let x = grid.x(i);
        if let Some(b) = bin(x) {
            expected[b] += s.psi0[i] * (-beta * spec.value(x)).exp();
        }
    }
    let norm: f64 = expected.iter().sum();
    expected.iter_mut().for_each(|p| *p /= norm);

    let config = DmcConfig::with_defaults(&spec, 0.005, 2000, 1e5);
    let mut run = DmcRun::new(&spec, &gwf, &config, spec.left_minimum()).unwrap();
    let starts: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { spec.left_minimum() } else { spec.right_minimum() }).collect();
    run.set_positions(&starts).unwrap();
    run.set_reference_energy(s.e0);
    let mut rng = repetition_rng(31, 0);
    for _ in 0..4000 {
        run.step(&mut rng).unwrap();
    }
    let mut hist = vec![0.0; BINS];
    for _ in 0..500 {
        for _ in 0..20 {
            run.step(&mut rng).unwrap();
        }
        for x in run.positions() {
            if let Some(b) = bin(x) {
                hist[b] += 1.0;
            }
        }
    }
    let total: f64 = hist.iter().sum();
    assert!(total > 0.99e6);
    let distance: f64 = hist.iter().zip(&expected).map(|(h, p)| (h / total - p).abs()).sum::<f64>() / 2.0;
    assert!(distance < 0.01, "total-variation distance {distance}");
}
