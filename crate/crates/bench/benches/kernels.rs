use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use pqmc_core::dmc::{DmcConfig, DmcRun, GuidingWf1d};
use pqmc_core::gfmc::{GfmcConfig, GfmcRun};
use pqmc_core::gwf::{BoltzmannGwf, SpinGwf, Urbm};
use pqmc_core::{
    branch, exact_diag_gap, free_fermion_gap, repetition_rng, solve_lowest_two, Grid1D, PotentialSpec, SpinConfig,
    SpinModel, Walker,
};

fn population(c: &mut Criterion) {
    let pop: Vec<Walker<f64>> = (0..2000).map(|i| Walker { state: i as f64, weight: 0.5 + (i % 7) as f64 * 0.15 }).collect();
    let mut rng = repetition_rng(1, 0);
    c.bench_function("branch 2000 walkers", |b| b.iter(|| branch(black_box(&pop), &mut rng).unwrap()));
}

fn dmc(c: &mut Criterion) {
    let spec = PotentialSpec::quartic(10.0).unwrap();
    let spectrum = solve_lowest_two(&spec, &Grid1D::for_potential(&spec)).unwrap();
    for gwf in [GuidingWf1d::None, GuidingWf1d::boltzmann(0.4).unwrap(), GuidingWf1d::exact(&spectrum)] {
        let config = DmcConfig::with_defaults(&spec, 0.01, 2000, 1e5);
        let name = format!("dmc step 2000 walkers, {}", gwf.mode_name());
        c.bench_function(&name, |b| {
            let mut rng = repetition_rng(2, 0);
            let mut run = DmcRun::new(&spec, &gwf, &config, spec.left_minimum()).unwrap();
            b.iter(|| run.step(&mut rng).unwrap())
        });
    }
}

fn gfmc(c: &mut Criterion) {
    let model = SpinModel::ising_chain(12, 1.0, 0.6).unwrap();
    let config = GfmcConfig::new(0.02, 1000, 1e5);
    for gwf in [
        SpinGwf::None,
        SpinGwf::Boltzmann(BoltzmannGwf::new(0.65).unwrap()),
        SpinGwf::Urbm(Urbm::new(12, 0.11, 1.07, 0.76).unwrap()),
    ] {
        let name = format!("gfmc step chain n=12, 1000 walkers, {}", gwf.mode_name());
        c.bench_function(&name, |b| {
            let mut rng = repetition_rng(3, 0);
            let start = SpinConfig::all_up(12).unwrap();
            let mut run = GfmcRun::new(&model, &gwf, &config, start, &mut rng).unwrap();
            b.iter(|| run.step(&mut rng).unwrap())
        });
    }
}

fn oracles(c: &mut Criterion) {
    let spec = PotentialSpec::quartic(10.0).unwrap();
    let grid = Grid1D::for_potential(&spec);
    c.bench_function("grid eigensolver g=10", |b| b.iter(|| solve_lowest_two(black_box(&spec), &grid).unwrap()));
    c.bench_function("free-fermion gap n=63", |b| b.iter(|| free_fermion_gap(black_box(63), 1.0, 0.6).unwrap()));
    let chain = SpinModel::ising_chain(14, 1.0, 0.6).unwrap();
    c.bench_function("exact diagonalisation chain n=14", |b| b.iter(|| exact_diag_gap(black_box(&chain)).unwrap()));
    let urbm = Urbm::new(16, 0.11, 1.07, 0.76).unwrap();
    let mut rng = repetition_rng(4, 0);
    c.bench_function("uRBM transfer-matrix trace n=16", |b| {
        b.iter_batched(|| SpinConfig::random(16, &mut rng).unwrap(), |x| urbm.log_trace(&x), BatchSize::SmallInput)
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = population, dmc, gfmc, oracles
}
criterion_main!(benches);
