//! Exact gaps for the spin models.
//!
//! [`free_fermion_gap`] solves the periodic transverse-field chain through the
//! Jordan-Wigner mapping. [`exact_diag`] diagonalises any [`SpinHamiltonian`]
//! in the two sectors of the global spin flip, densely for small sectors and
//! with restarted Lanczos otherwise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spin::{SpinConfig, SpinHamiltonian, MAX_SPINS};

/// Single-fermion energy `2 sqrt(J^2 + Gamma^2 - 2 J Gamma cos k)`.
pub fn dispersion(j: f64, gamma: f64, k: f64) -> f64 {
    2.0 * (j * j + gamma * gamma - 2.0 * j * gamma * k.cos()).max(0.0).sqrt()
}

/// Gap between the lowest states of odd and even spin-flip parity of the
/// periodic chain.
///
/// Convention: the even sector carries antiperiodic momenta
/// `k = (2m + 1) pi / N` and its ground energy is `-1/2 sum eps_k`. The odd
/// sector carries periodic momenta `k = 2 m pi / N`; its ground energy is
/// `-1/2 sum eps_k`, raised by `eps_0` when `Gamma > J` because the `k = 0`
/// mode must then be occupied to give odd fermion parity.
pub fn free_fermion_gap(n: usize, j: f64, gamma: f64) -> Result<f64> {
    let (even, odd) = free_fermion_sector_energies(n, j, gamma)?;
    Ok((odd - even).abs())
}

/// Ground energies `(even, odd)` of the two parity sectors.
pub fn free_fermion_sector_energies(n: usize, j: f64, gamma: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::invalid(format!("chain length must be at least 2, got {n}")));
    }
    if !(j.is_finite() && gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("couplings must be finite with Gamma >= 0"));
    }
    let nf = n as f64;
    // pair k with -k so the sums are exactly symmetric
    let even: f64 = (0..n).map(|m| dispersion(j, gamma, (2 * m + 1) as f64 * PI / nf)).sum();
    let odd: f64 = (0..n).map(|m| dispersion(j, gamma, 2.0 * m as f64 * PI / nf)).sum();
    let mut e_odd = -0.5 * odd;
    if gamma > j {
        e_odd += dispersion(j, gamma, 0.0);
    }
    Ok((-0.5 * even, e_odd))
}

/// The two lowest levels and the ground state in the full `2^N` basis.
#[derive(Debug, Clone)]
pub struct ExactSpectrum {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    /// Ground-state amplitudes indexed by configuration bits, normalised and
    /// nonnegative.
    pub ground_state: Vec<f64>,
}

impl ExactSpectrum {
    /// `ln Psi_0(x)` for every configuration; `-inf` where the amplitude is 0.
    pub fn log_amplitudes(&self) -> Vec<f64> {
        self.ground_state.iter().map(|a| a.ln()).collect()
    }
}

/// Largest spin count accepted by [`exact_diag`].
pub const MAX_ED_SPINS: usize = 24;
/// Sectors up to this dimension are diagonalised densely.
pub const DENSE_SECTOR_LIMIT: usize = 256;
/// Relative residual at which a Lanczos Ritz pair is accepted.
pub const LANCZOS_TOLERANCE: f64 = 1e-11;

/// `(E0, E1, Delta)`.
pub fn exact_diag_gap<H: SpinHamiltonian>(model: &H) -> Result<(f64, f64, f64)> {
    let s = exact_diag(model)?;
    Ok((s.e0, s.e1, s.gap))
}

pub fn exact_diag<H: SpinHamiltonian>(model: &H) -> Result<ExactSpectrum> {
    let n = model.n_spins();
    if n == 0 || n > MAX_ED_SPINS.min(MAX_SPINS) {
        return Err(Error::invalid(format!("exact diagonalisation supports 1..={MAX_ED_SPINS} spins, got {n}")));
    }
    let even = Sector::new(model, n, 1.0);
    let odd = Sector::new(model, n, -1.0);
    let (even_vals, even_vecs) = even.lowest(2)?;
    let (odd_vals, _) = odd.lowest(1)?;
    let e0 = even_vals[0].min(odd_vals[0]);
    if odd_vals[0] < even_vals[0] {
        // cannot happen for a stoquastic flip-symmetric Hamiltonian
        return Err(Error::invalid("ground state found in the odd sector"));
    }
    let mut e1 = odd_vals[0];
    if even_vals.len() > 1 {
        e1 = e1.min(even_vals[1]);
    }
    let ground_state = even.expand(&even_vecs[0]);
    Ok(ExactSpectrum { e0, e1, gap: e1 - e0, ground_state })
}

/// Hamiltonian restricted to states `(|r> + s |r bar>) / sqrt 2`, with `r`
/// running over configurations whose top spin is down.
struct Sector<'a, H> {
    model: &'a H,
    n: usize,
    sign: f64,
    diag: Vec<f64>,
}

impl<'a, H: SpinHamiltonian> Sector<'a, H> {
    fn new(model: &'a H, n: usize, sign: f64) -> Self {
        let dim = 1usize << (n - 1);
        let diag = (0..dim as u64)
            .into_par_iter()
            .map(|r| model.classical_energy(&SpinConfig::from_bits(r, n).expect("valid bits")))
            .collect();
        Sector { model, n, sign, diag }
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `(index, coefficient)` of each off-diagonal element in row `r`.
    #[inline]
    fn for_each_hop(&self, r: usize, mut f: impl FnMut(usize, f64)) {
        let gamma = self.model.transverse_field();
        let top = 1usize << (self.n - 1);
        let full = (1usize << self.n) - 1;
        for i in 0..self.n {
            let s = r ^ (1 << i);
            if s & top == 0 {
                f(s, -gamma);
            } else {
                f(!s & full, -gamma * self.sign);
            }
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut acc = self.diag[r] * v[r];
            self.for_each_hop(r, |s, c| acc += c * v[s]);
            *o = acc;
        });
    }

    fn dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for r in 0..d {
            m[(r, r)] += self.diag[r];
            self.for_each_hop(r, |s, c| m[(r, s)] += c);
        }
        m
    }

    /// The `count` lowest eigenpairs in ascending order (fewer if the sector
    /// is smaller).
    fn lowest(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.dim();
        let count = count.min(d);
        if d <= DENSE_SECTOR_LIMIT {
            let eig = SymmetricEigen::new(self.dense());
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let vals = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
            let vecs = order[..count].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
            return Ok((vals, vecs));
        }
        let mut vals = Vec::new();
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for k in 0..count {
            let (val, vec) = lanczos_lowest(|v, o| self.apply(v, o), d, &vecs, 0x5eed + k as u64)?;
            vals.push(val);
            vecs.push(vec);
        }
        Ok((vals, vecs))
    }

    /// Full-basis amplitudes of a sector vector.
    fn expand(&self, v: &[f64]) -> Vec<f64> {
        let full = (1usize << self.n) - 1;
        let mut out = vec![0.0; 1 << self.n];
        let flip = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let scale = flip / 2f64.sqrt();
        for (r, &a) in v.iter().enumerate() {
            out[r] = scale * a;
            out[!r & full] = scale * self.sign * a;
        }
        for a in out.iter_mut() {
            // round-off can leave tiny negative entries in a positive vector
            if *a < 0.0 && *a > -1e-13 {
                *a = 0.0;
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    norm
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

const MAX_RESTARTS: usize = 60;

/// Lowest eigenpair of a symmetric operator on the complement of `deflate`
/// (orthonormal vectors), by explicitly restarted Lanczos with full
/// reorthogonalisation.
fn lanczos_lowest(
    apply: impl Fn(&[f64], &mut [f64]),
    dim: usize,
    deflate: &[Vec<f64>],
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let krylov = (1usize << 26).checked_div(dim).unwrap_or(0).clamp(20, 120).min(dim - deflate.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project_out(&mut start, deflate);
    normalize(&mut start);

    let mut residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(krylov);
        let mut beta: Vec<f64> = Vec::with_capacity(krylov);
        let mut tail = 0.0;
        for j in 0..krylov {
            apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // full reorthogonalisation, twice for stability
            for _ in 0..2 {
                project_out(&mut w, deflate);
                project_out(&mut w, &basis);
            }
            let b = dot(&w, &w).sqrt();
            tail = b;
            if j + 1 == krylov || b < 1e-13 * (1.0 + a.abs()) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let idx = (0..m).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).expect("nonempty");
        let theta = eig.eigenvalues[idx];
        let y = eig.eigenvectors.column(idx);
        let mut ritz = vec![0.0; dim];
        for (k, v) in basis.iter().enumerate() {
            let c = y[k];
            ritz.iter_mut().zip(v).for_each(|(r, x)| *r += c * x);
        }
        project_out(&mut ritz, deflate);
        normalize(&mut ritz);
        residual = (tail * y[m - 1]).abs();
        // confirm with an explicit residual
        apply(&ritz, &mut w);
        project_out(&mut w, deflate);
        let true_res = w.iter().zip(&ritz).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
        residual = residual.max(true_res);
        if residual <= LANCZOS_TOLERANCE * (1.0 + theta.abs()) {
            return Ok((theta, ritz));
        }
        start = ritz;
    }
    Err(Error::NoConvergence { iterations: MAX_RESTARTS, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{IsingGraph, SpinModel};

    #[test]
    fn two_level_system() {
        let g = IsingGraph::new(1, vec![], 0.7).unwrap();
        let (e0, e1, gap) = exact_diag_gap(&g).unwrap();
        assert!((e0 + 0.7).abs() < 1e-14 && (e1 - 0.7).abs() < 1e-14);
        assert!((gap - 1.4).abs() < 1e-14);
    }

    #[test]
    fn classical_limit_is_degenerate() {
        assert_eq!(free_fermion_gap(8, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn free_fermions_match_dense_and_lanczos() {
        for gamma in [0.3, 0.6, 0.9, 1.4] {
            for n in 2..=11 {
                let m = SpinModel::ising_chain(n, 1.0, gamma).unwrap();
                let (e0, _, gap) = exact_diag_gap(&m).unwrap();
                let ff = free_fermion_gap(n, 1.0, gamma).unwrap();
                let (even, _) = free_fermion_sector_energies(n, 1.0, gamma).unwrap();
                assert!((gap - ff).abs() < 1e-10, "n={n} gamma={gamma}: {gap} vs {ff}");
                assert!((e0 - even).abs() < 1e-9, "n={n} gamma={gamma}");
            }
        }
    }

    #[test]
    fn chain_reference_values() {
        let m = SpinModel::ising_chain(8, 1.0, 0.6).unwrap();
        let s = exact_diag(&m).unwrap();
        assert!((s.e0 + 8.740834454).abs() < 1e-8);
        let norm: f64 = s.ground_state.iter().map(|a| a * a).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(s.ground_state.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn shamrock_regression() {
        let m = SpinModel::shamrock(1, 6.0, 0.2, 0.5).unwrap();
        let (_, _, gap) = exact_diag_gap(&m).unwrap();
        assert!((gap - SHAMROCK_K1_GAP).abs() < 1e-10, "{gap}");
    }

    /// Frozen value of the shamrock gap at `K = 1`, `Gamma = 0.5`, `J = 6`,
    /// `epsilon = 0.2`.
    const SHAMROCK_K1_GAP: f64 = 0.400_040_197_194_536_9;

    #[test]
    fn ground_state_is_eigenvector() {
        let m = SpinModel::shamrock(5, 6.0, 0.2, 0.5).unwrap();
        let s = exact_diag(&m).unwrap();
        let n = m.n();
        for bits in 0..(1u64 << n) {
            let x = SpinConfig::from_bits(bits, n).unwrap();
            let mut hpsi = m.classical_energy(&x) * s.ground_state[bits as usize];
            for i in 0..n {
                hpsi -= 0.5 * s.ground_state[(bits ^ (1 << i)) as usize];
            }
            assert!((hpsi - s.e0 * s.ground_state[bits as usize]).abs() < 1e-9);
        }
    }

    #[test]
    fn dispersion_duality() {
        for k in [0.0, 0.4, 1.9, PI] {
            assert!((dispersion(1.0, 0.6, k) - dispersion(0.6, 1.0, k)).abs() < 1e-15);
        }
    }
}
