//! Unrestricted Boltzmann machine on a ring:
//! `phi(x, h) = exp(sum_i K1 x_i x_{i+1} + K2 h_i h_{i+1} + K3 x_i h_i)` with
//! periodic boundaries in both layers and `Psi_G(x) = sum_h phi(x, h)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::population::SimRng;
use crate::spin::SpinConfig;

/// Hidden-layer configuration; same encoding as the visible spins.
pub type HiddenState = SpinConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Urbm {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub n: usize,
}

type Mat2 = [[f64; 2]; 2];

#[inline]
fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Divides by the largest entry and returns its log.
#[inline]
fn rescale(m: &mut Mat2) -> f64 {
    let max = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    m.iter_mut().flatten().for_each(|v| *v /= max);
    max.ln()
}

#[inline]
fn trace_of_product(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
/// Hidden value of matrix index 0 and 1.
const HIDDEN: [f64; 2] = [1.0, -1.0];

impl Urbm {
    pub fn new(n: usize, k1: f64, k2: f64, k3: f64) -> Result<Self> {
        if !(2..=crate::spin::MAX_SPINS).contains(&n) {
            return Err(Error::invalid(format!("uRBM needs at least 2 visible spins, got {n}")));
        }
        if !(k1.is_finite() && k2.is_finite() && k3.is_finite()) {
            return Err(Error::invalid("uRBM couplings must be finite"));
        }
        Ok(Urbm { k1, k2, k3, n })
    }

    pub fn params(&self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }

    pub fn with_params(&self, k: [f64; 3]) -> Result<Self> {
        Urbm::new(self.n, k[0], k[1], k[2])
    }

    #[inline]
    fn ring(&self, i: usize) -> (usize, usize) {
        ((i + self.n - 1) % self.n, (i + 1) % self.n)
    }

    /// `(sum x_i x_{i+1}, sum h_i h_{i+1}, sum x_i h_i)`, the derivatives of
    /// `ln phi` with respect to the three couplings.
    pub fn hidden_log_derivatives(&self, x: &SpinConfig, h: &HiddenState) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.n {
            let j = (i + 1) % self.n;
            out[0] += x.spin(i) * x.spin(j);
            out[1] += h.spin(i) * h.spin(j);
            out[2] += x.spin(i) * h.spin(i);
        }
        out
    }

    pub fn log_phi(&self, x: &SpinConfig, h: &HiddenState) -> f64 {
        let d = self.hidden_log_derivatives(x, h);
        self.k1 * d[0] + self.k2 * d[1] + self.k3 * d[2]
    }

    /// `ln phi(flip(x, i), h) - ln phi(x, h)`.
    #[inline]
    pub fn log_phi_ratio(&self, x: &SpinConfig, h: &HiddenState, i: usize) -> f64 {
        let (l, r) = self.ring(i);
        -2.0 * x.spin(i) * (self.k1 * (x.spin(l) + x.spin(r)) + self.k3 * h.spin(i))
    }

    /// `ln phi(x, flip(h, i)) - ln phi(x, h)`.
    #[inline]
    pub fn hidden_flip_log_ratio(&self, x: &SpinConfig, h: &HiddenState, i: usize) -> f64 {
        let (l, r) = self.ring(i);
        -2.0 * h.spin(i) * (self.k2 * (h.spin(l) + h.spin(r)) + self.k3 * x.spin(i))
    }

    /// `sweeps` passes of single-site Metropolis over the hidden layer at
    /// fixed `x`, each pass proposing `n` flips at random sites; returns the
    /// number of accepted flips.
    ///
    /// Sites are drawn at random because a fixed visiting order turns every
    /// zero-cost flip into a deterministic move and the chain stops mixing.
    pub fn hidden_metropolis_sweep(
        &self,
        x: &SpinConfig,
        h: &mut HiddenState,
        rng: &mut SimRng,
        sweeps: usize,
    ) -> usize {
        let mut accepted = 0;
        for _ in 0..sweeps {
            for _ in 0..self.n {
                let i = rng.random_range(0..self.n);
                let log_a = self.hidden_flip_log_ratio(x, h, i);
                if log_a >= 0.0 || rng.random::<f64>() < log_a.exp() {
                    h.flip(i);
                    accepted += 1;
                }
            }
        }
        accepted
    }

    /// Transfer matrix of site `i` divided by `exp(|K2| + |K3|)`:
    /// `T[a][b] = exp(K2 h_a h_b + K3 x_i h_a)`.
    #[inline]
    fn transfer(&self, x: &SpinConfig, i: usize) -> Mat2 {
        let shift = self.k2.abs() + self.k3.abs();
        let xi = x.spin(i);
        let mut t = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                t[a][b] = (self.k2 * HIDDEN[a] * HIDDEN[b] + self.k3 * xi * HIDDEN[a] - shift).exp();
            }
        }
        t
    }

    fn visible_bonds(&self, x: &SpinConfig) -> f64 {
        (0..self.n).map(|i| x.spin(i) * x.spin((i + 1) % self.n)).sum()
    }

    /// `ln Psi_G(x)` from the trace of the ordered transfer-matrix product.
    pub fn log_trace(&self, x: &SpinConfig) -> f64 {
        let shift = self.k2.abs() + self.k3.abs();
        let mut m = IDENTITY;
        let mut log_scale = 0.0;
        for i in 0..self.n {
            m = mul(&m, &self.transfer(x, i));
            log_scale += rescale(&mut m) + shift;
        }
        self.k1 * self.visible_bonds(x) + log_scale + (m[0][0] + m[1][1]).ln()
    }

    pub fn trace(&self, x: &SpinConfig) -> f64 {
        self.log_trace(x).exp()
    }

    /// Exact `d ln Psi_G / dK` for the three couplings, i.e. the conditional
    /// averages of [`Urbm::hidden_log_derivatives`] over `h` given `x`.
    pub fn log_derivatives(&self, x: &SpinConfig) -> [f64; 3] {
        let n = self.n;
        let mats: Vec<Mat2> = (0..n).map(|i| self.transfer(x, i)).collect();
        // prefix[i] = T_0 ... T_{i-1}, suffix[i] = T_{i+1} ... T_{n-1}, rescaled
        let mut prefix = vec![IDENTITY; n];
        for i in 1..n {
            let mut p = mul(&prefix[i - 1], &mats[i - 1]);
            rescale(&mut p);
            prefix[i] = p;
        }
        let mut suffix = vec![IDENTITY; n];
        for i in (0..n - 1).rev() {
            let mut s = mul(&mats[i + 1], &suffix[i + 1]);
            rescale(&mut s);
            suffix[i] = s;
        }
        let mut d2 = 0.0;
        let mut d3 = 0.0;
        for i in 0..n {
            // environment of T_i under the cyclic trace
            let mut env = mul(&suffix[i], &prefix[i]);
            rescale(&mut env);
            let t = &mats[i];
            let mut bond = [[0.0; 2]; 2];
            let mut field = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    bond[a][b] = HIDDEN[a] * HIDDEN[b] * t[a][b];
                    field[a][b] = x.spin(i) * HIDDEN[a] * t[a][b];
                }
            }
            let z = trace_of_product(t, &env);
            d2 += trace_of_product(&bond, &env) / z;
            d3 += trace_of_product(&field, &env) / z;
        }
        [self.visible_bonds(x), d2, d3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::repetition_rng;

    fn brute_force(u: &Urbm, x: &SpinConfig) -> (f64, [f64; 3]) {
        let mut z = 0.0;
        let mut d = [0.0; 3];
        for bits in 0..(1u64 << u.n) {
            let h = HiddenState::from_bits(bits, u.n).unwrap();
            let w = u.log_phi(x, &h).exp();
            z += w;
            let o = u.hidden_log_derivatives(x, &h);
            for k in 0..3 {
                d[k] += w * o[k];
            }
        }
        (z, d.map(|v| v / z))
    }

    #[test]
    fn ratio_examples() {
        let mut rng = repetition_rng(4, 0);
        let free = Urbm::new(6, 0.0, 0.9, 0.0).unwrap();
        let x = SpinConfig::random(6, &mut rng).unwrap();
        let h = HiddenState::random(6, &mut rng).unwrap();
        for i in 0..6 {
            assert_eq!(free.log_phi_ratio(&x, &h, i), 0.0);
        }
        let u = Urbm::new(6, 0.3, -0.4, 0.7).unwrap();
        let up = SpinConfig::all_up(6).unwrap();
        for i in 0..6 {
            assert!((u.log_phi_ratio(&up, &up, i) + 2.0 * (2.0 * 0.3 + 0.7)).abs() < 1e-14);
        }
    }

    #[test]
    fn ratios_match_direct_differences() {
        let mut rng = repetition_rng(5, 0);
        for _ in 0..1000 {
            let n = rng.random_range(2..12);
            let u = Urbm::new(n, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .unwrap();
            let x = SpinConfig::random(n, &mut rng).unwrap();
            let h = HiddenState::random(n, &mut rng).unwrap();
            let i = rng.random_range(0..n);
            let direct = u.log_phi(&x.flipped(i), &h) - u.log_phi(&x, &h);
            assert!((u.log_phi_ratio(&x, &h, i) - direct).abs() < 1e-12);
            let hidden = u.log_phi(&x, &h.flipped(i)) - u.log_phi(&x, &h);
            assert!((u.hidden_flip_log_ratio(&x, &h, i) - hidden).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_matches_enumeration() {
        let mut rng = repetition_rng(6, 0);
        for n in 2..=12 {
            for _ in 0..5 {
                let u = Urbm::new(n, rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))
                    .unwrap();
                let x = SpinConfig::random(n, &mut rng).unwrap();
                let (z, d) = brute_force(&u, &x);
                let t = u.trace(&x);
                assert!(((t - z) / z).abs() < 1e-12, "n={n}: {t} vs {z}");
                let exact = u.log_derivatives(&x);
                for k in 0..3 {
                    assert!((exact[k] - d[k]).abs() < 1e-10 * (1.0 + d[k].abs()));
                }
            }
        }
    }

    #[test]
    fn trace_limits() {
        let u = Urbm::new(7, 0.4, 0.0, 0.0).unwrap();
        let mut rng = repetition_rng(7, 0);
        let x = SpinConfig::random(7, &mut rng).unwrap();
        let bonds: f64 = (0..7).map(|i| x.spin(i) * x.spin((i + 1) % 7)).sum();
        assert!((u.log_trace(&x) - (7.0 * 2f64.ln() + 0.4 * bonds)).abs() < 1e-12);
        // huge couplings stay finite
        let big = Urbm::new(40, 30.0, 50.0, 40.0).unwrap();
        let y = SpinConfig::random(40, &mut rng).unwrap();
        assert!(big.log_trace(&y).is_finite());
        assert!(big.log_derivatives(&y).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn trace_is_translation_invariant() {
        let u = Urbm::new(9, 0.2, 0.8, -0.5).unwrap();
        let mut rng = repetition_rng(8, 0);
        for _ in 0..50 {
            let x = SpinConfig::random(9, &mut rng).unwrap();
            assert!((u.log_trace(&x) - u.log_trace(&x.rotated())).abs() < 1e-12);
        }
    }

    #[test]
    fn free_hidden_spins_equilibrate_in_one_sweep() {
        let u = Urbm::new(5, 0.7, 0.0, 0.0).unwrap();
        let x = SpinConfig::all_up(5).unwrap();
        let mut h = x;
        let mut rng = repetition_rng(9, 0);
        assert_eq!(u.hidden_metropolis_sweep(&x, &mut h, &mut rng, 3), 15);
    }

    #[test]
    fn strong_field_aligns_hidden_layer() {
        let u = Urbm::new(10, 0.0, 0.0, 8.0).unwrap();
        let x = SpinConfig::all_up(10).unwrap();
        let mut h = SpinConfig::all_down(10).unwrap();
        let mut rng = repetition_rng(10, 0);
        u.hidden_metropolis_sweep(&x, &mut h, &mut rng, 5);
        assert_eq!(h.magnetization(), 10);
    }

    #[test]
    fn hidden_chain_samples_conditional_distribution() {
        let n = 8;
        let u = Urbm::new(n, 0.3, 0.6, 0.5).unwrap();
        let mut rng = repetition_rng(12, 0);
        let x = SpinConfig::random(n, &mut rng).unwrap();
        let weights: Vec<f64> = (0..1u64 << n)
            .map(|b| u.log_phi(&x, &HiddenState::from_bits(b, n).unwrap()).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let mut h = HiddenState::random(n, &mut rng).unwrap();
        u.hidden_metropolis_sweep(&x, &mut h, &mut rng, 100);
        let samples = 1_000_000;
        let mut counts = vec![0u64; 1 << n];
        for _ in 0..samples {
            // thinning keeps successive samples nearly independent
            u.hidden_metropolis_sweep(&x, &mut h, &mut rng, 5);
            counts[h.bits() as usize] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(&c, &w)| {
                let e = samples as f64 * w / z;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let dof = (1 << n) as f64 - 1.0;
        // 1% critical value of chi^2 with 255 degrees of freedom
        assert!(chi2 < 310.5, "chi2 = {chi2} for {dof} dof");
    }
}
