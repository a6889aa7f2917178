use crate::error::{Error, Result};
use crate::spin::{SpinConfig, SpinModel};

/// `Psi_G(x) = exp(-beta E_cl(x))`. `beta = 0` is the flat wave function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannGwf {
    pub beta: f64,
}

impl BoltzmannGwf {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(BoltzmannGwf { beta })
    }

    pub fn log_psi(&self, model: &SpinModel, x: &SpinConfig) -> f64 {
        -self.beta * model.classical_energy(x)
    }

    /// `ln Psi_G(flip(x, i)) - ln Psi_G(x) = -beta Delta E_cl`.
    pub fn log_psi_ratio(&self, model: &SpinModel, x: &SpinConfig, i: usize) -> f64 {
        -self.beta * model.flip_delta(x, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::repetition_rng;
    use rand::Rng;

    #[test]
    fn ratio_examples() {
        let m = SpinModel::ising_chain(6, 1.0, 0.6).unwrap();
        let up = SpinConfig::all_up(6).unwrap();
        assert_eq!(BoltzmannGwf::new(0.0).unwrap().log_psi_ratio(&m, &up, 2), 0.0);
        let b = BoltzmannGwf::new(0.2).unwrap();
        for i in 0..6 {
            assert!((b.log_psi_ratio(&m, &up, i) + 0.8).abs() < 1e-15);
        }
        assert!(BoltzmannGwf::new(-0.1).is_err());
    }

    #[test]
    fn ratios_around_closed_loops_cancel() {
        let m = SpinModel::shamrock(3, 6.0, 0.2, 0.5).unwrap();
        let b = BoltzmannGwf::new(0.37).unwrap();
        let mut rng = repetition_rng(2, 0);
        for _ in 0..200 {
            let start = SpinConfig::random(m.n(), &mut rng).unwrap();
            let sites: Vec<usize> = (0..6).map(|_| rng.random_range(0..m.n())).collect();
            let mut x = start;
            let mut total = 0.0;
            // walk forward then retrace the same flips in reverse
            for &i in sites.iter().chain(sites.iter().rev()) {
                total += b.log_psi_ratio(&m, &x, i);
                x.flip(i);
            }
            assert_eq!(x, start);
            assert!(total.abs() < 1e-12);
        }
    }
}
