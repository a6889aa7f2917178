//! Quartic double well `V(x) = x^4/g - x^2` and its plateau variant, which
//! inserts a flat region of half-width `x0` around the origin.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Quartic,
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Barrier parameter.
    pub g: f64,
    /// Plateau half-width; always 0 for the quartic well.
    pub x0: f64,
}

impl PotentialSpec {
    pub fn quartic(g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("g must be positive, got {g}")));
        }
        Ok(PotentialSpec { kind: PotentialKind::Quartic, g, x0: 0.0 })
    }

    pub fn plateau(g: f64, x0: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("g must be positive, got {g}")));
        }
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(Error::invalid(format!("plateau half-width must be >= 0, got {x0}")));
        }
        Ok(PotentialSpec { kind: PotentialKind::Plateau, g, x0 })
    }

    /// Distance from the origin in the shifted coordinate `(|x| - x0)_+`,
    /// keeping the sign of `x`.
    #[inline]
    fn shifted(&self, x: f64) -> f64 {
        match self.kind {
            PotentialKind::Quartic => x,
            PotentialKind::Plateau => x.signum() * (x.abs() - self.x0).max(0.0),
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let u = self.shifted(x);
        let u2 = u * u;
        u2 * u2 / self.g - u2
    }

    /// `V'(x)`; zero on the plateau, including the kink.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let u = self.shifted(x);
        4.0 * u * u * u / self.g - 2.0 * u
    }

    /// `V''(x)`; zero on the plateau.
    #[inline]
    pub fn second_derivative(&self, x: f64) -> f64 {
        if self.kind == PotentialKind::Plateau && x.abs() <= self.x0 {
            return 0.0;
        }
        let u = self.shifted(x);
        12.0 * u * u / self.g - 2.0
    }

    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        (self.value(x), self.derivative(x))
    }

    /// Right minimum `x_R`; the left minimum is `-x_R`.
    pub fn right_minimum(&self) -> f64 {
        (self.g / 2.0).sqrt() + self.x0
    }

    pub fn left_minimum(&self) -> f64 {
        -self.right_minimum()
    }

    /// `V(x_R) = -g/4`.
    pub fn well_depth(&self) -> f64 {
        -self.g / 4.0
    }

    pub fn is_bistable(&self) -> bool {
        self.g > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_examples() {
        let v = PotentialSpec::quartic(8.0).unwrap();
        assert_eq!(v.value_and_derivative(0.0), (0.0, 0.0));
        let xl = v.left_minimum();
        assert!((xl + 2.0).abs() < 1e-15);
        let (val, der) = v.value_and_derivative(xl);
        assert!((val + 2.0).abs() < 1e-14);
        assert!(der.abs() < 1e-14);
        assert_eq!(v.second_derivative(0.0), -2.0);
    }

    #[test]
    fn plateau_flat_inside() {
        let v = PotentialSpec::plateau(8.0, 1.5).unwrap();
        for x in [-1.5, -0.7, 0.0, 0.3, 1.5] {
            assert_eq!(v.value_and_derivative(x), (0.0, 0.0));
            assert_eq!(v.second_derivative(x), 0.0);
        }
        let q = PotentialSpec::quartic(8.0).unwrap();
        for x in [2.0, 3.1, 4.5] {
            assert!((v.value(x + 1.5) - q.value(x)).abs() < 1e-12);
            assert!((v.value(-x - 1.5) - q.value(-x)).abs() < 1e-12);
            assert!((v.derivative(-x - 1.5) - q.derivative(-x)).abs() < 1e-12);
        }
        assert!((v.right_minimum() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn plateau_zero_width_is_quartic() {
        let p = PotentialSpec::plateau(6.0, 0.0).unwrap();
        let q = PotentialSpec::quartic(6.0).unwrap();
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert!((p.value(x) - q.value(x)).abs() < 1e-14);
            assert!((p.derivative(x) - q.derivative(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let v = PotentialSpec::plateau(7.0, 0.4).unwrap();
        let h = 1e-6;
        for x in [-3.0, -1.2, 0.9, 2.5] {
            let fd = (v.value(x + h) - v.value(x - h)) / (2.0 * h);
            assert!((fd - v.derivative(x)).abs() < 1e-6);
            let fd2 = (v.derivative(x + h) - v.derivative(x - h)) / (2.0 * h);
            assert!((fd2 - v.second_derivative(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::quartic(0.0).is_err());
        assert!(PotentialSpec::plateau(8.0, -0.1).is_err());
    }
}
