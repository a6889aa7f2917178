//! Spin configurations and the two transverse-field models: the periodic
//! Ising chain and the shamrock.
//!
//! Both Hamiltonians have the form `H = E_cl(x) - Gamma * sum_i sigma^x_i` in the
//! `sigma^z` basis. A configuration stores spin `+1` as a set bit.

use rand::Rng;

use crate::error::{Error, Result};

/// Largest number of spins a [`SpinConfig`] can hold.
pub const MAX_SPINS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    bits: u64,
    n: u8,
}

impl SpinConfig {
    fn check_len(n: usize) -> Result<()> {
        if n == 0 || n > MAX_SPINS {
            return Err(Error::invalid(format!("spin count must lie in 1..={MAX_SPINS}, got {n}")));
        }
        Ok(())
    }

    fn mask(n: usize) -> u64 {
        (1u64 << n) - 1
    }

    pub fn all_up(n: usize) -> Result<Self> {
        Self::check_len(n)?;
        Ok(SpinConfig { bits: Self::mask(n), n: n as u8 })
    }

    pub fn all_down(n: usize) -> Result<Self> {
        Self::check_len(n)?;
        Ok(SpinConfig { bits: 0, n: n as u8 })
    }

    /// Bit `i` set means spin `i` is `+1`; bits at or above `n` must be clear.
    pub fn from_bits(bits: u64, n: usize) -> Result<Self> {
        Self::check_len(n)?;
        if bits & !Self::mask(n) != 0 {
            return Err(Error::invalid(format!("bit pattern {bits:#x} has bits beyond {n} spins")));
        }
        Ok(SpinConfig { bits, n: n as u8 })
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        Self::check_len(spins.len())?;
        let mut bits = 0u64;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                _ => return Err(Error::invalid(format!("spin values must be +1 or -1, got {s}"))),
            }
        }
        Ok(SpinConfig { bits, n: spins.len() as u8 })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::check_len(n)?;
        Ok(SpinConfig { bits: rng.random::<u64>() & Self::mask(n), n: n as u8 })
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Spin `i` as `+1.0` or `-1.0`.
    #[inline]
    pub fn spin(&self, i: usize) -> f64 {
        if (self.bits >> i) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len());
        self.bits ^= 1 << i;
    }

    #[inline]
    pub fn flipped(mut self, i: usize) -> Self {
        self.flip(i);
        self
    }

    /// Every spin reversed.
    pub fn inverted(self) -> Self {
        SpinConfig { bits: !self.bits & Self::mask(self.len()), n: self.n }
    }

    /// `M = sum_i x_i`.
    #[inline]
    pub fn magnetization(&self) -> i32 {
        2 * self.bits.count_ones() as i32 - self.n as i32
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.len()).map(|i| self.spin(i) as i8).collect()
    }

    /// Cyclic shift by one site: spin `i` moves to `i + 1`.
    pub fn rotated(self) -> Self {
        let n = self.len();
        let top = (self.bits >> (n - 1)) & 1;
        SpinConfig { bits: ((self.bits << 1) | top) & Self::mask(n), n: self.n }
    }
}

/// A stoquastic transverse-field Hamiltonian `E_cl(x) - Gamma sum_i sigma^x_i`
/// whose classical part is invariant under a global spin flip.
pub trait SpinHamiltonian: Sync {
    fn n_spins(&self) -> usize;
    fn transverse_field(&self) -> f64;
    fn classical_energy(&self, x: &SpinConfig) -> f64;
    /// `E_cl(flip(x, i)) - E_cl(x)`.
    fn flip_delta(&self, x: &SpinConfig, i: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpinModel {
    /// `E_cl = -J sum_i x_i x_{i+1}` with `x_{N+1} = x_1`. For `N = 2` the two
    /// bonds join the same pair and both are counted.
    IsingChain { n: usize, j: f64, gamma: f64 },
    /// Hub spin 0 coupled ferromagnetically to `2K` leaves; leaves `2k-1, 2k`
    /// share an antiferromagnetic bond of strength `J - epsilon`.
    Shamrock { k: usize, j: f64, epsilon: f64, gamma: f64 },
}

impl SpinModel {
    pub fn ising_chain(n: usize, j: f64, gamma: f64) -> Result<Self> {
        if !(2..=MAX_SPINS).contains(&n) {
            return Err(Error::invalid(format!("chain length must lie in 2..={MAX_SPINS}, got {n}")));
        }
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::invalid(format!("J must be positive, got {j}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("Gamma must be >= 0, got {gamma}")));
        }
        Ok(SpinModel::IsingChain { n, j, gamma })
    }

    pub fn shamrock(k: usize, j: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        if k == 0 || 2 * k + 1 > MAX_SPINS {
            return Err(Error::invalid(format!("shamrock leaf count out of range: {k}")));
        }
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::invalid(format!("J must be positive, got {j}")));
        }
        if !(epsilon < j && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be below J, got {epsilon}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("Gamma must be >= 0, got {gamma}")));
        }
        Ok(SpinModel::Shamrock { k, j, epsilon, gamma })
    }

    pub fn n(&self) -> usize {
        match *self {
            SpinModel::IsingChain { n, .. } => n,
            SpinModel::Shamrock { k, .. } => 2 * k + 1,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            SpinModel::IsingChain { gamma, .. } | SpinModel::Shamrock { gamma, .. } => gamma,
        }
    }

    pub fn coupling(&self) -> f64 {
        match *self {
            SpinModel::IsingChain { j, .. } | SpinModel::Shamrock { j, .. } => j,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpinModel::IsingChain { .. } => "chain",
            SpinModel::Shamrock { .. } => "shamrock",
        }
    }

    /// `"key=value;..."` description used in CSV rows.
    pub fn params_string(&self) -> String {
        match *self {
            SpinModel::IsingChain { n, j, gamma } => format!("n={n};j={j};gamma={gamma}"),
            SpinModel::Shamrock { k, j, epsilon, gamma } => {
                format!("k={k};j={j};epsilon={epsilon};gamma={gamma}")
            }
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        match *self {
            SpinModel::IsingChain { n, j, .. } => Self::ising_chain(n, j, gamma),
            SpinModel::Shamrock { k, j, epsilon, .. } => Self::shamrock(k, j, epsilon, gamma),
        }
    }

    fn check(&self, x: &SpinConfig) {
        debug_assert_eq!(x.len(), self.n(), "configuration size does not match the model");
    }

    pub fn classical_energy(&self, x: &SpinConfig) -> f64 {
        self.check(x);
        match *self {
            SpinModel::IsingChain { n, j, .. } => {
                let rotated = x.rotated();
                // aligned bonds are the positions where x and its shift agree
                let aligned = (!(x.bits() ^ rotated.bits()) & SpinConfig::mask(n)).count_ones() as f64;
                -j * (2.0 * aligned - n as f64)
            }
            SpinModel::Shamrock { k, j, epsilon, .. } => {
                let hub = x.spin(0);
                let leaves = x.magnetization() as f64 - hub;
                let mut pairs = 0.0;
                for p in 1..=k {
                    pairs += x.spin(2 * p - 1) * x.spin(2 * p);
                }
                -j * hub * leaves + (j - epsilon) * pairs
            }
        }
    }

    /// Energy change from flipping spin `i`, from its local bonds.
    pub fn flip_delta(&self, x: &SpinConfig, i: usize) -> f64 {
        self.check(x);
        match *self {
            SpinModel::IsingChain { n, j, .. } => {
                let left = x.spin((i + n - 1) % n);
                let right = x.spin((i + 1) % n);
                2.0 * j * x.spin(i) * (left + right)
            }
            SpinModel::Shamrock { j, epsilon, .. } => {
                if i == 0 {
                    let leaves = x.magnetization() as f64 - x.spin(0);
                    2.0 * j * x.spin(0) * leaves
                } else {
                    let partner = if i % 2 == 1 { i + 1 } else { i - 1 };
                    2.0 * x.spin(i) * (j * x.spin(0) - (j - epsilon) * x.spin(partner))
                }
            }
        }
    }

    /// `(site, Delta E_cl)` for all `N` single flips.
    pub fn single_flip_neighbors(&self, x: &SpinConfig) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.n());
        self.single_flip_neighbors_into(x, &mut out);
        out
    }

    pub fn single_flip_neighbors_into(&self, x: &SpinConfig, out: &mut Vec<(usize, f64)>) {
        out.clear();
        match *self {
            SpinModel::Shamrock { j, epsilon, .. } => {
                let hub = x.spin(0);
                let leaves = x.magnetization() as f64 - hub;
                out.push((0, 2.0 * j * hub * leaves));
                for i in 1..self.n() {
                    let partner = if i % 2 == 1 { i + 1 } else { i - 1 };
                    out.push((i, 2.0 * x.spin(i) * (j * hub - (j - epsilon) * x.spin(partner))));
                }
            }
            SpinModel::IsingChain { .. } => {
                out.extend((0..self.n()).map(|i| (i, self.flip_delta(x, i))));
            }
        }
    }

    /// Lowest classical energy, `-N J` for the chain and `-(J + epsilon) K`
    /// for the shamrock.
    pub fn classical_ground_energy(&self) -> f64 {
        match *self {
            SpinModel::IsingChain { n, j, .. } => -(n as f64) * j,
            SpinModel::Shamrock { k, j, epsilon, .. } => -(j + epsilon) * k as f64,
        }
    }
}

impl SpinHamiltonian for SpinModel {
    fn n_spins(&self) -> usize {
        self.n()
    }
    fn transverse_field(&self) -> f64 {
        self.gamma()
    }
    fn classical_energy(&self, x: &SpinConfig) -> f64 {
        SpinModel::classical_energy(self, x)
    }
    fn flip_delta(&self, x: &SpinConfig, i: usize) -> f64 {
        SpinModel::flip_delta(self, x, i)
    }
}

/// Transverse-field Ising model on an arbitrary bond list,
/// `E_cl = sum_(a,b) J_ab x_a x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingGraph {
    pub n: usize,
    pub bonds: Vec<(usize, usize, f64)>,
    pub gamma: f64,
}

impl IsingGraph {
    pub fn new(n: usize, bonds: Vec<(usize, usize, f64)>, gamma: f64) -> Result<Self> {
        SpinConfig::check_len(n)?;
        if bonds.iter().any(|&(a, b, _)| a >= n || b >= n || a == b) {
            return Err(Error::invalid("bond endpoints must be distinct sites"));
        }
        Ok(IsingGraph { n, bonds, gamma })
    }
}

impl SpinHamiltonian for IsingGraph {
    fn n_spins(&self) -> usize {
        self.n
    }
    fn transverse_field(&self) -> f64 {
        self.gamma
    }
    fn classical_energy(&self, x: &SpinConfig) -> f64 {
        self.bonds.iter().map(|&(a, b, c)| c * x.spin(a) * x.spin(b)).sum()
    }
    fn flip_delta(&self, x: &SpinConfig, i: usize) -> f64 {
        self.bonds
            .iter()
            .filter(|&&(a, b, _)| a == i || b == i)
            .map(|&(a, b, c)| -2.0 * c * x.spin(a) * x.spin(b))
            .sum()
    }
}
