//! Deterministic reference results for the one-dimensional problem: a
//! finite-difference eigensolver for the two lowest states, WKB asymptotics, and
//! the Kramers activation time over the effective barrier `-ln Psi0`.
//!
//! The eigensolver works on the Dirichlet three-point discretisation of
//! `-1/2 d^2/dx^2 + V`. Eigenvalues come from Sturm-sequence bisection.
//! Eigenvectors come from a twisted two-sided recurrence evaluated in the log
//! domain, so the deep tails of `Psi0` keep full relative accuracy instead of
//! being swamped by round-off. The tabulated guiding wave function relies on
//! that.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Maximum normalised amplitude allowed on the outermost interior nodes.
pub const BOUNDARY_AMPLITUDE_LIMIT: f64 = 1e-8;
/// Default spacing of [`Grid1D::for_potential`].
pub const DEFAULT_SPACING: f64 = 0.005;
/// Extra room beyond each minimum in [`Grid1D::for_potential`].
pub const DEFAULT_MARGIN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub xmin: f64,
    pub xmax: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(xmin: f64, xmax: f64, n_points: usize) -> Result<Self> {
        if !(xmin < xmax) || !xmin.is_finite() || !xmax.is_finite() {
            return Err(Error::invalid(format!("grid bounds must satisfy xmin < xmax, got [{xmin}, {xmax}]")));
        }
        if n_points < 3 {
            return Err(Error::invalid(format!("grid needs at least 3 points, got {n_points}")));
        }
        Ok(Grid1D { xmin, xmax, n_points })
    }

    /// Symmetric grid `[-half_width, half_width]` with spacing at most
    /// `max_spacing` and an odd point count, so `x = 0` is a node.
    pub fn symmetric(half_width: f64, max_spacing: f64) -> Result<Self> {
        if !(half_width > 0.0 && max_spacing > 0.0) {
            return Err(Error::invalid("symmetric grid needs positive width and spacing"));
        }
        let half = (half_width / max_spacing).ceil() as usize;
        Grid1D::new(-half_width, half_width, 2 * half + 1)
    }

    /// `[-(x_R + 6), x_R + 6]` with spacing <= 0.005.
    pub fn for_potential(spec: &PotentialSpec) -> Self {
        Self::symmetric(spec.right_minimum() + DEFAULT_MARGIN, DEFAULT_SPACING)
            .expect("potential minimum is finite")
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.xmax - self.xmin) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.xmin) / self.spacing()).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Same bounds, spacing halved.
    pub fn refined(&self) -> Self {
        Grid1D { n_points: 2 * self.n_points - 1, ..*self }
    }
}

/// The two lowest eigenpairs on a grid. Vectors include the two Dirichlet
/// boundary nodes (value 0) and are normalised so `sum psi^2 * h = 1`.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub grid: Grid1D,
    pub potential: Vec<f64>,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
    /// `ln psi0` with full relative accuracy in the tails; `-inf` on the
    /// boundary nodes.
    pub log_psi0: Vec<f64>,
}

/// Two lowest states of `-1/2 d^2/dx^2 + spec`.
pub fn solve_lowest_two(spec: &PotentialSpec, grid: &Grid1D) -> Result<SpectralResult> {
    let mut result = solve_lowest_two_with(|x| spec.value(x), grid)?;
    // Psi1 positive at the right minimum
    let ir = grid.nearest_index(spec.right_minimum());
    if result.psi1[ir] < 0.0 {
        result.psi1.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(result)
}

/// Same as [`solve_lowest_two`] for an arbitrary potential function.
/// Psi1 is made positive at its largest-amplitude node on the right.
pub fn solve_lowest_two_with(potential: impl Fn(f64) -> f64, grid: &Grid1D) -> Result<SpectralResult> {
    let n = grid.n_points;
    if n < 4 {
        return Err(Error::invalid("need at least two interior nodes"));
    }
    let h = grid.spacing();
    let v: Vec<f64> = (0..n).map(|i| potential(grid.x(i))).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("potential is not finite on the grid"));
    }
    let op = Tridiagonal::new(&v[1..n - 1], h);

    let e0 = op.bisect(0)?;
    let e1 = op.bisect(1)?;
    let (log0, sign0) = op.eigenvector_log(e0)?;
    let (log1, sign1) = op.eigenvector_log(e1)?;

    let (log_psi0, psi0) = assemble(&log0, &sign0, h);
    let (_, mut psi1) = assemble(&log1, &sign1, h);

    if psi0.iter().any(|&p| p < 0.0) {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    // sign convention for Psi1 without a potential spec: positive on the right lobe
    let (imax, _) = psi1
        .iter()
        .enumerate()
        .skip(n / 2)
        .fold((n / 2, 0.0f64), |acc, (i, &p)| if p.abs() > acc.1 { (i, p.abs()) } else { acc });
    if psi1[imax] < 0.0 {
        psi1.iter_mut().for_each(|p| *p = -*p);
    }

    let edge = psi0[1].abs().max(psi0[n - 2].abs()).max(psi1[1].abs()).max(psi1[n - 2].abs());
    if edge > BOUNDARY_AMPLITUDE_LIMIT {
        return Err(Error::GridTooSmall { amplitude: edge, limit: BOUNDARY_AMPLITUDE_LIMIT });
    }

    Ok(SpectralResult {
        grid: *grid,
        potential: v,
        e0,
        e1,
        gap: e1 - e0,
        psi0,
        psi1,
        log_psi0,
    })
}

/// Pads with the boundary nodes and normalises. Returns `(ln|psi|, psi)`.
fn assemble(log_abs: &[f64], sign: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let max = log_abs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = log_abs.iter().map(|l| (2.0 * (l - max)).exp()).sum::<f64>() * h;
    let shift = max + 0.5 * norm.ln();
    let mut logs = Vec::with_capacity(log_abs.len() + 2);
    logs.push(f64::NEG_INFINITY);
    logs.extend(log_abs.iter().map(|l| l - shift));
    logs.push(f64::NEG_INFINITY);
    let mut psi = Vec::with_capacity(logs.len());
    psi.push(0.0);
    psi.extend(logs[1..logs.len() - 1].iter().zip(sign).map(|(l, s)| s * l.exp()));
    psi.push(0.0);
    (logs, psi)
}

/// Symmetric tridiagonal matrix with constant off-diagonal, as produced by the
/// three-point Laplacian.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
    /// Squared grid spacing.
    h2: f64,
    potential: Vec<f64>,
}

impl Tridiagonal {
    fn new(potential: &[f64], h: f64) -> Self {
        let h2 = h * h;
        Tridiagonal {
            diag: potential.iter().map(|v| 1.0 / h2 + v).collect(),
            off: -0.5 / h2,
            h2,
            potential: potential.to_vec(),
        }
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (j, d) in self.diag.iter().enumerate() {
            q = if j == 0 { d - lambda } else { d - lambda - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + lambda.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// k-th smallest eigenvalue by bisection.
    fn bisect(&self, k: usize) -> Result<f64> {
        let r = 2.0 * self.off.abs();
        let mut lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
        let mut hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
        const MAX_ITER: usize = 200;
        for _ in 0..MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::NoConvergence { iterations: MAX_ITER, residual: hi - lo })
    }

    /// Eigenvector for an (accurate) eigenvalue as `(ln|psi_j|, sign_j)`,
    /// unnormalised.
    fn eigenvector_log(&self, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.diag.len();
        // psi_{j+1} = c_j psi_j - psi_{j-1}
        let c: Vec<f64> = self.potential.iter().map(|v| 2.0 + 2.0 * self.h2 * (v - lambda)).collect();
        let tiny = f64::MIN_POSITIVE.sqrt();
        let guard = |x: f64| if x == 0.0 { tiny } else { x };

        // forward ratios rho_j = psi_j / psi_{j-1}, j = 1..m-1
        let mut rho = vec![0.0; m];
        if m > 1 {
            rho[1] = guard(c[0]);
            for j in 1..m - 1 {
                rho[j + 1] = guard(c[j] - 1.0 / rho[j]);
            }
        }
        // backward ratios sigma_j = psi_j / psi_{j+1}, j = 0..m-2
        let mut sigma = vec![0.0; m];
        if m > 1 {
            sigma[m - 2] = guard(c[m - 1]);
            for j in (1..m - 1).rev() {
                sigma[j - 1] = guard(c[j] - 1.0 / sigma[j]);
            }
        }
        // twist index: smallest residual of the one equation not enforced
        let gamma = |k: usize| {
            let left = if k > 0 { 1.0 / rho[k] } else { 0.0 };
            let right = if k + 1 < m { 1.0 / sigma[k] } else { 0.0 };
            (left + right - c[k]).abs()
        };
        let twist = (0..m)
            .min_by(|&a, &b| gamma(a).total_cmp(&gamma(b)))
            .expect("nonempty");
        let residual = gamma(twist) * self.off.abs();
        if !residual.is_finite() || residual > 1e-6 * (1.0 + lambda.abs()) {
            return Err(Error::NoConvergence { iterations: m, residual });
        }

        let mut log = vec![0.0; m];
        let mut sign = vec![1.0; m];
        for j in (0..twist).rev() {
            let r = rho[j + 1];
            log[j] = log[j + 1] - r.abs().ln();
            sign[j] = sign[j + 1] * r.signum();
        }
        for j in twist + 1..m {
            let s = sigma[j - 1];
            log[j] = log[j - 1] - s.abs().ln();
            sign[j] = sign[j - 1] * s.signum();
        }
        Ok((log, sign))
    }
}

/// WKB estimate `8 sqrt(g/pi) exp(-2g/3)` of the quartic double-well gap.
pub fn wkb_gap(g: f64) -> f64 {
    8.0 * (g / std::f64::consts::PI).sqrt() * (-2.0 * g / 3.0).exp()
}

/// Kramers activation time `2 pi / sqrt(V''(x_min) |V''(0)|) * exp(2 dV)`.
pub fn kramers_activation_time(barrier: f64, curvature_min: f64, curvature_top: f64) -> Result<f64> {
    if !(curvature_min > 0.0) {
        return Err(Error::invalid(format!("curvature at the minimum must be positive, got {curvature_min}")));
    }
    if !(curvature_top < 0.0) {
        return Err(Error::invalid(format!(
            "potential is not bistable: curvature at the top is {curvature_top}"
        )));
    }
    let prefactor = 2.0 * std::f64::consts::PI / (curvature_min * curvature_top.abs()).sqrt();
    Ok(prefactor * (2.0 * barrier).exp())
}

/// Shape of the effective potential `-ln Psi0` between its left minimum and
/// the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveBarrier {
    pub barrier: f64,
    pub curvature_min: f64,
    pub curvature_top: f64,
    pub x_min: f64,
    pub index_min: usize,
    pub index_top: usize,
}

impl EffectiveBarrier {
    pub fn activation_time(&self) -> Result<f64> {
        kramers_activation_time(self.barrier, self.curvature_min, self.curvature_top)
    }
}

pub fn effective_potential_profile(spectrum: &SpectralResult) -> Result<EffectiveBarrier> {
    effective_potential_from_log(&spectrum.grid, &spectrum.log_psi0)
}

/// Works directly on `ln Psi0` tabulated on `grid`.
pub fn effective_potential_from_log(grid: &Grid1D, log_psi: &[f64]) -> Result<EffectiveBarrier> {
    if log_psi.len() != grid.n_points {
        return Err(Error::invalid("log_psi length does not match the grid"));
    }
    let top = grid.nearest_index(0.0);
    // argmax of Psi0 over nodes with x <= 0
    let index_min = (0..=top)
        .filter(|&i| log_psi[i].is_finite())
        .max_by(|&a, &b| log_psi[a].total_cmp(&log_psi[b]))
        .ok_or_else(|| Error::invalid("Psi0 vanishes on the whole left half"))?;
    let lo = index_min.saturating_sub(1);
    let hi = (top + 1).min(grid.n_points - 1);
    if lo == index_min || hi == top {
        return Err(Error::invalid("evaluation window touches the grid boundary"));
    }
    if log_psi[lo..=hi].iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("Psi0 is not strictly positive in the evaluation window"));
    }
    let veff = |i: usize| -log_psi[i];
    let h2 = grid.spacing().powi(2);
    let curvature = |i: usize| (veff(i + 1) - 2.0 * veff(i) + veff(i - 1)) / h2;
    Ok(EffectiveBarrier {
        barrier: veff(top) - veff(index_min),
        curvature_min: curvature(index_min),
        curvature_top: curvature(top),
        x_min: grid.x(index_min),
        index_min,
        index_top: top,
    })
}

/// Under-barrier WKB amplitude of the single-well state at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbAmplitude {
    /// `Psi_R(0) = exp(-int_0^a sqrt(2 (V - E0)) ds)`.
    pub psi_r0: f64,
    /// `Psi_R'(0) = sqrt(2 (V(0) - E0)) Psi_R(0)`.
    pub dpsi_r0: f64,
    pub turning_point: f64,
    /// `Psi_R(0) * Psi_R'(0)`, proportional to the gap up to a g-independent
    /// constant (see [`WkbAmplitude::calibrate`]).
    pub gap_estimate: f64,
}

impl WkbAmplitude {
    /// Constant that maps `gap_estimate` onto a reference gap.
    pub fn calibrate(&self, reference_gap: f64) -> f64 {
        reference_gap / self.gap_estimate
    }
}

pub fn wkb_single_well_amplitude(spec: &PotentialSpec, e0: f64, grid: &Grid1D) -> Result<WkbAmplitude> {
    let f = |x: f64| spec.value(x) - e0;
    if f(0.0) <= 0.0 {
        return Err(Error::NoTurningPoint(format!(
            "E0 = {e0} is not below the barrier top V(0) = {}",
            spec.value(0.0)
        )));
    }
    let xr = spec.right_minimum();
    let h = grid.spacing();
    // nodes in (0, x_R); first sign change brackets the turning point
    let mut nodes = vec![0.0];
    let mut x = grid.x(grid.nearest_index(0.0));
    if x <= 0.0 {
        x += h;
    }
    let mut bracket = None;
    while x < xr {
        if f(x) <= 0.0 {
            bracket = Some((*nodes.last().unwrap(), x));
            break;
        }
        nodes.push(x);
        x += h;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::NoTurningPoint(format!("V(x) = {e0} has no root in (0, {xr})"))
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    nodes.push(a);
    let momentum = |x: f64| (2.0 * f(x)).max(0.0).sqrt();
    let mut integral = 0.0;
    for w in nodes.windows(2) {
        let pb = if w[1] == a { 0.0 } else { momentum(w[1]) };
        integral += 0.5 * (w[1] - w[0]) * (momentum(w[0]) + pb);
    }
    let psi_r0 = (-integral).exp();
    let dpsi_r0 = momentum(0.0) * psi_r0;
    Ok(WkbAmplitude { psi_r0, dpsi_r0, turning_point: a, gap_estimate: psi_r0 * dpsi_r0 })
}

/// Header comment line of the spectrum CSV.
pub const SPECTRUM_CSV_HEADER: &str = "# pqmc spectrum v1";

/// Writes the header comment, then `x,V,psi0,psi1` rows.
pub fn write_spectrum_csv<W: Write>(spectrum: &SpectralResult, mut out: W) -> Result<()> {
    writeln!(out, "{SPECTRUM_CSV_HEADER}")?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["x", "V", "psi0", "psi1"])?;
    for i in 0..spectrum.grid.n_points {
        writer.write_record(&[
            spectrum.grid.x(i).to_string(),
            spectrum.potential[i].to_string(),
            spectrum.psi0[i].to_string(),
            spectrum.psi1[i].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
