//! Power-law fits `xi = alpha Delta^{-b}` by weighted least squares in log
//! space, with bootstrap errors over repetitions.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::population::{repetition_rng, summarize};

pub const DEFAULT_FIT_WINDOW: usize = 5;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;
/// Smallest number of points a fit accepts.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub gap: f64,
    pub xi: f64,
    pub xi_err: f64,
}

/// A sweep point with its individual repetition times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPoint {
    pub gap: f64,
    pub samples: Vec<f64>,
}

impl SampledPoint {
    pub fn to_fit_point(&self) -> Result<FitPoint> {
        let s = summarize(&self.samples)?;
        Ok(FitPoint { gap: self.gap, xi: s.mean, xi_err: s.stderr })
    }
}

/// The `size` points with the smallest gaps after skipping the `offset`
/// smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitWindow {
    pub size: usize,
    pub offset: usize,
}

impl FitWindow {
    pub fn smallest(size: usize) -> Self {
        FitWindow { size, offset: 0 }
    }
}

impl fmt::Display for FitWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offset == 0 {
            write!(f, "{} smallest gaps", self.size)
        } else {
            write!(f, "{} smallest gaps after skipping {}", self.size, self.offset)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub b: f64,
    pub alpha_err: f64,
    /// Larger of the covariance and bootstrap estimates.
    pub b_err: f64,
    pub b_err_covariance: f64,
    pub b_err_bootstrap: Option<f64>,
    pub points_used: usize,
    pub fit_window: FitWindow,
}

fn select(points: &[FitPoint], window: FitWindow) -> Result<Vec<FitPoint>> {
    if window.size < MIN_FIT_POINTS {
        return Err(Error::invalid(format!("a fit needs at least {MIN_FIT_POINTS} points")));
    }
    for p in points {
        if !(p.gap > 0.0 && p.xi > 0.0 && p.gap.is_finite() && p.xi.is_finite()) {
            return Err(Error::invalid(format!("fit points need positive gap and time, got {p:?}")));
        }
    }
    if points.len() < window.offset + window.size {
        return Err(Error::invalid(format!(
            "window `{window}` needs {} points, only {} available",
            window.offset + window.size,
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    Ok(sorted[window.offset..window.offset + window.size].to_vec())
}

/// Fit over the `window` smallest gaps.
pub fn fit_power_law(points: &[FitPoint], window: usize) -> Result<PowerLawFit> {
    fit_power_law_window(points, FitWindow::smallest(window))
}

/// Weighted least squares of `ln xi = ln alpha - b ln Delta` with weights
/// `(xi / xi_err)^2`. If any error is zero the points are weighted equally
/// and the parameter errors come from the residual scatter.
pub fn fit_power_law_window(points: &[FitPoint], window: FitWindow) -> Result<PowerLawFit> {
    let pts = select(points, window)?;
    let relative = pts.iter().all(|p| p.xi_err > 0.0 && p.xi_err.is_finite());
    let data: Vec<(f64, f64, f64)> = pts
        .iter()
        .map(|p| {
            let w = if relative { (p.xi / p.xi_err).powi(2) } else { 1.0 };
            (p.gap.ln(), p.xi.ln(), w)
        })
        .collect();
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d.0), hi.max(d.0)));
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return Err(Error::invalid("all gaps in the fit window are equal"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &data {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (s * sxy - sx * sy) / det;
    let mut var_intercept = sxx / det;
    let mut var_slope = s / det;
    if !relative {
        let dof = data.len() - 2;
        let rss: f64 = data.iter().map(|&(x, y, _)| (y - intercept - slope * x).powi(2)).sum();
        let scale = if dof > 0 { rss / dof as f64 } else { 0.0 };
        var_intercept *= scale;
        var_slope *= scale;
    }
    let alpha = intercept.exp();
    let b_err = var_slope.max(0.0).sqrt();
    Ok(PowerLawFit {
        alpha,
        b: -slope,
        alpha_err: alpha * var_intercept.max(0.0).sqrt(),
        b_err,
        b_err_covariance: b_err,
        b_err_bootstrap: None,
        points_used: pts.len(),
        fit_window: window,
    })
}

/// Standard deviation of `b` over `resamples` bootstrap replicas, each
/// resampling the repetitions of every point with replacement.
pub fn bootstrap_exponent_error(
    points: &[SampledPoint],
    window: FitWindow,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if resamples < 2 {
        return Err(Error::invalid("the bootstrap needs at least two resamples"));
    }
    let mut sorted: Vec<&SampledPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    if sorted.len() < window.offset + window.size {
        return Err(Error::invalid(format!("window `{window}` exceeds the {} available points", sorted.len())));
    }
    let chosen = &sorted[window.offset..window.offset + window.size];
    let mut rng = repetition_rng(seed, 0);
    let mut exponents = Vec::with_capacity(resamples);
    let mut resampled = Vec::new();
    for _ in 0..resamples {
        let mut fit_points = Vec::with_capacity(chosen.len());
        for p in chosen {
            resampled.clear();
            resampled.extend((0..p.samples.len()).map(|_| p.samples[rng.random_range(0..p.samples.len())]));
            let s = summarize(&resampled)?;
            fit_points.push(FitPoint { gap: p.gap, xi: s.mean, xi_err: s.stderr });
        }
        if let Ok(fit) = fit_power_law_window(&fit_points, FitWindow::smallest(fit_points.len())) {
            exponents.push(fit.b);
        }
    }
    if exponents.len() < 2 {
        return Err(Error::invalid("too few bootstrap replicas could be fitted"));
    }
    let mean = exponents.iter().sum::<f64>() / exponents.len() as f64;
    let var = exponents.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (exponents.len() - 1) as f64;
    Ok(var.sqrt())
}

/// Covariance fit plus bootstrap; `b_err` is the larger of the two errors.
pub fn fit_sampled(points: &[SampledPoint], window: FitWindow, resamples: usize, seed: u64) -> Result<PowerLawFit> {
    let fit_points = points.iter().map(SampledPoint::to_fit_point).collect::<Result<Vec<_>>>()?;
    let mut fit = fit_power_law_window(&fit_points, window)?;
    if resamples > 0 {
        let boot = bootstrap_exponent_error(points, window, resamples, seed)?;
        fit.b_err_bootstrap = Some(boot);
        fit.b_err = fit.b_err_covariance.max(boot);
    }
    Ok(fit)
}

/// Fits with the window shifted by one point and resized by one, where the
/// data allow it.
pub fn window_variants(n_points: usize, window: FitWindow) -> Vec<FitWindow> {
    let mut out = Vec::new();
    for w in [
        FitWindow { size: window.size, offset: window.offset + 1 },
        FitWindow { size: window.size, offset: window.offset.wrapping_sub(1) },
        FitWindow { size: window.size + 1, offset: window.offset },
        FitWindow { size: window.size.wrapping_sub(1), offset: window.offset },
    ] {
        if w.offset <= n_points && w.size >= MIN_FIT_POINTS && w.size <= n_points && w.offset + w.size <= n_points {
            out.push(w);
        }
    }
    out
}
