//! Plain-text report of a sweep and its fits.

use std::fmt::Write as _;

use crate::error::Result;
use crate::population::FIT_ELIGIBLE_FRACTION;

use super::config::System;
use super::fit::{fit_power_law_window, fit_sampled, window_variants, FitPoint, FitWindow, PowerLawFit, SampledPoint};
use super::table::{ResultTable, SampleRow};

pub const REPORT_HEADER: &str = "# pqmc report v1";

/// Published `(value, error)` pairs for a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFit {
    pub alpha: Option<(f64, f64)>,
    pub b: (f64, f64),
}

/// Reference exponents by system and guiding wave function.
pub fn reference_fit(system: &str, gwf_mode: &str) -> Option<ReferenceFit> {
    let r = |a: f64, ae: f64, b: f64, be: f64| Some(ReferenceFit { alpha: Some((a, ae)), b: (b, be) });
    match (system, gwf_mode) {
        ("quartic", "none") => r(109.0, 11.0, 0.99, 0.02),
        ("quartic", "boltzmann") => r(98.0, 16.0, 1.01, 0.03),
        ("quartic", "exact") => r(112.0, 8.0, 0.99, 0.01),
        ("plateau", "exact") => r(23.0, 1.0, 0.993, 0.007),
        ("chain", "none") => r(0.7, 0.2, 0.97, 0.03),
        ("chain", "urbm") => r(0.32, 0.09, 1.00, 0.02),
        ("chain", "boltzmann") => r(0.28, 0.05, 0.96, 0.03),
        ("shamrock", "boltzmann") => r(0.32, 0.07, 1.04, 0.03),
        ("shamrock", "none") => Some(ReferenceFit { alpha: None, b: (0.98, 0.02) }),
        _ => None,
    }
}

/// One row of a tunneling table with the quantities a fit needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub system: Option<System>,
    pub gwf_mode: String,
    pub gap: Option<f64>,
    pub xi_mean: f64,
    pub xi_stderr: f64,
    pub reps: usize,
    pub censored: usize,
}

impl TableEntry {
    pub fn fit_eligible(&self) -> bool {
        self.gap.is_some()
            && self.xi_mean.is_finite()
            && self.xi_mean > 0.0
            && (self.reps - self.censored.min(self.reps)) as f64 >= FIT_ELIGIBLE_FRACTION * self.reps as f64
    }
}

/// Rebuilds systems from the row columns and recomputes their gaps.
pub fn table_entries(table: &ResultTable) -> Vec<TableEntry> {
    let entry = |name: &str, params: &str, gwf: &str, xi: f64, err: f64, reps: usize, censored: usize| {
        let system = System::from_name_params(name, params).ok();
        let gap = system.and_then(|s| s.gap().ok());
        TableEntry { system, gwf_mode: gwf.to_string(), gap, xi_mean: xi, xi_stderr: err, reps, censored }
    };
    match table {
        ResultTable::Dmc(rows) => rows
            .iter()
            .map(|r| {
                let name = if r.x0 > 0.0 { "plateau" } else { "quartic" };
                let params = format!("g={};x0={}", r.g, r.x0);
                entry(name, &params, &r.gwf_mode, r.xi_mean, r.xi_stderr, r.reps, r.censored_count)
            })
            .collect(),
        ResultTable::Spin(rows) => rows
            .iter()
            .map(|r| entry(&r.model, &r.params, &r.gwf_mode, r.xi_mean, r.xi_stderr, r.reps, r.censored_count))
            .collect(),
        ResultTable::Gap(rows) => rows
            .iter()
            .map(|r| {
                let system = System::from_name_params(&r.model, &r.params).ok();
                TableEntry {
                    system,
                    gwf_mode: String::new(),
                    gap: Some(r.gap).filter(|g| g.is_finite()),
                    xi_mean: f64::NAN,
                    xi_stderr: f64::NAN,
                    reps: 0,
                    censored: 0,
                }
            })
            .collect(),
    }
}

/// Fits a table read back from disk. With the samples file the exponent
/// error includes the bootstrap over repetitions.
pub fn fit_table(
    table: &ResultTable,
    samples: Option<&[SampleRow]>,
    window: FitWindow,
    resamples: usize,
    seed: u64,
) -> Result<PowerLawFit> {
    let entries = table_entries(table);
    match samples {
        Some(samples) => {
            let points: Vec<SampledPoint> = entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.fit_eligible())
                .map(|(i, e)| SampledPoint {
                    gap: e.gap.unwrap_or(f64::NAN),
                    samples: samples.iter().filter(|s| s.point == i).filter_map(|s| s.xi).collect(),
                })
                .collect();
            fit_sampled(&points, window, resamples, seed)
        }
        None => fit_power_law_window(&fit_points(&entries), window),
    }
}

fn fit_points(entries: &[TableEntry]) -> Vec<FitPoint> {
    entries
        .iter()
        .filter(|e| e.fit_eligible())
        .map(|e| FitPoint { gap: e.gap.unwrap_or(f64::NAN), xi: e.xi_mean, xi_err: e.xi_stderr })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    /// Configured tolerances that the fits violate.
    pub violations: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report with one line per row, the fits with their reference values and
/// window sensitivity, and a check of `b` against `b_range`. Shamrock rows
/// also list the reference curves `2^K / Delta^2` and `2^K / Delta`.
pub fn emit_report(table: &ResultTable, fits: &[(String, PowerLawFit)], b_range: Option<(f64, f64)>) -> Report {
    let entries = table_entries(table);
    let mut text = String::new();
    let _ = writeln!(text, "{REPORT_HEADER}");
    let _ = writeln!(text, "table: {}", table.header().trim_start_matches("# "));
    let _ = writeln!(text, "rows: {}", table.len());
    let _ = writeln!(text);

    let shamrock = entries.iter().any(|e| matches!(e.system, Some(System::Spin(crate::spin::SpinModel::Shamrock { .. }))));
    let tunneling = !matches!(table, ResultTable::Gap(_));
    let mut head = format!("{:<32} {:>14} {:>12}", "params", "gap", "1/gap");
    if tunneling {
        let _ = write!(head, " {:>12} {:>10} {:>8} {:>9}", "xiMean", "xiStderr", "censored", "xi*gap");
    }
    if shamrock {
        let _ = write!(head, " {:>14} {:>12}", "2^K/gap^2", "2^K/gap");
    }
    let _ = writeln!(text, "{head}");
    for e in &entries {
        let params = e.system.map(|s| s.params_string()).unwrap_or_else(|| "?".into());
        let gap = e.gap.unwrap_or(f64::NAN);
        let mut line = format!("{params:<32} {gap:>14.6e} {:>12.4}", 1.0 / gap);
        if tunneling {
            let _ = write!(
                line,
                " {:>12.4} {:>10.4} {:>8} {:>9.4}",
                e.xi_mean,
                e.xi_stderr,
                format!("{}/{}", e.censored, e.reps),
                e.xi_mean * gap
            );
        }
        if let Some(System::Spin(crate::spin::SpinModel::Shamrock { k, .. })) = e.system {
            let paths = 2f64.powi(k as i32);
            let _ = write!(line, " {:>14.6e} {:>12.4}", paths / (gap * gap), paths / gap);
        }
        let _ = writeln!(text, "{line}");
    }

    let mut violations = Vec::new();
    let points = fit_points(&entries);
    for (label, fit) in fits {
        let _ = writeln!(text);
        let _ = writeln!(text, "fit {label} over {} ({} points):", fit.fit_window, fit.points_used);
        let _ = writeln!(text, "  alpha = {:.4} +- {:.4}", fit.alpha, fit.alpha_err);
        let boot = fit.b_err_bootstrap.map(|b| format!("{b:.4}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            text,
            "  b     = {:.4} +- {:.4} (covariance {:.4}, bootstrap {boot})",
            fit.b, fit.b_err, fit.b_err_covariance
        );
        if let Some(first) = entries.first() {
            // x0 = 0 rows parse as quartic, so one plateau row marks the table
            let names: Vec<&str> = entries.iter().filter_map(|e| e.system.map(|s| s.name())).collect();
            let name = if names.contains(&"plateau") { "plateau" } else { first.system.map(|s| s.name()).unwrap_or("?") };
            if let Some(r) = reference_fit(name, &first.gwf_mode) {
                let alpha = r.alpha.map(|(a, e)| format!("alpha = {a} +- {e}, ")).unwrap_or_default();
                let _ = writeln!(text, "  reference: {alpha}b = {} +- {}", r.b.0, r.b.1);
            }
        }
        for w in window_variants(points.len(), fit.fit_window) {
            if let Ok(v) = fit_power_law_window(&points, w) {
                let _ = writeln!(text, "  window {w}: b = {:.4} +- {:.4}", v.b, v.b_err);
            }
        }
        if let Some((lo, hi)) = b_range {
            let ok = fit.b >= lo && fit.b <= hi;
            let _ = writeln!(text, "  tolerance b in [{lo}, {hi}]: {}", if ok { "PASS" } else { "FAIL" });
            if !ok {
                violations.push(format!("{label}: b = {:.4} outside [{lo}, {hi}]", fit.b));
            }
        }
    }
    Report { text, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::table::{DmcRow, SpinRow};

    fn spin_row(k: usize, xi: f64) -> SpinRow {
        SpinRow {
            model: "shamrock".into(),
            params: format!("k={k};j=6;epsilon=0.2;gamma=0.5"),
            gwf_mode: "boltzmann".into(),
            tau: 0.05,
            nw: 100,
            p: 0.1,
            reps: 10,
            xi_mean: xi,
            xi_stderr: 0.1 * xi,
            censored_count: 0,
        }
    }

    #[test]
    fn rows_only_without_fits() {
        let t = ResultTable::Dmc(vec![DmcRow {
            g: 6.0,
            x0: 0.0,
            gwf_mode: "none".into(),
            tau: 0.01,
            nw: 10,
            p: 0.25,
            xth: 0.87,
            reps: 2,
            xi_mean: 9.0,
            xi_stderr: 1.0,
            censored_count: 0,
        }]);
        let r = emit_report(&t, &[], Some((0.9, 1.1)));
        assert!(r.passed());
        assert!(r.text.starts_with(REPORT_HEADER));
        assert!(r.text.contains("g=6;x0=0"));
        assert!(!r.text.contains("fit "));
    }

    #[test]
    fn shamrock_report_lists_reference_curve() {
        let rows: Vec<SpinRow> = (1..=3).map(|k| spin_row(k, 2.5 * 2f64.powi(k as i32))).collect();
        let table = ResultTable::Spin(rows);
        let fit = fit_table(&table, None, FitWindow::smallest(3), 0, 1).unwrap();
        let r = emit_report(&table, &[("boltzmann".into(), fit.clone())], Some((5.0, 6.0)));
        assert!(r.text.contains("2^K/gap^2"));
        // K = 1: 2 / 0.4000401971945369^2
        assert!(r.text.contains(&format!("{:.6e}", 2.0 / 0.4000401971945369f64.powi(2))));
        assert!(r.text.contains("reference: alpha = 0.32"));
        assert!(!r.passed());
        assert_eq!(r.violations.len(), 1);
        assert!(r.text.contains("FAIL"));
    }

    #[test]
    fn plateau_table_uses_plateau_reference() {
        let rows: Vec<DmcRow> = [0.0, 0.5, 1.0]
            .iter()
            .zip([20.0, 70.0, 270.0])
            .map(|(&x0, xi)| DmcRow {
                g: 8.0,
                x0,
                gwf_mode: "exact".into(),
                tau: 0.02,
                nw: 100,
                p: 0.25,
                xth: 1.0,
                reps: 4,
                xi_mean: xi,
                xi_stderr: 0.05 * xi,
                censored_count: 0,
            })
            .collect();
        let table = ResultTable::Dmc(rows);
        let fit = fit_table(&table, None, FitWindow::smallest(3), 0, 1).unwrap();
        let r = emit_report(&table, &[("exact".into(), fit)], None);
        assert!(r.text.contains("reference: alpha = 23 +- 1, b = 0.993"), "{}", r.text);
    }

    #[test]
    fn censored_rows_are_excluded() {
        let mut rows: Vec<SpinRow> = (1..=4).map(|k| spin_row(k, 3.0 * 2.5f64.powi(k as i32))).collect();
        rows[0].censored_count = 1;
        let entries = table_entries(&ResultTable::Spin(rows.clone()));
        assert!(!entries[0].fit_eligible() && entries[1].fit_eligible());
        let fit = fit_table(&ResultTable::Spin(rows), None, FitWindow::smallest(3), 0, 1).unwrap();
        assert_eq!(fit.points_used, 3);
    }
}
