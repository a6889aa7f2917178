//! Experiment orchestration: configuration, sweeps, fits and output files.

mod config;
mod fit;
mod report;
mod sweep;
mod table;

pub use config::{ExperimentConfig, ExperimentKind, FitSettings, GwfChoice, Protocol, SweepAxis, System};
pub use fit::{
    bootstrap_exponent_error, fit_power_law, fit_power_law_window, fit_sampled, window_variants, FitPoint, FitWindow,
    PowerLawFit, SampledPoint, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_FIT_WINDOW, MIN_FIT_POINTS,
};
pub use report::{emit_report, fit_table, reference_fit, table_entries, ReferenceFit, Report, TableEntry, REPORT_HEADER};
pub use sweep::{
    build_gwf_1d, build_gwf_spin, point_seed, run_sweep, PointResult, SweepResult, MAX_TABULATED_SPINS,
};
pub use table::{
    read_samples, write_samples, DmcRow, GapRow, ResultTable, SampleRow, SpinRow, DMC_ROWS_HEADER, GAP_ROWS_HEADER,
    SAMPLES_HEADER, SPIN_ROWS_HEADER,
};
