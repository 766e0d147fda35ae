//! Convergence experiments: configuration, the strong-error study, slope
//! fits and report files.

mod config;
mod convergence;
mod regression;
mod report;

pub use config::{
    parse_config, DriftSpec, ErrorMode, ExperimentConfig, NoiseMode, ProblemSpec, EXACT_NOISE_MAX_STEPS,
};
pub use convergence::{
    holder_exponent, run_convergence, run_covariance, run_simulation, run_stability, ConvergenceReport,
    ConvergenceRow, NoiseSource, SlopeRow, MAX_ABORT_FRACTION,
};
pub use regression::{fit_loglog, fit_slope, SlopeFit};
pub use report::{
    covariance_csv, covariance_diagnostics, emit_report, errors_csv, manifest, slopes_csv, ERRORS_HEADER,
    SLOPES_HEADER,
};
