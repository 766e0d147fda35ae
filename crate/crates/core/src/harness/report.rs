use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::convergence::ConvergenceReport;
use crate::error::Result;
use crate::noise::CovarianceAssembly;

pub const ERRORS_HEADER: &str = "H,h,rmse,stderr,paths";
pub const SLOPES_HEADER: &str = "H,slope,residual";

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn errors_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{ERRORS_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{},{}", num(r.hurst), num(r.h), num(r.rmse), num(r.stderr), r.paths);
    }
    s
}

pub fn slopes_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{SLOPES_HEADER}\n");
    for r in &report.slopes {
        let _ = writeln!(s, "{},{},{}", num(r.hurst), num(r.fit.slope), num(r.fit.residual));
    }
    s
}

pub fn manifest(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "expfbm {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "seed = {}", report.seed);
    let _ = writeln!(s, "config_hash = {:016x}", report.config_hash);
    for (h, n) in &report.aborted {
        let _ = writeln!(s, "aborted_paths[H={h:?}] = {n}");
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "\n[config]");
    s.push_str(&report.config);
    s
}

/// Writes `errors.csv`, `slopes.csv` and `manifest.txt` into `dir`, creating it if needed.
pub fn emit_report(report: &ConvergenceReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("errors.csv", errors_csv(report)),
        ("slopes.csv", slopes_csv(report)),
        ("manifest.txt", manifest(report)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Full covariance matrix, one CSV row per matrix row, no header.
pub fn covariance_csv(asm: &CovarianceAssembly) -> String {
    let mut s = String::new();
    for row in asm.matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| num(*x)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn covariance_diagnostics(asm: &CovarianceAssembly) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "size = {}", asm.size());
    let _ = writeln!(s, "steps = {}", asm.steps());
    let _ = writeln!(s, "dimension = {}", asm.n);
    let _ = writeln!(s, "hurst = {}", asm.hurst);
    let _ = writeln!(s, "jitter = {}", num(asm.jitter));
    let _ = writeln!(s, "max_rel_change = {}", num(asm.max_rel_change));
    let _ = writeln!(s, "reconstruction_error = {}", num(asm.reconstruction_error()));
    let _ = writeln!(s, "quadrature_warnings = {}", asm.warnings.len());
    for w in &asm.warnings {
        let _ = writeln!(s, "warning block ({}, {}) rel_change = {}", w.k, w.l, num(w.rel_change));
    }
    s
}
