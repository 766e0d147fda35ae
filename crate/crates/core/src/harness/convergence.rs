use log::{info, warn};
use rayon::prelude::*;

use super::config::{ErrorMode, ExperimentConfig, NoiseMode};
use super::regression::{fit_loglog, SlopeFit};
use crate::error::{Error, Result};
use crate::integrator::{Integrator, SemiLinearProblem, Trajectory};
use crate::matfun::norm_bundle;
use crate::noise::{
    assemble_covariance, Aggregator, AssemblyOptions, CovarianceAssembly, ExactNoiseSampler, FbmSampler,
    GeneratorTag, NoiseBlock, RiemannOracle, TimeGrid, DEFAULT_ASSEMBLY_CAP,
};
use crate::stability::{assess, StabilityAssessment};

/// Largest tolerated fraction of diverged paths.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;

/// Per-path noise on one grid, either exact or from left-point sums of fBm increments.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    Exact(ExactNoiseSampler),
    Riemann {
        sampler: FbmSampler,
        oracle: RiemannOracle,
    },
}

impl NoiseSource {
    pub fn new(problem: &SemiLinearProblem, grid: &TimeGrid, mode: NoiseMode, quadrature_order: usize) -> Result<Self> {
        if problem.noise_count() == 0 {
            return Err(Error::invalid("the problem has no noise terms"));
        }
        match mode {
            NoiseMode::ExactCholesky => {
                let options = AssemblyOptions {
                    order: quadrature_order,
                    cap: DEFAULT_ASSEMBLY_CAP,
                };
                let assemblies = problem
                    .noise()
                    .iter()
                    .map(|b| assemble_covariance(problem.a(), b, grid, problem.hurst(), options))
                    .collect::<Result<Vec<CovarianceAssembly>>>()?;
                let warnings: usize = assemblies.iter().map(|a| a.warnings.len()).sum();
                if warnings > 0 {
                    warn!("{warnings} covariance blocks did not meet the quadrature tolerance");
                }
                Ok(NoiseSource::Exact(ExactNoiseSampler::new(assemblies)?))
            }
            NoiseMode::RiemannOracle => Ok(NoiseSource::Riemann {
                sampler: FbmSampler::new(grid, problem.hurst())?,
                oracle: RiemannOracle::new(problem.a(), problem.noise(), grid)?,
            }),
        }
    }

    /// Single-path block for path `p`.
    pub fn path(&self, seed: u64, p: usize) -> Result<NoiseBlock> {
        match self {
            NoiseSource::Exact(s) => s.sample_single(seed, p),
            NoiseSource::Riemann { sampler, oracle } => {
                let increments: Vec<Vec<f64>> =
                    (0..oracle.noise_count()).map(|i| sampler.increments(seed, p, i)).collect();
                let series: Vec<&[f64]> = increments.iter().map(Vec::as_slice).collect();
                NoiseBlock::new(
                    sampler.grid().clone(),
                    sampler.hurst(),
                    1,
                    oracle.noise_count(),
                    oracle.dim(),
                    oracle.apply_path(&series),
                    GeneratorTag::RiemannOracle,
                    seed,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub hurst: f64,
    pub h: f64,
    pub steps: usize,
    pub rmse: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeRow {
    pub hurst: f64,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeRow>,
    pub config: String,
    pub config_hash: u64,
    pub seed: u64,
    /// Diverged paths per Hurst value.
    pub aborted: Vec<(f64, usize)>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    pub fn rows_for(&self, hurst: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.hurst == hurst)
    }

    pub fn slope_for(&self, hurst: f64) -> Option<f64> {
        self.slopes.iter().find(|s| s.hurst == hurst).map(|s| s.fit.slope)
    }

    pub fn rmse(&self, hurst: f64, steps: usize) -> Option<f64> {
        self.rows_for(hurst).find(|r| r.steps == steps).map(|r| r.rmse)
    }
}

struct CoarseLevel {
    grid: TimeGrid,
    aggregator: Aggregator,
    /// Indices of the coarse points in the reference grid.
    indices: Vec<usize>,
}

fn path_errors(
    p: usize,
    seed: u64,
    source: &NoiseSource,
    reference: &Integrator,
    levels: &[(CoarseLevel, Integrator)],
    mode: ErrorMode,
) -> Result<Vec<f64>> {
    let fine = source.path(seed, p)?;
    let checksum = fine.checksum();
    let summed = fine.summed();
    let exact = reference.run(&summed, 0)?;
    levels
        .iter()
        .map(|(level, integrator)| {
            let coarse = level.aggregator.apply(&summed)?;
            if coarse.root_checksum() != checksum {
                return Err(Error::RunFailure(format!("path {p}: coarse noise is not derived from the fine noise")));
            }
            let traj = integrator.run(&coarse, 0)?;
            let err = |k: usize| (&traj.states[k] - &exact.states[level.indices[k]]).norm();
            Ok(match mode {
                ErrorMode::Endpoint => err(level.grid.steps()),
                ErrorMode::Sup => (0..=level.grid.steps()).map(err).fold(0.0, f64::max),
            })
        })
        .collect()
}

/// RMSE and its delta-method standard error.
fn rmse_with_stderr(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = sq.iter().sum::<f64>() / n;
    let rmse = mse.sqrt();
    if errors.len() < 2 || rmse == 0.0 {
        return (rmse, 0.0);
    }
    let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1.0);
    (rmse, (var / n).sqrt() / (2.0 * rmse))
}

/// Strong-error study: for every Hurst value and path, one fine noise
/// realisation drives the reference solution and, after exact aggregation,
/// every coarse solution.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let mut coarse_steps = cfg.coarse_steps.clone();
    coarse_steps.sort_unstable();
    coarse_steps.dedup();

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut aborted = Vec::new();
    let mut warnings = Vec::new();

    for &hv in &cfg.hurst_values {
        let problem = cfg.build_problem(hv)?;
        let (t0, t1) = (problem.t0(), problem.t_end());
        let fine_grid = TimeGrid::uniform(t0, t1, cfg.ref_steps)?;
        info!("H = {hv}: preparing {} noise on {} steps", cfg.noise_mode(), cfg.ref_steps);
        let source = NoiseSource::new(&problem, &fine_grid, cfg.noise_mode(), cfg.quadrature_order)?;
        let reference = Integrator::new(&problem, &fine_grid)?;
        let levels = coarse_steps
            .iter()
            .map(|&n| {
                let grid = TimeGrid::uniform(t0, t1, n)?;
                let level = CoarseLevel {
                    aggregator: Aggregator::new(problem.a(), &fine_grid, &grid)?,
                    indices: fine_grid.nested_indices(&grid)?,
                    grid: grid.clone(),
                };
                Ok((level, Integrator::new(&problem, &grid)?))
            })
            .collect::<Result<Vec<_>>>()?;

        let outcomes: Vec<Result<Vec<f64>>> = (0..cfg.paths)
            .into_par_iter()
            .map(|p| path_errors(p, cfg.seed, &source, &reference, &levels, cfg.error_mode))
            .collect();

        let mut per_level: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.paths); levels.len()];
        let mut failed = 0;
        for (p, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(errs) => {
                    for (acc, e) in per_level.iter_mut().zip(errs) {
                        acc.push(e);
                    }
                }
                Err(Error::Divergence { step }) => {
                    warn!("H = {hv}: path {p} diverged at step {step}");
                    failed += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if failed as f64 > MAX_ABORT_FRACTION * cfg.paths as f64 {
            return Err(Error::RunFailure(format!(
                "H = {hv}: {failed} of {} paths diverged (limit {:.1}%)",
                cfg.paths,
                100.0 * MAX_ABORT_FRACTION
            )));
        }
        aborted.push((hv, failed));

        let mut points = Vec::new();
        let mut previous: Option<f64> = None;
        for ((level, _), errs) in levels.iter().zip(&per_level) {
            let (rmse, stderr) = rmse_with_stderr(errs);
            let h = (t1 - t0) / level.grid.steps() as f64;
            if let Some(prev) = previous {
                if rmse >= prev {
                    let msg = format!("H = {hv}: rmse does not decrease at N = {}", level.grid.steps());
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
            previous = Some(rmse);
            rows.push(ConvergenceRow {
                hurst: hv,
                h,
                steps: level.grid.steps(),
                rmse,
                stderr,
                paths: errs.len(),
            });
            points.push((h, rmse));
        }
        if points.len() >= 3 && points.iter().all(|p| p.1 > 0.0) {
            let fit = fit_loglog(&points)?;
            info!("H = {hv}: slope {:.4}", fit.slope);
            slopes.push(SlopeRow { hurst: hv, fit });
        }
    }

    Ok(ConvergenceReport {
        rows,
        slopes,
        config: cfg.canonical(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        aborted,
        warnings,
    })
}

fn first_hurst(cfg: &ExperimentConfig) -> f64 {
    cfg.hurst_values[0]
}

/// One trajectory of the configured problem on `cfg.steps` uniform steps,
/// at the first Hurst value and path 0.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let problem = cfg.build_problem(first_hurst(cfg))?;
    let grid = TimeGrid::uniform(problem.t0(), problem.t_end(), cfg.steps)?;
    let source = NoiseSource::new(&problem, &grid, cfg.noise_mode_for(cfg.steps), cfg.quadrature_order)?;
    let noise = source.path(cfg.seed, 0)?.summed();
    Integrator::new(&problem, &grid)?.run(&noise, 0)
}

/// Stability assessment of the configured matrix with the configured or declared Lipschitz constant.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityAssessment> {
    cfg.validate()?;
    let problem = cfg.build_problem(first_hurst(cfg))?;
    let k = cfg
        .lipschitz
        .or(problem.constants().lipschitz)
        .ok_or_else(|| Error::invalid("no Lipschitz constant given or declared"))?;
    assess(&norm_bundle(problem.a())?, k)
}

/// Covariance of the convolution increments of noise term `cfg.noise_index`
/// on `cfg.steps` uniform steps.
pub fn run_covariance(cfg: &ExperimentConfig) -> Result<CovarianceAssembly> {
    cfg.validate()?;
    let problem = cfg.build_problem(first_hurst(cfg))?;
    let grid = TimeGrid::uniform(problem.t0(), problem.t_end(), cfg.steps)?;
    assemble_covariance(
        problem.a(),
        &problem.noise()[cfg.noise_index],
        &grid,
        problem.hurst(),
        AssemblyOptions {
            order: cfg.quadrature_order,
            cap: DEFAULT_ASSEMBLY_CAP,
        },
    )
}

/// Fits `ln E|U_{t+d} - U_t|^2` against `ln d` for lags `d = lag * h` on `grid`,
/// pooling all start points and paths.
pub fn holder_exponent(
    problem: &SemiLinearProblem,
    grid: &TimeGrid,
    mode: NoiseMode,
    lags: &[usize],
    paths: usize,
    seed: u64,
) -> Result<SlopeFit> {
    if !grid.is_uniform() {
        return Err(Error::invalid("increment regression needs a uniform grid"));
    }
    let source = NoiseSource::new(problem, grid, mode, crate::noise::DEFAULT_QUADRATURE_ORDER)?;
    let integrator = Integrator::new(problem, grid)?;
    let sums: Vec<Vec<(f64, usize)>> = (0..paths)
        .into_par_iter()
        .map(|p| -> Result<Vec<(f64, usize)>> {
            let traj = integrator.run(&source.path(seed, p)?.summed(), 0)?;
            Ok(lags
                .iter()
                .map(|&lag| {
                    let s = traj.states.len();
                    let total: f64 = (0..s.saturating_sub(lag))
                        .map(|k| (&traj.states[k + lag] - &traj.states[k]).norm_squared())
                        .sum();
                    (total, s.saturating_sub(lag))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let h = grid.step(0);
    let points: Vec<(f64, f64)> = lags
        .iter()
        .enumerate()
        .map(|(j, &lag)| {
            let (total, count) = sums
                .iter()
                .fold((0.0, 0usize), |(t, c), row| (t + row[j].0, c + row[j].1));
            (lag as f64 * h, total / count as f64)
        })
        .collect();
    fit_loglog(&points)
}
