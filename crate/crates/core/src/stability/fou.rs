use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{Drift, Integrator, SemiLinearProblem};
use crate::matfun::SquareMatrix;
use crate::noise::{
    FbmSampler, GeneratorTag, HurstParameter, NoiseBlock, NoiseCoefficient, NormalStream, RiemannOracle, TimeGrid,
};

/// Largest admissible `e^{-alpha W}` for a truncation window `W`.
pub const FOU_TAIL_LIMIT: f64 = 1e-8;

/// `dX = -alpha X dt + sum_i b_i(t) dB^H_i(t)`, with the stationary solution
/// approximated over a truncated window `[t - W, t]`.
#[derive(Debug, Clone)]
pub struct FouConfig {
    pub alpha: f64,
    pub noise: Vec<NoiseCoefficient>,
    pub hurst: HurstParameter,
    pub window: f64,
    pub fine_steps: usize,
}

impl FouConfig {
    /// `b = 1`, window `20 / alpha`, 1024 graded steps.
    pub fn new(alpha: f64, hurst: HurstParameter) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha {alpha} must be positive")));
        }
        Ok(Self {
            alpha,
            noise: vec![NoiseCoefficient::basis(1, 0)],
            hurst,
            window: 20.0 / alpha,
            fine_steps: 1024,
        })
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = window;
        self
    }

    pub fn with_fine_steps(mut self, steps: usize) -> Self {
        self.fine_steps = steps;
        self
    }

    pub fn with_noise(mut self, noise: Vec<NoiseCoefficient>) -> Self {
        self.noise = noise;
        self
    }

    pub fn tail_bound(&self) -> f64 {
        (-self.alpha * self.window).exp()
    }

    fn validate(&self) -> Result<()> {
        if self.noise.is_empty() || self.noise.iter().any(|b| b.dim() != 1) {
            return Err(Error::invalid("the OU process needs at least one scalar noise coefficient"));
        }
        if self.fine_steps == 0 {
            return Err(Error::invalid("fine_steps must be positive"));
        }
        let tail = self.tail_bound();
        if !(tail <= FOU_TAIL_LIMIT) {
            return Err(Error::TailBound {
                tail_bound: tail,
                limit: FOU_TAIL_LIMIT,
            });
        }
        Ok(())
    }

    /// Window grid ending at `t`, refined towards `t` so that `e^{-alpha (t-s)/2}`
    /// changes by the same amount over every step.
    fn window_grid(&self, t: f64) -> Result<TimeGrid> {
        let n = self.fine_steps;
        let q = -(-0.5 * self.alpha * self.window).exp_m1();
        let mut points: Vec<f64> = (0..=n)
            .map(|j| {
                let x = 1.0 - j as f64 / n as f64;
                t + (2.0 / self.alpha) * (-x * q).ln_1p()
            })
            .collect();
        points[0] = t - self.window;
        points[n] = t;
        TimeGrid::new(points)
    }
}

/// Monte Carlo samples of `X(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FouSamples {
    pub t: f64,
    pub values: Vec<f64>,
    pub tail_bound: f64,
    /// Exact variance of the truncated left-point sum being sampled.
    pub model_variance: f64,
}

impl FouSamples {
    fn len(&self) -> f64 {
        self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len()
    }

    pub fn mean_stderr(&self) -> f64 {
        let m = self.mean();
        let var = self.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.len() - 1.0);
        (var / self.len()).sqrt()
    }

    /// `mean(X^2)`, the variance estimate for a zero-mean process.
    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>() / self.len()
    }

    pub fn second_moment_stderr(&self) -> f64 {
        let m2 = self.second_moment();
        let var = self.values.iter().map(|x| (x * x - m2).powi(2)).sum::<f64>() / (self.len() - 1.0);
        (var / self.len()).sqrt()
    }
}

/// Samples `X(t) = e^{-alpha t} sum_i int_{-inf}^t e^{alpha s} b_i(s) dB^H_i(s)` by
/// left-point sums over the truncated window.
pub fn fou_sample(cfg: &FouConfig, t: f64, paths: usize, seed: u64) -> Result<FouSamples> {
    cfg.validate()?;
    let grid = cfg.window_grid(t)?;
    let sampler = FbmSampler::new(&grid, cfg.hurst)?;
    let s = grid.points();
    // X = sum_i w_i^T L z_i = sum_i (L^T w_i)^T z_i
    let coeffs: Vec<DVector<f64>> = cfg
        .noise
        .iter()
        .map(|b| {
            let w = DVector::from_fn(grid.steps(), |l, _| (-cfg.alpha * (t - s[l])).exp() * b.eval(s[l])[0]);
            sampler.factor().tr_mul(&w)
        })
        .collect();
    let model_variance = coeffs.iter().map(|c| c.norm_squared()).sum();
    let values = (0..paths)
        .into_par_iter()
        .map(|p| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let z = NormalStream::new(seed, p as u64, i as u64).take(c.len());
                    c.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum()
        })
        .collect();
    Ok(FouSamples {
        t,
        values,
        tail_bound: cfg.tail_bound(),
        model_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackRow {
    pub t0: f64,
    /// `X^1(t) - X^2(t)`
    pub difference: f64,
    /// `e^{-alpha (t - t0)} (X^1_0 - X^2_0)`
    pub expected: f64,
    pub abs_error: f64,
    /// Error allowance `1e-12 max(1, |X^1(t)|, |X^2(t)|)`.
    pub tolerance: f64,
}

impl PullbackRow {
    pub fn passed(&self) -> bool {
        self.abs_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackReport {
    pub t: f64,
    pub initial_gap: f64,
    pub rows: Vec<PullbackRow>,
}

impl PullbackReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(PullbackRow::passed)
    }

    /// For every pair of rows whose horizons `t - t0` differ by a factor of two,
    /// `(horizon, |r(2 tau) - r(tau)^2| / r(2 tau))` with `r = difference / initial gap`.
    pub fn doubling_ratio_errors(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for a in &self.rows {
            let tau = self.t - a.t0;
            for b in &self.rows {
                let tau2 = self.t - b.t0;
                if (tau2 - 2.0 * tau).abs() <= 1e-12 * tau2 {
                    let ra = a.difference / self.initial_gap;
                    let rb = b.difference / self.initial_gap;
                    out.push((tau, (rb - ra * ra).abs() / rb.abs()));
                }
            }
        }
        out
    }
}

/// Integrates pairs of solutions of the scalar linear equation from every `t0`
/// in `t0s` up to `t`, all driven by one noise realisation, and compares their
/// difference with `e^{-alpha (t - t0)} (x0.0 - x0.1)`.
pub fn pullback_attraction_check(
    cfg: &FouConfig,
    t0s: &[f64],
    t: f64,
    x0: (f64, f64),
    steps_per_segment: usize,
    seed: u64,
) -> Result<PullbackReport> {
    if t0s.is_empty() || steps_per_segment == 0 {
        return Err(Error::invalid("need at least one start time and one step per segment"));
    }
    if t0s.windows(2).any(|w| w[1] >= w[0]) || t0s[0] >= t {
        return Err(Error::invalid("start times must be decreasing and precede t"));
    }
    let mut starts: Vec<f64> = t0s.to_vec();
    starts.reverse();
    starts.push(t);
    let mut points = Vec::with_capacity((starts.len() - 1) * steps_per_segment + 1);
    let mut start_index = Vec::with_capacity(t0s.len());
    for w in starts.windows(2) {
        start_index.push(points.len());
        for j in 0..steps_per_segment {
            points.push(w[0] + (w[1] - w[0]) * (j as f64 / steps_per_segment as f64));
        }
    }
    points.push(t);
    let grid = TimeGrid::new(points)?;
    let n_steps = grid.steps();

    let a = SquareMatrix::scalar(-cfg.alpha)?;
    let sampler = FbmSampler::new(&grid, cfg.hurst)?;
    let increments: Vec<Vec<f64>> = (0..cfg.noise.len()).map(|i| sampler.increments(seed, 0, i)).collect();
    let series: Vec<&[f64]> = increments.iter().map(Vec::as_slice).collect();
    let noise = RiemannOracle::new(&a, &cfg.noise, &grid)?.apply_path(&series);

    let mut rows = Vec::with_capacity(t0s.len());
    // start_index is ordered by increasing t0
    for (&k0, &t0) in start_index.iter().zip(starts.iter()) {
        let sub = grid.slice(k0, n_steps)?;
        let samples: Vec<f64> = (0..cfg.noise.len())
            .flat_map(|i| noise[i * n_steps + k0..(i + 1) * n_steps].iter().copied())
            .collect();
        let block = NoiseBlock::new(
            sub.clone(),
            cfg.hurst,
            1,
            cfg.noise.len(),
            1,
            samples,
            GeneratorTag::RiemannOracle,
            seed,
        )?;
        let problem = SemiLinearProblem::new(
            a.clone(),
            Drift::Zero,
            cfg.noise.clone(),
            DVector::from_element(1, x0.0),
            (t0, t),
            cfg.hurst,
        )?;
        let integrator = Integrator::new(&problem, &sub)?;
        let x1 = integrator.run(&block, 0)?.final_state()[0];
        let other = problem.clone().with_initial(DVector::from_element(1, x0.1))?;
        let x2 = Integrator::new(&other, &sub)?.run(&block, 0)?.final_state()[0];
        let difference = x1 - x2;
        let expected = (-cfg.alpha * (t - t0)).exp() * (x0.0 - x0.1);
        rows.push(PullbackRow {
            t0,
            difference,
            expected,
            abs_error: (difference - expected).abs(),
            tolerance: 1e-12 * x1.abs().max(x2.abs()).max(1.0),
        });
    }
    rows.reverse();
    Ok(PullbackReport {
        t,
        initial_gap: x0.0 - x0.1,
        rows,
    })
}

/// `|V^1_k - V^2_k|` for two solutions sharing `noise` and differing only in the
/// initial value.
pub fn contraction_profile(
    problem: &SemiLinearProblem,
    noise: &NoiseBlock,
    path: usize,
    other_initial: DVector<f64>,
) -> Result<Vec<f64>> {
    let first = Integrator::new(problem, noise.grid())?.run(noise, path)?;
    let other = problem.clone().with_initial(other_initial)?;
    let second = Integrator::new(&other, noise.grid())?.run(noise, path)?;
    Ok(first
        .states
        .iter()
        .zip(&second.states)
        .map(|(a, b)| (a - b).norm())
        .collect())
}
