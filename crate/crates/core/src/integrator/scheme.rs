use std::io::Write;

use nalgebra::DVector;

use super::SemiLinearProblem;
use crate::error::{Error, Result};
use crate::matfun::{OperatorCache, StepOperators};
use crate::noise::{NoiseBlock, TimeGrid};

/// States whose norm exceeds this are treated as blown up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e150;

/// Numerical states `V_k` on a grid for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<DVector<f64>>,
    pub path: usize,
    pub seed: u64,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("a trajectory holds at least the initial state")
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// States at the points of a coarse grid nested in this one.
    pub fn restrict(&self, coarse: &TimeGrid) -> Result<Vec<&DVector<f64>>> {
        let idx = self.grid.nested_indices(coarse)?;
        Ok(idx.into_iter().map(|i| &self.states[i]).collect())
    }

    /// Every `stride`-th state, always keeping the last one.
    pub fn downsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        let last = self.states.len() - 1;
        let mut keep: Vec<usize> = (0..=last).step_by(stride).collect();
        if *keep.last().unwrap() != last {
            keep.push(last);
        }
        let points = keep.iter().map(|&i| self.grid.points()[i]).collect();
        Ok(Trajectory {
            grid: TimeGrid::new(points)?,
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
            path: self.path,
            seed: self.seed,
        })
    }

    /// CSV with header `t,x1,...,xn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (t, x) in self.grid.points().iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for v in x.iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn step_with(
    problem: &SemiLinearProblem,
    ops: &StepOperators,
    step: usize,
    t: f64,
    v: &DVector<f64>,
    noise: &[&[f64]],
) -> Result<DVector<f64>> {
    let f = problem.drift().eval(t, v);
    let mut next = &ops.exp * v;
    if !problem.drift().is_zero() {
        next.gemv(1.0, &ops.phi1, &f, 1.0);
    }
    for inc in noise {
        for (x, d) in next.iter_mut().zip(inc.iter()) {
            *x += d;
        }
    }
    check_state(&next, step + 1)?;
    Ok(next)
}

fn check_state(v: &DVector<f64>, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) && v.norm() <= DIVERGENCE_THRESHOLD {
        Ok(())
    } else {
        Err(Error::Divergence { step })
    }
}

/// One exponential Euler step
/// `V_{k+1} = e^{Ah} V_k + h phi1(Ah) f(t_k, V_k) + sum_i I_{i,k}`.
pub fn exp_euler_step(
    problem: &SemiLinearProblem,
    step: usize,
    t: f64,
    h: f64,
    v: &DVector<f64>,
    noise: &[&[f64]],
) -> Result<DVector<f64>> {
    if v.len() != problem.dim() || noise.iter().any(|inc| inc.len() != problem.dim()) {
        return Err(Error::invalid("state or noise increment has the wrong dimension"));
    }
    let ops = StepOperators::new(problem.a(), h)?;
    step_with(problem, &ops, step, t, v, noise)
}

/// Exponential Euler integrator bound to one problem and grid.
///
/// Operators for every distinct step size are computed up front, so one
/// instance can be shared across threads.
#[derive(Debug, Clone)]
pub struct Integrator<'p> {
    problem: &'p SemiLinearProblem,
    grid: TimeGrid,
    cache: OperatorCache,
}

impl<'p> Integrator<'p> {
    pub fn new(problem: &'p SemiLinearProblem, grid: &TimeGrid) -> Result<Self> {
        let scale = problem.t_end().abs().max(problem.t0().abs()).max(1.0);
        if (grid.t0() - problem.t0()).abs() > 1e-12 * scale || (grid.t_end() - problem.t_end()).abs() > 1e-12 * scale {
            return Err(Error::GridMismatch(format!(
                "grid spans [{}, {}], problem is posed on [{}, {}]",
                grid.t0(),
                grid.t_end(),
                problem.t0(),
                problem.t_end()
            )));
        }
        let mut cache = OperatorCache::new(problem.a().clone());
        cache.warm(grid.step_sizes())?;
        Ok(Self {
            problem,
            grid: grid.clone(),
            cache,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn problem(&self) -> &SemiLinearProblem {
        self.problem
    }

    /// Distinct step sizes held in the operator cache.
    pub fn cached_operators(&self) -> usize {
        self.cache.len()
    }

    /// Integrates path `path` of `noise`.
    ///
    /// A block with a single noise index is taken to hold the summed
    /// increments `sum_i I_{i,k}`.
    pub fn run(&self, noise: &NoiseBlock, path: usize) -> Result<Trajectory> {
        if noise.grid() != &self.grid {
            return Err(Error::GridMismatch("noise block is not on the integration grid".into()));
        }
        let m = self.problem.noise_count();
        if noise.dim() != self.problem.dim() || (noise.noise_count() != m && noise.noise_count() != 1) {
            return Err(Error::invalid(format!(
                "noise block has shape (m = {}, n = {}), problem needs (m = {m}, n = {})",
                noise.noise_count(),
                noise.dim(),
                self.problem.dim()
            )));
        }
        if path >= noise.paths() {
            return Err(Error::invalid(format!("path {path} out of range ({} paths)", noise.paths())));
        }
        self.integrate_with(path, noise.seed(), |k| {
            (0..noise.noise_count()).map(|i| noise.increment(path, i, k)).collect()
        })
    }

    /// The deterministic solution with all noise switched off.
    pub fn run_noiseless(&self) -> Result<Trajectory> {
        self.integrate_with(0, 0, |_| Vec::new())
    }

    fn integrate_with<'n>(
        &self,
        path: usize,
        seed: u64,
        noise_at: impl Fn(usize) -> Vec<&'n [f64]>,
    ) -> Result<Trajectory> {
        let t = self.grid.points();
        let mut states = Vec::with_capacity(t.len());
        states.push(self.problem.u0().clone());
        for k in 0..self.grid.steps() {
            let h = self.grid.step(k);
            let ops = self.cache.get(h).expect("operator cache is warmed for every step");
            let next = step_with(self.problem, ops, k, t[k], &states[k], &noise_at(k))?;
            states.push(next);
        }
        Ok(Trajectory {
            grid: self.grid.clone(),
            states,
            path,
            seed,
        })
    }
}

/// Exponential Euler solution of path `path` on the grid of `noise`.
pub fn integrate(problem: &SemiLinearProblem, noise: &NoiseBlock, path: usize) -> Result<Trajectory> {
    Integrator::new(problem, noise.grid())?.run(noise, path)
}

/// Reference solution: the same scheme on a fine grid.
pub fn reference_solution(problem: &SemiLinearProblem, fine_noise: &NoiseBlock, path: usize) -> Result<Trajectory> {
    integrate(problem, fine_noise, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{builtin_laplacian_sine, scalar_linear, Drift};
    use crate::noise::{GeneratorTag, HurstParameter};
    use approx::assert_relative_eq;

    fn hurst() -> HurstParameter {
        HurstParameter::new(0.7).unwrap()
    }

    fn scalar_noise(grid: &TimeGrid, values: &[f64]) -> NoiseBlock {
        NoiseBlock::new(grid.clone(), hurst(), 1, 1, 1, values.to_vec(), GeneratorTag::Deterministic, 0).unwrap()
    }

    #[test]
    fn linear_scalar_without_noise_is_exact() {
        let p = scalar_linear(2.0, Drift::Zero, 1.5, (0.0, 1.0), hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 7).unwrap();
        let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
        for (t, x) in grid.points().iter().zip(&traj.states) {
            assert_relative_eq!(x[0], 1.5 * (-2.0 * t).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn constant_forcing_is_exact() {
        // x' = -x + 1, x(0) = 0  =>  x(t) = 1 - e^{-t}
        let p = scalar_linear(1.0, Drift::Constant(DVector::from_element(1, 1.0)), 0.0, (0.0, 2.0), hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 2.0, 3).unwrap();
        let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
        assert_relative_eq!(traj.final_state()[0], 1.0 - (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn noise_enters_additively() {
        let p = scalar_linear(1.0, Drift::Zero, 0.0, (0.0, 1.0), hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let noise = scalar_noise(&grid, &[0.4, -0.1]);
        let traj = integrate(&p, &noise, 0).unwrap();
        assert_relative_eq!(traj.states[1][0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(traj.states[2][0], 0.4 * (-0.5f64).exp() - 0.1, epsilon = 1e-15);
    }

    #[test]
    fn single_step_matches_hand_formula() {
        let p = scalar_linear(3.0, Drift::Sine, 0.8, (0.0, 1.0), hurst()).unwrap();
        let v = DVector::from_element(1, 0.8);
        let h = 0.1;
        let next = exp_euler_step(&p, 0, 0.0, h, &v, &[&[0.05]]).unwrap();
        let e = (-3.0 * h).exp();
        let expected = e * 0.8 + (1.0 - e) / 3.0 * 0.8f64.sin() + 0.05;
        assert_relative_eq!(next[0], expected, max_relative = 1e-14);
    }

    #[test]
    fn one_cache_entry_on_uniform_grid() {
        let p = builtin_laplacian_sine(4, hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.1, 64).unwrap();
        assert_eq!(Integrator::new(&p, &grid).unwrap().cached_operators(), 1);
    }

    #[test]
    fn stiff_system_stays_bounded_with_large_steps() {
        let p = builtin_laplacian_sine(10, hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.1, 2).unwrap();
        let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
        assert!(traj.final_state().norm() < 1.0);
    }

    #[test]
    fn summed_and_componentwise_noise_agree() {
        let p = builtin_laplacian_sine(2, hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.1, 3).unwrap();
        let samples: Vec<f64> = (0..12).map(|x| (x as f64 * 0.37).sin() * 0.01).collect();
        let noise = NoiseBlock::new(grid.clone(), hurst(), 1, 2, 2, samples, GeneratorTag::Deterministic, 0).unwrap();
        let a = integrate(&p, &noise, 0).unwrap();
        let b = integrate(&p, &noise.summed(), 0).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_relative_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn divergence_reported_with_step() {
        let p = scalar_linear(1.0, Drift::custom(|_, x| x.map(|v| v * v * 1e3)), 1.0, (0.0, 1.0), hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 50).unwrap();
        let err = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn shape_mismatches_rejected() {
        let p = builtin_laplacian_sine(3, hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.1, 2).unwrap();
        let noise = NoiseBlock::zeros(grid.clone(), hurst(), 2, 3, 1);
        assert!(integrate(&p, &noise, 0).is_err());
        let other = TimeGrid::uniform(0.0, 0.2, 2).unwrap();
        assert!(matches!(
            Integrator::new(&p, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn csv_and_downsampling() {
        let p = scalar_linear(1.0, Drift::Zero, 1.0, (0.0, 1.0), hurst()).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 5).unwrap();
        let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
        let down = traj.downsample(2).unwrap();
        assert_eq!(down.grid.points(), &[0.0, 0.4, 0.8, 1.0]);
        let mut out = Vec::new();
        down.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }
}
