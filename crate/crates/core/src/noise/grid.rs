use crate::error::{Error, Result};

/// Strictly increasing time points `t_0 < ... < t_N`, `N >= 1`.
///
/// Grids built with [`TimeGrid::uniform`] report one nominal step size for
/// every step, so step-keyed caches see a single entry even though the
/// rounded points differ by an ulp.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    uniform_step: Option<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("a time grid needs at least one step"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("time grid has non-finite points"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(Self {
            points,
            uniform_step: None,
        })
    }

    /// `steps` equal steps on `[t0, t1]`.
    ///
    /// Point `k` is `t0 + (t1 - t0) * (k / steps)`; nested uniform grids
    /// therefore share their common points bit for bit.
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("a time grid needs at least one step"));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid(format!("invalid interval [{t0}, {t1}]")));
        }
        let span = t1 - t0;
        let mut points: Vec<f64> = (0..=steps)
            .map(|k| t0 + span * (k as f64 / steps as f64))
            .collect();
        points[steps] = t1;
        let mut grid = Self::new(points)?;
        grid.uniform_step = Some(span / steps as f64);
        Ok(grid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.points[0]
    }

    pub fn t_end(&self) -> f64 {
        self.points[self.steps()]
    }

    /// Step size `h_k = t_{k+1} - t_k`.
    pub fn step(&self, k: usize) -> f64 {
        match self.uniform_step {
            Some(h) => h,
            None => self.points[k + 1] - self.points[k],
        }
    }

    pub fn step_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps()).map(move |k| self.step(k))
    }

    pub fn h_max(&self) -> f64 {
        self.step_sizes().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.step_sizes().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_step.is_some()
    }

    /// Indices into `self` of every point of `coarse`; fails unless `coarse` is nested in `self`.
    pub fn nested_indices(&self, coarse: &TimeGrid) -> Result<Vec<usize>> {
        let scale = self.t_end().abs().max(self.t0().abs()).max(self.t_end() - self.t0());
        let tol = 1e-12 * scale;
        let mut out = Vec::with_capacity(coarse.points.len());
        let mut j = 0;
        for &t in &coarse.points {
            while j < self.points.len() && self.points[j] < t - tol {
                j += 1;
            }
            if j == self.points.len() || (self.points[j] - t).abs() > tol {
                return Err(Error::GridMismatch(format!(
                    "coarse point {t} is not a point of the fine grid"
                )));
            }
            out.push(j);
        }
        if out[0] != 0 || *out.last().unwrap() != self.steps() {
            return Err(Error::GridMismatch(
                "coarse and fine grids must share both endpoints".into(),
            ));
        }
        Ok(out)
    }

    /// Sub-grid of points `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if to <= from || to > self.steps() {
            return Err(Error::invalid(format!("invalid grid slice {from}..={to}")));
        }
        Ok(Self {
            points: self.points[from..=to].to_vec(),
            uniform_step: self.uniform_step,
        })
    }
}
