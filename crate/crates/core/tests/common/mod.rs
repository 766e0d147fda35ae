#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Running second moments `E[x x^T]` of zero-mean vectors with entrywise standard errors.
pub struct MomentAccumulator {
    n: usize,
    count: usize,
    sum: DMatrix<f64>,
    sum_sq: DMatrix<f64>,
}

impl MomentAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            sum: DMatrix::zeros(n, n),
            sum_sq: DMatrix::zeros(n, n),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                let p = x[a] * x[b];
                self.sum[(a, b)] += p;
                self.sum_sq[(a, b)] += p * p;
            }
        }
        self.count += 1;
    }

    pub fn mean(&self) -> DMatrix<f64> {
        &self.sum / self.count as f64
    }

    pub fn stderr(&self) -> DMatrix<f64> {
        let n = self.count as f64;
        let m = self.mean();
        DMatrix::from_fn(self.n, self.n, |a, b| {
            let var = (self.sum_sq[(a, b)] / n - m[(a, b)].powi(2)) * n / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        })
    }

    /// Largest `|empirical - expected| / stderr` over all entries.
    pub fn max_z(&self, expected: &DMatrix<f64>) -> f64 {
        let m = self.mean();
        let se = self.stderr();
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let d = (m[(a, b)] - expected[(a, b)]).abs();
                let z = if se[(a, b)] > 0.0 { d / se[(a, b)] } else if d == 0.0 { 0.0 } else { f64::INFINITY };
                worst = worst.max(z);
            }
        }
        worst
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_0^len r^{a-1} g(r) dr` with `a = 2H - 1`, via `r = s^{1/a}` which removes the singularity.
pub fn singular_integral(g: impl Fn(f64) -> f64, hurst: f64, len: f64, panels: usize) -> f64 {
    let a = 2.0 * hurst - 1.0;
    simpson(|s| g(s.powf(1.0 / a)), 0.0, len.powf(a), panels) / a
}

/// `H(2H-1) int int_{[0,W]^2} e^{-alpha x} e^{-alpha y} |x - y|^{2H-2} dx dy`, computed on the
/// triangle `x > y` with `r = x - y` and doubled.
pub fn fou_variance_quadrature(alpha: f64, hurst: f64, window: f64, panels: usize) -> f64 {
    let c = hurst * (2.0 * hurst - 1.0);
    let outer = |y: f64| {
        let len = window - y;
        if len <= 0.0 {
            return 0.0;
        }
        (-2.0 * alpha * y).exp() * singular_integral(|r| (-alpha * r).exp(), hurst, len, panels)
    };
    2.0 * c * simpson(outer, 0.0, window, panels)
}

/// `H(2H-1) int int_{[0,h]^2} e^{-lam (h-u)} e^{-lam (h-v)} |u-v|^{2H-2} du dv` for scalar `A = -lam`,
/// reduced to one dimension by integrating along the diagonal in closed form.
pub fn scalar_same_interval(lam: f64, hurst: f64, h: f64, panels: usize) -> f64 {
    let c = hurst * (2.0 * hurst - 1.0);
    // inner integral over v for fixed w = u - v > 0
    let g = |w: f64| {
        if lam == 0.0 {
            h - w
        } else {
            ((-lam * w).exp() - (-lam * (2.0 * h - w)).exp()) / (2.0 * lam)
        }
    };
    2.0 * c * singular_integral(g, hurst, h, panels)
}

/// Exactly orthogonal symmetric 4x4 matrix with entries +-1/2.
pub fn hadamard4() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.5, 0.5, 0.5, 0.5, //
            0.5, -0.5, 0.5, -0.5, //
            0.5, 0.5, -0.5, -0.5, //
            0.5, -0.5, -0.5, 0.5,
        ],
    )
}

/// `Q diag(lambdas) Q` for the Hadamard `Q`; exact in floating point for integer eigenvalues.
pub fn hadamard_matrix(lambdas: [f64; 4]) -> DMatrix<f64> {
    let q = hadamard4();
    &q * DMatrix::from_diagonal(&DVector::from_row_slice(&lambdas)) * &q
}

/// `e^{At} u0 + A^{-1}(e^{At} - I) c` for `A = Q diag(lambdas) Q`.
pub fn hadamard_mild_solution(lambdas: [f64; 4], u0: &DVector<f64>, c: &DVector<f64>, t: f64) -> DVector<f64> {
    let q = hadamard4();
    let u = &q * u0;
    let cc = &q * c;
    let y = DVector::from_fn(4, |i, _| {
        let l = lambdas[i];
        (l * t).exp() * u[i] + (l * t).exp_m1() / l * cc[i]
    });
    &q * y
}
