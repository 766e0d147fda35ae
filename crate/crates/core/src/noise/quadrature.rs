//! Gauss rules on `[-1, 1]` from the Golub-Welsch eigenvalue problem.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely from `[-1, 1]` onto `[a, b]` (unit weight function).
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// Gauss-Legendre rule with `n` nodes, polished by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::invalid("quadrature order must be positive"));
    }
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, _) = golub_welsch(&vec![0.0; n], &offdiag, 2.0);
    let mut weights = vec![0.0; n];
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (p, dp) = legendre(n, *x);
            *x -= p / dp;
        }
        let (_, dp) = legendre(n, *x);
        *w = 2.0 / ((1.0 - *x * *x) * dp * dp);
    }
    Ok(GaussRule { nodes, weights })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Jacobi rule for the weight `(1 + x)^beta` on `[-1, 1]`, `beta > -1`.
pub fn gauss_jacobi_left(n: usize, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::invalid("quadrature order must be positive"));
    }
    if !(beta > -1.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("Jacobi exponent {beta} must exceed -1")));
    }
    let (a, b) = (0.0f64, beta);
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let s = 2.0 * k as f64 + a + b;
            if k == 0 {
                (b - a) / (a + b + 2.0)
            } else {
                (b * b - a * a) / (s * (s + 2.0))
            }
        })
        .collect();
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            let s = 2.0 * k + a + b;
            (4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
        })
        .collect();
    // integral of (1 + x)^beta over [-1, 1]
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let (nodes, weights) = golub_welsch(&diag, &offdiag, mu0);
    Ok(GaussRule { nodes, weights })
}

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            offdiag[i]
        } else if j + 1 == i {
            offdiag[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// `int_0^len w^beta g(w) dw` for smooth `g`, with an `n`-point Gauss-Jacobi rule.
pub(crate) fn left_singular_nodes(rule: &GaussRule, beta: f64, len: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let scale = (0.5 * len).powf(beta + 1.0);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(move |(&x, &w)| (0.5 * len * (1.0 + x), scale * w))
}
