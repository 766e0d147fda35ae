//! Covariance of the convolution increments by singular-kernel quadrature.
//!
//! `E[I_{i,k} I_{i,l}^T] = H(2H-1) int_{[t_k,t_{k+1}]} int_{[t_l,t_{l+1}]}
//! g_k(u) g_l(v)^T |u-v|^{2H-2} du dv` with `g_k(u) = e^{A(t_{k+1}-u)} b_i(u)`.
//!
//! Three cases, by where the kernel is singular:
//! - same interval: split along `u = v`, substitute `w = u - v` and integrate
//!   `w^{2H-2}` exactly with a Gauss-Jacobi rule;
//! - adjacent intervals: the singular point is the shared corner; a Duffy split
//!   turns it into a `x^{2H-1}` Jacobi weight;
//! - separated intervals: tensor Gauss-Legendre.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::quadrature::{gauss_jacobi_left, gauss_legendre, left_singular_nodes, GaussRule};
use super::{HurstParameter, NoiseCoefficient, TimeGrid};
use crate::error::{Error, Result};
use crate::matfun::{expm, SquareMatrix};

pub const DEFAULT_QUADRATURE_ORDER: usize = 16;
pub const DEFAULT_ASSEMBLY_CAP: usize = 4096;
/// Successive-order relative change above which a block is flagged.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

const JITTER_START: f64 = 1e-14;
const JITTER_CAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Nodes per axis.
    pub order: usize,
    /// Largest admissible `n * N`.
    pub cap: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_QUADRATURE_ORDER,
            cap: DEFAULT_ASSEMBLY_CAP,
        }
    }
}

/// A block whose value moved by more than [`QUADRATURE_REL_TOL`] between orders.
#[derive(Debug, Clone)]
pub struct QuadratureWarning {
    pub k: usize,
    pub l: usize,
    pub estimate: DMatrix<f64>,
    pub lower_order_estimate: DMatrix<f64>,
    pub rel_change: f64,
}

#[derive(Debug, Clone)]
pub struct BlockEstimate {
    pub value: DMatrix<f64>,
    pub rel_change: f64,
    pub warning: Option<QuadratureWarning>,
}

/// `e^{A tau} b(u)` for many `(tau, u)` pairs.
enum Propagator<'a> {
    Spectral {
        q: DMatrix<f64>,
        lambdas: DVector<f64>,
        projected_b: Option<DVector<f64>>,
        b: &'a NoiseCoefficient,
    },
    General {
        a: &'a SquareMatrix,
        b: &'a NoiseCoefficient,
    },
}

impl<'a> Propagator<'a> {
    fn new(a: &'a SquareMatrix, b: &'a NoiseCoefficient) -> Self {
        if a.is_symmetric() {
            let eig = a.spectral();
            let q = eig.eigenvectors.clone();
            let projected_b = match b {
                NoiseCoefficient::Constant(v) => Some(q.tr_mul(v)),
                _ => None,
            };
            Propagator::Spectral {
                q,
                lambdas: eig.eigenvalues.clone(),
                projected_b,
                b,
            }
        } else {
            Propagator::General { a, b }
        }
    }

    fn apply(&self, tau: f64, u: f64) -> DVector<f64> {
        match self {
            Propagator::Spectral {
                q,
                lambdas,
                projected_b,
                b,
            } => {
                let mut c = match projected_b {
                    Some(c) => c.clone(),
                    None => q.tr_mul(&b.eval(u)),
                };
                for (ci, &lambda) in c.iter_mut().zip(lambdas.iter()) {
                    *ci *= (lambda * tau).exp();
                }
                q * c
            }
            Propagator::General { a, b } => match expm(a, tau) {
                Ok(e) => e.entries() * b.eval(u),
                Err(_) => DVector::from_element(a.dim(), f64::NAN),
            },
        }
    }
}

struct Rules {
    legendre: GaussRule,
    diagonal: GaussRule,
    corner: GaussRule,
}

impl Rules {
    fn new(order: usize, hurst: HurstParameter) -> Result<Self> {
        let beta = hurst.kernel_exponent();
        Ok(Self {
            legendre: gauss_legendre(order)?,
            diagonal: gauss_jacobi_left(order, beta)?,
            corner: gauss_jacobi_left(order, beta + 1.0)?,
        })
    }
}

struct BlockIntegrator<'a> {
    grid: &'a TimeGrid,
    hurst: HurstParameter,
    propagator: Propagator<'a>,
    n: usize,
    rules: Rules,
    check_rules: Rules,
}

fn lower_order(order: usize) -> usize {
    if order > 4 {
        order - 4
    } else {
        order - 1
    }
}

impl<'a> BlockIntegrator<'a> {
    fn new(
        a: &'a SquareMatrix,
        b: &'a NoiseCoefficient,
        grid: &'a TimeGrid,
        hurst: HurstParameter,
        order: usize,
    ) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("quadrature order must be at least 2"));
        }
        if b.dim() != a.dim() {
            return Err(Error::invalid(format!(
                "noise coefficient has dimension {}, matrix has {}",
                b.dim(),
                a.dim()
            )));
        }
        Ok(Self {
            grid,
            hurst,
            propagator: Propagator::new(a, b),
            n: a.dim(),
            rules: Rules::new(order, hurst)?,
            check_rules: Rules::new(lower_order(order), hurst)?,
        })
    }

    fn block(&self, k: usize, l: usize) -> Result<BlockEstimate> {
        let steps = self.grid.steps();
        if k >= steps || l >= steps {
            return Err(Error::invalid(format!("step pair ({k}, {l}) outside 0..{steps}")));
        }
        if k > l {
            let canonical = self.block(l, k)?;
            return Ok(BlockEstimate {
                value: canonical.value.transpose(),
                rel_change: canonical.rel_change,
                warning: canonical.warning.map(|w| QuadratureWarning {
                    k,
                    l,
                    estimate: w.estimate.transpose(),
                    lower_order_estimate: w.lower_order_estimate.transpose(),
                    rel_change: w.rel_change,
                }),
            });
        }
        let value = self.integrate(k, l, &self.rules);
        let lower = self.integrate(k, l, &self.check_rules);
        let norm = value.norm();
        let rel_change = if norm > 0.0 {
            (&value - &lower).norm() / norm
        } else {
            (&value - &lower).norm()
        };
        let warning = if rel_change > QUADRATURE_REL_TOL || !rel_change.is_finite() {
            log::warn!("covariance block ({k}, {l}): successive-order relative change {rel_change:e}");
            Some(QuadratureWarning {
                k,
                l,
                estimate: value.clone(),
                lower_order_estimate: lower,
                rel_change,
            })
        } else {
            None
        };
        Ok(BlockEstimate {
            value,
            rel_change,
            warning,
        })
    }

    fn integrate(&self, k: usize, l: usize, rules: &Rules) -> DMatrix<f64> {
        let raw = if k == l {
            self.same_interval(k, rules)
        } else if l == k + 1 {
            self.adjacent(k, rules)
        } else {
            self.separated(k, l, rules)
        };
        raw * self.hurst.kernel_constant()
    }

    /// Triangle `u > v` of the square, `w = u - v`, `v = a + (h - w) s`; the
    /// other triangle is its transpose.
    fn same_interval(&self, k: usize, rules: &Rules) -> DMatrix<f64> {
        let a = self.grid.points()[k];
        let end = self.grid.points()[k + 1];
        let h = end - a;
        let beta = self.hurst.kernel_exponent();
        let mut tri = DMatrix::zeros(self.n, self.n);
        for (w, ww) in left_singular_nodes(&rules.diagonal, beta, h) {
            let len = h - w;
            for (s, ws) in rules.legendre.on_interval(0.0, 1.0) {
                let v = a + len * s;
                let u = v + w;
                let gu = self.propagator.apply(end - u, u);
                let gv = self.propagator.apply(end - v, v);
                tri.ger(ww * ws * len, &gu, &gv, 1.0);
            }
        }
        &tri + tri.transpose()
    }

    /// Intervals `[.., c]` and `[c, ..]` sharing the point `c`; `x = c - u`,
    /// `y = v - c`, split along `y = r x`.
    fn adjacent(&self, k: usize, rules: &Rules) -> DMatrix<f64> {
        let pts = self.grid.points();
        let (end_k, c, end_l) = (pts[k + 1], pts[k + 1], pts[k + 2]);
        let h1 = c - pts[k];
        let h2 = end_l - c;
        let r = h2 / h1;
        let beta = self.hurst.kernel_exponent();
        let mut out = DMatrix::zeros(self.n, self.n);
        let mut add = |x: f64, y: f64, weight: f64| {
            let gu = self.propagator.apply(end_k - (c - x), c - x);
            let gv = self.propagator.apply(end_l - (c + y), c + y);
            out.ger(weight, &gu, &gv, 1.0);
        };
        for (x, wx) in left_singular_nodes(&rules.corner, beta + 1.0, h1) {
            for (s, ws) in rules.legendre.on_interval(0.0, 1.0) {
                add(x, r * x * s, wx * ws * r * (1.0 + r * s).powf(beta));
            }
        }
        for (y, wy) in left_singular_nodes(&rules.corner, beta + 1.0, h2) {
            for (s, ws) in rules.legendre.on_interval(0.0, 1.0) {
                add(y * s / r, y, wy * ws / r * (1.0 + s / r).powf(beta));
            }
        }
        out
    }

    fn separated(&self, k: usize, l: usize, rules: &Rules) -> DMatrix<f64> {
        let pts = self.grid.points();
        let beta = self.hurst.kernel_exponent();
        let side = |idx: usize| -> (Vec<f64>, DMatrix<f64>) {
            let (a, b) = (pts[idx], pts[idx + 1]);
            let nodes: Vec<(f64, f64)> = rules.legendre.on_interval(a, b).collect();
            let mut g = DMatrix::zeros(self.n, nodes.len());
            for (col, &(u, w)) in nodes.iter().enumerate() {
                g.set_column(col, &(self.propagator.apply(b - u, u) * w));
            }
            (nodes.into_iter().map(|(u, _)| u).collect(), g)
        };
        let (us, gk) = side(k);
        let (vs, gl) = side(l);
        let kernel = DMatrix::from_fn(us.len(), vs.len(), |p, q| (us[p] - vs[q]).abs().powf(beta));
        gk * kernel * gl.transpose()
    }
}

/// `E[I_{i,k} I_{i,l}^T]` for one noise coefficient `b`.
pub fn conv_cov_block(
    a: &SquareMatrix,
    b: &NoiseCoefficient,
    grid: &TimeGrid,
    k: usize,
    l: usize,
    hurst: HurstParameter,
    order: usize,
) -> Result<BlockEstimate> {
    BlockIntegrator::new(a, b, grid, hurst, order)?.block(k, l)
}

/// Joint covariance of `(I_{i,0}, ..., I_{i,N-1})` and its Cholesky factor.
///
/// Flat index of component `j` at step `k` is `k * n + j`.
#[derive(Debug, Clone)]
pub struct CovarianceAssembly {
    pub grid: TimeGrid,
    pub hurst: HurstParameter,
    pub n: usize,
    pub matrix: DMatrix<f64>,
    /// Lower triangular, `factor * factor^T = matrix + jitter * I`.
    pub factor: DMatrix<f64>,
    pub jitter: f64,
    pub warnings: Vec<QuadratureWarning>,
    pub max_rel_change: f64,
}

impl CovarianceAssembly {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn flat_index(&self, component: usize, step: usize) -> usize {
        step * self.n + component
    }

    /// `(component, step)` of a flat index.
    pub fn component_step(&self, flat: usize) -> (usize, usize) {
        (flat % self.n, flat / self.n)
    }

    /// Block `(k, l)` of the assembled matrix.
    pub fn block(&self, k: usize, l: usize) -> DMatrix<f64> {
        self.matrix.view((k * self.n, l * self.n), (self.n, self.n)).into_owned()
    }

    /// `max |factor factor^T - matrix|` entrywise.
    pub fn reconstruction_error(&self) -> f64 {
        (&self.factor * self.factor.transpose() - &self.matrix).amax()
    }
}

/// Assembles and factors the covariance of all increments on `grid`.
pub fn assemble_covariance(
    a: &SquareMatrix,
    b: &NoiseCoefficient,
    grid: &TimeGrid,
    hurst: HurstParameter,
    options: AssemblyOptions,
) -> Result<CovarianceAssembly> {
    let n = a.dim();
    let steps = grid.steps();
    let size = n * steps;
    if size > options.cap {
        return Err(Error::SizeLimit {
            size,
            cap: options.cap,
        });
    }
    let integrator = BlockIntegrator::new(a, b, grid, hurst, options.order)?;
    let mut matrix = DMatrix::zeros(size, size);
    let mut warnings = Vec::new();
    let mut max_rel_change: f64 = 0.0;
    for k in 0..steps {
        for l in k..steps {
            let est = integrator.block(k, l)?;
            max_rel_change = max_rel_change.max(est.rel_change);
            matrix.view_mut((k * n, l * n), (n, n)).copy_from(&est.value);
            if l != k {
                matrix.view_mut((l * n, k * n), (n, n)).copy_from(&est.value.transpose());
            }
            warnings.extend(est.warning);
        }
    }
    let (factor, jitter) = factor_with_jitter(&matrix)?;
    Ok(CovarianceAssembly {
        grid: grid.clone(),
        hurst,
        n,
        matrix,
        factor,
        jitter,
        warnings,
        max_rel_change,
    })
}

/// Cholesky with an escalating diagonal shift `0, 1e-14 s, 1e-13 s, ..., 1e-8 s`,
/// `s = trace / size`.
pub(crate) fn factor_with_jitter(matrix: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let size = matrix.nrows();
    if matrix.iter().all(|&x| x == 0.0) {
        return Ok((DMatrix::zeros(size, size), 0.0));
    }
    if let Some(ch) = Cholesky::new(matrix.clone()) {
        return Ok((ch.l(), 0.0));
    }
    let scale = matrix.trace() / size as f64;
    if !(scale > 0.0) {
        return Err(Error::NotPsd { jitter: 0.0 });
    }
    let mut jitter = JITTER_START * scale;
    let cap = JITTER_CAP * scale * (1.0 + 1e-9);
    while jitter <= cap {
        let shifted = matrix + DMatrix::identity(size, size) * jitter;
        if let Some(ch) = Cholesky::new(shifted) {
            log::debug!("covariance factored with jitter {jitter:e}");
            return Ok((ch.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPsd { jitter: jitter / 10.0 })
}
