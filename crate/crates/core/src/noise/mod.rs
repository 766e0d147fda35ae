//! Fractional noise: the fBm kernel, covariance of the stochastic convolution
//! increments `I_{i,k} = int_{t_k}^{t_{k+1}} e^{A(t_{k+1}-s)} b_i(s) dB^H_i(s)`,
//! exact Gaussian samplers, the Riemann-sum oracle and coarse-from-fine
//! aggregation.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

mod block;
mod covariance;
mod grid;
mod io;
mod oracle;
pub mod quadrature;
mod sampling;

pub(crate) use block::Fnv;
pub use block::{GeneratorTag, NoiseBlock};
pub use covariance::{
    assemble_covariance, conv_cov_block, AssemblyOptions, BlockEstimate, CovarianceAssembly,
    QuadratureWarning, DEFAULT_ASSEMBLY_CAP, DEFAULT_QUADRATURE_ORDER, QUADRATURE_REL_TOL,
};
pub use grid::TimeGrid;
pub use io::{read_noise_block, write_noise_block, NOISE_MAGIC, NOISE_VERSION};
pub use oracle::{aggregate_to_coarse, conv_riemann_oracle, Aggregator, RiemannOracle};
pub use sampling::{
    fbm_increment_covariance, sample_fbm_increments, sample_noise_exact, sample_noise_exact_multi,
    ExactNoiseSampler, FbmIncrements, FbmSampler, NormalStream,
};

/// Hurst parameter `H`, restricted to `1/2 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.5 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("Hurst parameter {value} must lie in (1/2, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `H(2H - 1)`.
    pub fn kernel_constant(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    /// Exponent `2H - 2` of the kernel.
    pub fn kernel_exponent(self) -> f64 {
        2.0 * self.0 - 2.0
    }
}

impl fmt::Display for HurstParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `H(2H-1)|u-v|^{2H-2}`.
pub fn kernel_phi(u: f64, v: f64, hurst: HurstParameter) -> Result<f64> {
    let d = (u - v).abs();
    if d == 0.0 {
        return Err(Error::SingularKernel(u));
    }
    Ok(hurst.kernel_constant() * d.powf(hurst.kernel_exponent()))
}

/// Deterministic noise coefficient `b_i(t)`.
#[derive(Clone)]
pub enum NoiseCoefficient {
    Constant(DVector<f64>),
    TimeVarying {
        dim: usize,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl NoiseCoefficient {
    pub fn constant(v: DVector<f64>) -> Self {
        NoiseCoefficient::Constant(v)
    }

    /// Standard basis vector `e_i` in dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        NoiseCoefficient::Constant(v)
    }

    pub fn time_varying(dim: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        NoiseCoefficient::TimeVarying { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseCoefficient::Constant(v) => v.len(),
            NoiseCoefficient::TimeVarying { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            NoiseCoefficient::Constant(v) => v.clone(),
            NoiseCoefficient::TimeVarying { f, .. } => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, NoiseCoefficient::Constant(_))
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            NoiseCoefficient::Constant(v) => NoiseCoefficient::Constant(v * c),
            NoiseCoefficient::TimeVarying { dim, f } => {
                let f = Arc::clone(f);
                NoiseCoefficient::TimeVarying {
                    dim: *dim,
                    f: Arc::new(move |t| f(t) * c),
                }
            }
        }
    }
}

impl fmt::Debug for NoiseCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseCoefficient::Constant(v) => f.debug_tuple("Constant").field(&v.as_slice()).finish(),
            NoiseCoefficient::TimeVarying { dim, .. } => {
                f.debug_struct("TimeVarying").field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}
