use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matfun::{ensure_regular, SquareMatrix, Symmetry};
use crate::noise::{HurstParameter, NoiseCoefficient};

/// Nonlinear part `f(t, x)` of the drift.
#[derive(Clone)]
pub enum Drift {
    Zero,
    Constant(DVector<f64>),
    /// Componentwise `sin(x)`.
    Sine,
    Custom(Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>),
}

impl Drift {
    pub fn custom(f: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Drift::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Drift::Zero => DVector::zeros(x.len()),
            Drift::Constant(c) => c.clone(),
            Drift::Sine => x.map(f64::sin),
            Drift::Custom(f) => f(t, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Drift::Zero)
    }
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => f.write_str("Zero"),
            Drift::Constant(c) => f.debug_tuple("Constant").field(&c.as_slice()).finish(),
            Drift::Sine => f.write_str("Sine"),
            Drift::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Optional constants the problem claims to satisfy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeclaredConstants {
    /// Lipschitz constant of `f`.
    pub lipschitz: Option<f64>,
    /// Linear-growth constant of `f`.
    pub growth: Option<f64>,
    /// Bound on `|b_i(t)|^2`.
    pub noise_bound: Option<f64>,
    /// Semigroup constant, `|A e^{A(t-s)}| <= L / (t - s)`.
    pub semigroup: Option<f64>,
}

/// `dU = (A U + f(t, U)) dt + sum_i b_i(t) dB^H_i(t)`, `U(t0) = u0`, on `[t0, T]`.
#[derive(Debug, Clone)]
pub struct SemiLinearProblem {
    a: SquareMatrix,
    drift: Drift,
    noise: Vec<NoiseCoefficient>,
    u0: DVector<f64>,
    t0: f64,
    t_end: f64,
    hurst: HurstParameter,
    constants: DeclaredConstants,
}

impl SemiLinearProblem {
    pub fn new(
        a: SquareMatrix,
        drift: Drift,
        noise: Vec<NoiseCoefficient>,
        u0: DVector<f64>,
        (t0, t_end): (f64, f64),
        hurst: HurstParameter,
    ) -> Result<Self> {
        let n = a.dim();
        if u0.len() != n {
            return Err(Error::invalid(format!("u0 has dimension {}, A has {n}", u0.len())));
        }
        if u0.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("u0 has non-finite entries"));
        }
        if let Some(b) = noise.iter().find(|b| b.dim() != n) {
            return Err(Error::invalid(format!("noise coefficient has dimension {}, A has {n}", b.dim())));
        }
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid(format!("invalid time interval [{t0}, {t_end}]")));
        }
        ensure_regular(&a)?;
        Ok(Self {
            a,
            drift,
            noise,
            u0,
            t0,
            t_end,
            hurst,
            constants: DeclaredConstants::default(),
        })
    }

    pub fn with_constants(mut self, constants: DeclaredConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_hurst(mut self, hurst: HurstParameter) -> Self {
        self.hurst = hurst;
        self
    }

    /// Multiplies every `b_i` by `scale`.
    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise = self.noise.iter().map(|b| b.scaled(scale)).collect();
        if let Some(m) = self.constants.noise_bound.as_mut() {
            *m *= scale * scale;
        }
        self
    }

    pub fn with_initial(mut self, u0: DVector<f64>) -> Result<Self> {
        if u0.len() != self.dim() {
            return Err(Error::invalid("initial value has the wrong dimension"));
        }
        self.u0 = u0;
        Ok(self)
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn noise(&self) -> &[NoiseCoefficient] {
        &self.noise
    }

    pub fn u0(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn constants(&self) -> DeclaredConstants {
        self.constants
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Number of driving fBm components `m`.
    pub fn noise_count(&self) -> usize {
        self.noise.len()
    }

    /// Spot-checks the declared Lipschitz and noise bounds on random sample points.
    pub fn check_assumptions(&self, samples: usize, seed: u64) -> AssumptionReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let span = self.t_end - self.t0;
        let scale = 1.0 + self.u0.amax();

        let lipschitz_ratio = self.constants.lipschitz.map(|_| {
            let mut worst: f64 = 0.0;
            for _ in 0..samples {
                let t = self.t0 + span * rng.random::<f64>();
                let s = self.t0 + span * rng.random::<f64>();
                let x = DVector::from_fn(n, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
                let y = DVector::from_fn(n, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
                let denom = (t - s).abs() + (&x - &y).norm();
                if denom > 0.0 {
                    let num = (self.drift.eval(t, &x) - self.drift.eval(s, &y)).norm();
                    worst = worst.max(num / denom);
                }
            }
            worst
        });

        let noise_bound_max = self.constants.noise_bound.map(|_| {
            let mut worst: f64 = 0.0;
            for k in 0..=samples {
                let t = self.t0 + span * k as f64 / samples.max(1) as f64;
                for b in &self.noise {
                    worst = worst.max(b.eval(t).norm_squared());
                }
            }
            worst
        });

        AssumptionReport {
            lipschitz_ratio,
            lipschitz_ok: lipschitz_ratio.zip(self.constants.lipschitz).map(|(r, k)| r <= k * (1.0 + 1e-12)),
            noise_bound_max,
            noise_bound_ok: noise_bound_max
                .zip(self.constants.noise_bound)
                .map(|(v, m)| v <= m * (1.0 + 1e-12)),
        }
    }
}

/// Outcome of [`SemiLinearProblem::check_assumptions`]; `None` where nothing was declared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub lipschitz_ratio: Option<f64>,
    pub lipschitz_ok: Option<bool>,
    pub noise_bound_max: Option<f64>,
    pub noise_bound_ok: Option<bool>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.lipschitz_ok.unwrap_or(true) && self.noise_bound_ok.unwrap_or(true)
    }
}

/// `(n+1)^2 tridiag(1, -2, 1)`.
pub fn laplacian_matrix(n: usize) -> Result<SquareMatrix> {
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let scale = ((n + 1) * (n + 1)) as f64;
    let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * scale,
        1 => scale,
        _ => 0.0,
    });
    SquareMatrix::with_symmetry(m, Symmetry::Symmetric)
}

/// The stiff test system `dU = (E U + sin U) dt + dB^H` on `[0, 0.1]` with
/// `E = (n+1)^2 tridiag(1, -2, 1)`, `u0_k = sqrt(2/(n+1)) sin(k pi/(n+1))` and
/// `b_i = e_i`, `m = n`.
pub fn builtin_laplacian_sine(n: usize, hurst: HurstParameter) -> Result<SemiLinearProblem> {
    let a = laplacian_matrix(n)?;
    let norm = (2.0 / (n + 1) as f64).sqrt();
    let u0 = DVector::from_fn(n, |k, _| norm * ((k + 1) as f64 * PI / (n + 1) as f64).sin());
    let noise = (0..n).map(|i| NoiseCoefficient::basis(n, i)).collect();
    Ok(
        SemiLinearProblem::new(a, Drift::Sine, noise, u0, (0.0, 0.1), hurst)?.with_constants(DeclaredConstants {
            lipschitz: Some(1.0),
            growth: Some(1.0),
            noise_bound: Some(1.0),
            semigroup: None,
        }),
    )
}

/// Scalar `dX = (-alpha X + f) dt + dB^H` on `[t0, t_end]`.
pub fn scalar_linear(
    alpha: f64,
    drift: Drift,
    x0: f64,
    (t0, t_end): (f64, f64),
    hurst: HurstParameter,
) -> Result<SemiLinearProblem> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha {alpha} must be positive")));
    }
    SemiLinearProblem::new(
        SquareMatrix::scalar(-alpha)?,
        drift,
        vec![NoiseCoefficient::basis(1, 0)],
        DVector::from_element(1, x0),
        (t0, t_end),
        hurst,
    )
}
