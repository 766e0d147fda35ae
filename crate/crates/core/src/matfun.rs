//! Dense matrix functions used by the exponential Euler scheme.
//!
//! Symmetric matrices go through a cached spectral decomposition. General
//! matrices use scaling-and-squaring with a degree-13 Padé approximant. The
//! phi-1 product `A^{-1}(e^{Ah} - I) = h phi1(Ah)` never forms `A^{-1}`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry hint.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Below this magnitude the scalar phi-1 function is evaluated by its Taylor series.
pub const PHI1_TAYLOR_CUTOFF: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    General,
}

/// A finite, square, dense matrix.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    entries: DMatrix<f64>,
    symmetry: Symmetry,
    spectral: OnceLock<SymmetricEigen<f64, nalgebra::Dyn>>,
}

impl SquareMatrix {
    /// Wraps `entries`, detecting symmetry automatically.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_entries(&entries)?;
        let symmetry = if is_symmetric(&entries) {
            Symmetry::Symmetric
        } else {
            Symmetry::General
        };
        Ok(Self::assemble(entries, symmetry))
    }

    /// Wraps `entries` with an explicit hint. A `Symmetric` hint is verified.
    pub fn with_symmetry(entries: DMatrix<f64>, symmetry: Symmetry) -> Result<Self> {
        check_entries(&entries)?;
        if symmetry == Symmetry::Symmetric && !is_symmetric(&entries) {
            return Err(Error::invalid("matrix marked symmetric is not symmetric"));
        }
        Ok(Self::assemble(entries, symmetry))
    }

    fn assemble(entries: DMatrix<f64>, symmetry: Symmetry) -> Self {
        Self {
            entries,
            symmetry,
            spectral: OnceLock::new(),
        }
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn scalar(a: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, a))
    }

    pub fn zeros(n: usize) -> Self {
        Self::assemble(DMatrix::zeros(n, n), Symmetry::Symmetric)
    }

    pub fn identity(n: usize) -> Self {
        Self::assemble(DMatrix::identity(n, n), Symmetry::Symmetric)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry == Symmetry::Symmetric
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_symmetry(&self.entries * c, self.symmetry)
    }

    /// Eigen-decomposition of the matrix. Only meaningful for symmetric matrices.
    pub(crate) fn spectral(&self) -> &SymmetricEigen<f64, nalgebra::Dyn> {
        self.spectral
            .get_or_init(|| SymmetricEigen::new(symmetric_part(&self.entries)))
    }

    /// `f(A)` for symmetric `A` through its spectral decomposition.
    pub(crate) fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let eig = self.spectral();
        let q = &eig.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            scaled.column_mut(j).scale_mut(fj);
        }
        scaled * q.transpose()
    }
}

fn check_entries(entries: &DMatrix<f64>) -> Result<()> {
    if entries.nrows() != entries.ncols() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            entries.nrows(),
            entries.ncols()
        )));
    }
    if entries.nrows() == 0 {
        return Err(Error::invalid("matrix dimension must be positive"));
    }
    if entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return false;
            }
        }
    }
    true
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Scalar `(e^z - 1) / z`, continuous at zero.
pub fn phi1_scalar(z: f64) -> f64 {
    if z.abs() < PHI1_TAYLOR_CUTOFF {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        z.exp_m1() / z
    }
}

/// `e^{At}`.
pub fn expm(a: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    if !t.is_finite() {
        return Err(Error::invalid(format!("time {t} is not finite")));
    }
    let result = match a.symmetry() {
        Symmetry::Symmetric => {
            let e = a.spectral_map(|lambda| (lambda * t).exp());
            SquareMatrix::assemble(symmetric_part(&e), Symmetry::Symmetric)
        }
        Symmetry::General => SquareMatrix::assemble(expm_pade(&(a.entries() * t)), Symmetry::General),
    };
    if result.entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix exponential overflowed"));
    }
    Ok(result)
}

/// `A^{-1}(e^{Ah} - I)`, evaluated as `h phi1(Ah)` so singular `A` is allowed.
pub fn phi1(a: &SquareMatrix, h: f64) -> Result<SquareMatrix> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step size {h} must be positive and finite")));
    }
    let result = match a.symmetry() {
        Symmetry::Symmetric => {
            let p = a.spectral_map(|lambda| h * phi1_scalar(lambda * h));
            SquareMatrix::assemble(symmetric_part(&p), Symmetry::Symmetric)
        }
        Symmetry::General => {
            // exp([[A, I], [0, 0]] h) carries h phi1(Ah) in its upper-right block
            let n = a.dim();
            let mut aug = DMatrix::zeros(2 * n, 2 * n);
            aug.view_mut((0, 0), (n, n)).copy_from(&(a.entries() * h));
            aug.view_mut((0, n), (n, n)).fill_with_identity();
            aug.view_mut((0, n), (n, n)).scale_mut(h);
            let e = expm_pade(&aug);
            SquareMatrix::assemble(e.view((0, n), (n, n)).into_owned(), Symmetry::General)
        }
    };
    if result.entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("phi1 evaluation overflowed"));
    }
    Ok(result)
}

/// Logarithmic norm: largest eigenvalue of `(A + A^T) / 2`.
pub fn log_norm(a: &SquareMatrix) -> f64 {
    let eig = match a.symmetry() {
        Symmetry::Symmetric => a.spectral().eigenvalues.clone(),
        Symmetry::General => SymmetricEigen::new(symmetric_part(a.entries())).eigenvalues,
    };
    eig.max()
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &SquareMatrix) -> f64 {
    singular_range(a).1
}

/// `(smallest, largest)` singular values.
fn singular_range(a: &SquareMatrix) -> (f64, f64) {
    match a.symmetry() {
        Symmetry::Symmetric => {
            let abs = a.spectral().eigenvalues.map(f64::abs);
            (abs.min(), abs.max())
        }
        Symmetry::General => {
            let sv = a.entries().clone().singular_values();
            (sv.min(), sv.max())
        }
    }
}

/// Euclidean operator norm, logarithmic norm and inverse norm of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNormBundle {
    pub op_norm: f64,
    pub log_norm: f64,
    pub inv_norm: Option<f64>,
}

/// Norms including `|A^{-1}|`; fails for (numerically) singular `A`.
pub fn norm_bundle(a: &SquareMatrix) -> Result<MatrixNormBundle> {
    let (smin, smax) = singular_range(a);
    if smin <= singularity_threshold(a.dim(), smax) {
        return Err(Error::SingularMatrix {
            smallest_singular_value: smin,
        });
    }
    Ok(MatrixNormBundle {
        op_norm: smax,
        log_norm: log_norm(a),
        inv_norm: Some(1.0 / smin),
    })
}

/// Norms without the inverse; never fails.
pub fn norm_bundle_partial(a: &SquareMatrix) -> MatrixNormBundle {
    MatrixNormBundle {
        op_norm: op_norm(a),
        log_norm: log_norm(a),
        inv_norm: None,
    }
}

pub(crate) fn singularity_threshold(n: usize, smax: f64) -> f64 {
    n as f64 * f64::EPSILON * smax
}

/// Checks `A` is regular, returning its smallest singular value.
pub fn ensure_regular(a: &SquareMatrix) -> Result<f64> {
    let (smin, smax) = singular_range(a);
    if smin <= singularity_threshold(a.dim(), smax) || smax == 0.0 {
        return Err(Error::SingularMatrix {
            smallest_singular_value: smin,
        });
    }
    Ok(smin)
}

/// Smallest `L` with `|A e^{A tau}| <= L / tau` over the sampled `taus`.
pub fn semigroup_constant(a: &SquareMatrix, taus: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &tau in taus {
        if !(tau > 0.0) {
            return Err(Error::invalid("semigroup lags must be positive"));
        }
        let e = expm(a, tau)?;
        let prod = SquareMatrix::new(a.entries() * e.entries())?;
        worst = worst.max(tau * op_norm(&prod));
    }
    Ok(worst)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaling and squaring with Padé approximants of degree 3..13.
fn expm_pade(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return ident;
    }

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a2 = a * a;
            let mut u = &ident * coeffs[1];
            let mut v = &ident * coeffs[0];
            let mut power = ident.clone();
            for k in 1..=m / 2 {
                power = &power * &a2;
                u += &power * coeffs[2 * k + 1];
                v += &power * coeffs[2 * k];
            }
            let u = a * u;
            return pade_solve(&u, &v);
        }
    }

    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = a * 2f64.powi(-s);
    let b = &PADE13;
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .unwrap_or_else(|| DMatrix::from_element(u.nrows(), u.ncols(), f64::NAN))
}

/// `e^{Ah}` and `h phi1(Ah)` for one step size.
#[derive(Debug, Clone)]
pub struct StepOperators {
    pub step: f64,
    pub exp: DMatrix<f64>,
    pub phi1: DMatrix<f64>,
}

impl StepOperators {
    pub fn new(a: &SquareMatrix, h: f64) -> Result<Self> {
        Ok(Self {
            step: h,
            exp: expm(a, h)?.into_entries(),
            phi1: phi1(a, h)?.into_entries(),
        })
    }
}

/// Step operators keyed by the exact bit pattern of the step size.
///
/// Fill it with [`OperatorCache::warm`] and share it read-only afterwards.
#[derive(Debug, Clone)]
pub struct OperatorCache {
    a: SquareMatrix,
    entries: HashMap<u64, Arc<StepOperators>>,
}

impl OperatorCache {
    pub fn new(a: SquareMatrix) -> Self {
        Self {
            a,
            entries: HashMap::new(),
        }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn warm(&mut self, steps: impl IntoIterator<Item = f64>) -> Result<()> {
        for h in steps {
            self.get_or_insert(h)?;
        }
        Ok(())
    }

    pub fn get_or_insert(&mut self, h: f64) -> Result<Arc<StepOperators>> {
        if let Some(ops) = self.entries.get(&h.to_bits()) {
            return Ok(Arc::clone(ops));
        }
        let ops = Arc::new(StepOperators::new(&self.a, h)?);
        self.entries.insert(h.to_bits(), Arc::clone(&ops));
        Ok(ops)
    }

    pub fn get(&self, h: f64) -> Option<&StepOperators> {
        self.entries.get(&h.to_bits()).map(|ops| ops.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
