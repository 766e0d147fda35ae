//! Mean-square stability of the exponential Euler scheme: the condition
//! `K |A| |A^{-1}| < -mu[A]`, the maximal step size `h*`, and the fractional
//! Ornstein-Uhlenbeck process used to check pathwise attraction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::matfun::MatrixNormBundle;

mod fou;

pub use fou::{
    contraction_profile, fou_sample, pullback_attraction_check, FouConfig, FouSamples, PullbackReport, PullbackRow,
    FOU_TAIL_LIMIT,
};

const MAX_BRACKET_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityAssessment {
    pub condition_holds: bool,
    /// `K |A| |A^{-1}|`
    pub lhs: f64,
    /// `-mu[A]`
    pub rhs: f64,
    pub h_star: Option<f64>,
    /// `g(h*)`
    pub residual: Option<f64>,
}

impl StabilityAssessment {
    pub const CSV_HEADER: &'static str = "lhs,rhs,condition_holds,h_star,residual";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        writeln!(w, "{}", Self::CSV_HEADER)?;
        writeln!(
            w,
            "{:.16e},{:.16e},{},{},{}",
            self.lhs,
            self.rhs,
            self.condition_holds,
            opt(self.h_star),
            opt(self.residual)
        )?;
        Ok(())
    }
}

fn complete(bundle: &MatrixNormBundle) -> Result<f64> {
    bundle.inv_norm.ok_or_else(|| Error::invalid("norm bundle lacks |A^{-1}|; A is singular"))
}

fn validate_k(k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("Lipschitz constant {k} must be non-negative")))
    }
}

/// Evaluates the condition without solving for `h*`.
pub fn check_condition(bundle: &MatrixNormBundle, k: f64) -> Result<StabilityAssessment> {
    validate_k(k)?;
    let inv = complete(bundle)?;
    let lhs = k * bundle.op_norm * inv;
    let rhs = -bundle.log_norm;
    Ok(StabilityAssessment {
        condition_holds: lhs < rhs && bundle.log_norm <= 0.0,
        lhs,
        rhs,
        h_star: None,
        residual: None,
    })
}

/// `g(h) = 1 + h K |A^{-1}| |A| e^{h(|A| - mu)} - e^{-h mu}`.
pub fn threshold_function(bundle: &MatrixNormBundle, k: f64, h: f64) -> Result<f64> {
    let inv = complete(bundle)?;
    let mu = bundle.log_norm;
    Ok(1.0 + h * k * inv * bundle.op_norm * (h * (bundle.op_norm - mu)).exp() - (-h * mu).exp())
}

/// Positive root of the threshold function.
///
/// `g(0) = 0` and `g` starts out negative, so the root at zero is skipped by
/// first finding a point with `g < 0` near `1 / (|A| - mu)`, then doubling
/// until `g > 0` and bisecting.
pub fn solve_h_star(bundle: &MatrixNormBundle, k: f64) -> Result<f64> {
    let assessment = check_condition(bundle, k)?;
    if !assessment.condition_holds {
        return Err(Error::StabilityCondition {
            lhs: assessment.lhs,
            rhs: assessment.rhs,
        });
    }
    let g = |h: f64| -> Result<f64> {
        let v = threshold_function(bundle, k, h)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NoRoot(format!("threshold function is not finite at h = {h}")))
        }
    };

    let h0 = 1.0 / (bundle.op_norm - bundle.log_norm);
    let (mut lo, mut hi);
    if g(h0)? < 0.0 {
        lo = h0;
        hi = 2.0 * h0;
        let mut found = false;
        for _ in 0..MAX_BRACKET_STEPS {
            if g(hi)? > 0.0 {
                found = true;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if !found {
            return Err(Error::NoRoot(format!("no sign change up to h = {lo}")));
        }
    } else {
        // the start point already lies past the root
        hi = h0;
        lo = 0.5 * h0;
        let mut found = false;
        for _ in 0..MAX_BRACKET_STEPS {
            if g(lo)? < 0.0 {
                found = true;
                break;
            }
            hi = lo;
            lo *= 0.5;
        }
        if !found {
            return Err(Error::NoRoot("threshold function is not negative near zero".into()));
        }
    }

    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo)?, g(hi)?);
    Ok(if glo.abs() <= ghi.abs() { lo } else { hi })
}

/// Condition check plus `h*` when the condition holds.
pub fn assess(bundle: &MatrixNormBundle, k: f64) -> Result<StabilityAssessment> {
    let mut a = check_condition(bundle, k)?;
    if a.condition_holds {
        match solve_h_star(bundle, k) {
            Ok(h) => {
                a.h_star = Some(h);
                a.residual = Some(threshold_function(bundle, k, h)?);
            }
            // K = 0: no positive root, h* is unbounded
            Err(Error::NoRoot(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(a)
}
