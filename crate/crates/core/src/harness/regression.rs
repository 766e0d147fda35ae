use crate::error::{Error, Result};

/// Least-squares line through `(log h, log e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the residual sum of squares in log space.
    pub residual: f64,
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} points, need at least 2", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateFit(format!("non-positive point ({}, {})", p.0, p.1)));
    }
    for (i, a) in points.iter().enumerate() {
        if points[..i].iter().any(|b| b.0 == a.0) {
            return Err(Error::DegenerateFit(format!("duplicate abscissa {}", a.0)));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: rss.sqrt(),
    })
}

/// Slope of the log-log least-squares line through `(h, rmse)` points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    fit_loglog(points).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_points() {
        assert_relative_eq!(fit_slope(&[(1.0, 1.0), (2.0, 2.0)]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_power_law() {
        for c in [1e-3, 0.7, 42.0] {
            let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625].iter().map(|&h| (h, c * f64::powf(h, 0.7))).collect();
            let fit = fit_loglog(&pts).unwrap();
            assert_relative_eq!(fit.slope, 0.7, epsilon = 1e-12);
            assert!(fit.residual < 1e-12);
        }
    }

    #[test]
    fn reference_error_column() {
        let pts = [
            (0.0015625, 1.603272e-02),
            (0.003125, 3.459247e-02),
            (0.00625, 7.183743e-02),
            (0.0125, 1.398038e-01),
            (0.025, 2.501251e-01),
        ];
        // numpy polyfit on the logs: 0.99419911
        assert_relative_eq!(fit_slope(&pts).unwrap(), 0.99419911, epsilon = 1e-8);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_slope(&[(1.0, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_slope(&[(1.0, 1.0), (1.0, 2.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_slope(&[(1.0, 0.0), (2.0, 2.0)]), Err(Error::DegenerateFit(_))));
    }

    proptest! {
        #[test]
        fn recovers_power_laws(p in -3.0f64..3.0, c in 1e-3f64..1e3, n in 2usize..8) {
            let pts: Vec<(f64, f64)> = (0..n).map(|k| {
                let h = 0.5f64.powi(k as i32);
                (h, c * h.powf(p))
            }).collect();
            prop_assert!((fit_slope(&pts).unwrap() - p).abs() < 1e-10);
        }
    }
}
