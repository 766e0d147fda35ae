mod common;

use common::fou_variance_quadrature;
use expfbm::integrator::{scalar_linear, Drift};
use expfbm::matfun::{norm_bundle, SquareMatrix};
use expfbm::noise::{conv_riemann_oracle, sample_fbm_increments, HurstParameter, TimeGrid};
use expfbm::stability::{assess, contraction_profile, fou_sample, solve_h_star, threshold_function, FouConfig};
use nalgebra::DVector;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn hurst(v: f64) -> HurstParameter {
    HurstParameter::new(v).unwrap()
}

fn stationary_variance(alpha: f64, h: f64) -> f64 {
    h * gamma(2.0 * h) * alpha.powf(-2.0 * h)
}

#[test]
fn quadrature_oracle_matches_closed_form() {
    for (alpha, h) in [(1.0, 0.75), (2.0, 0.6), (0.5, 0.9)] {
        let q = fou_variance_quadrature(alpha, h, 40.0 / alpha, 2000);
        let exact = stationary_variance(alpha, h);
        assert!(((q - exact) / exact).abs() < 1e-6, "alpha={alpha} H={h}: {q} vs {exact}");
    }
}

#[test]
fn sampled_variance_matches_closed_form() {
    let (alpha, h) = (2.0, 0.6);
    let s = fou_sample(&FouConfig::new(alpha, hurst(h)).unwrap(), 1.0, 20_000, 8).unwrap();
    let exact = stationary_variance(alpha, h);
    assert!(((s.model_variance - exact) / exact).abs() < 0.01);
    assert!((s.second_moment() - exact).abs() < 4.0 * s.second_moment_stderr());
    assert!(s.tail_bound <= 1e-8);
}

#[test]
fn short_window_is_rejected() {
    let cfg = FouConfig::new(1.0, hurst(0.7)).unwrap().with_window(5.0);
    assert!(fou_sample(&cfg, 0.0, 10, 1).is_err());
}

#[test]
fn contraction_below_h_star() {
    let p = scalar_linear(1.0, Drift::custom(|_, x| x.map(|v| 0.3 * v.sin())), 1.0, (0.0, 10.0), hurst(0.7)).unwrap();
    let bundle = norm_bundle(p.a()).unwrap();
    let h_star = solve_h_star(&bundle, 0.3).unwrap();
    let grid = TimeGrid::uniform(0.0, 10.0, (10.0 / (0.5 * h_star)).ceil() as usize).unwrap();
    let inc = sample_fbm_increments(&grid, p.hurst(), 1, 1, 6).unwrap();
    let noise = conv_riemann_oracle(p.a(), p.noise(), &grid, &inc).unwrap();
    let gaps = contraction_profile(&p, &noise, 0, DVector::from_element(1, -3.0)).unwrap();
    for w in gaps.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    assert!(gaps.last().unwrap() < &(gaps[0] * 1e-2));
}

#[test]
fn diagonal_matrix_assessment() {
    let a = SquareMatrix::from_diagonal(&[-1.0, -3.0]).unwrap();
    let out = assess(&norm_bundle(&a).unwrap(), 0.2).unwrap();
    assert!(out.condition_holds);
    let h = out.h_star.unwrap();
    assert!(out.residual.unwrap().abs() <= 1e-12 * (1f64).max((h).exp()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h_star_residual_and_sign_change(alpha in 0.1f64..100.0, frac in 0.01f64..0.95) {
        let bundle = norm_bundle(&SquareMatrix::scalar(-alpha).unwrap()).unwrap();
        let k = frac * alpha;
        let h = solve_h_star(&bundle, k).unwrap();
        let g = threshold_function(&bundle, k, h).unwrap();
        prop_assert!(g.abs() <= 1e-12 * (1f64).max((h * alpha).exp()));
        prop_assert!(threshold_function(&bundle, k, 0.5 * h).unwrap() < 0.0);
        prop_assert!(threshold_function(&bundle, k, 2.0 * h).unwrap() > 0.0);
    }
}
