use expfbm::harness::{
    errors_csv, fit_loglog, holder_exponent, parse_config, run_convergence, run_simulation, slopes_csv, NoiseMode,
};
use expfbm::integrator::builtin_laplacian_sine;
use expfbm::noise::{HurstParameter, TimeGrid};
use proptest::prelude::*;

const SMALL: &str = "n = 4\nhurst_values = 0.7\ncoarse_steps = 4,8,16\nref_steps = 256\npaths = 24\n";

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let a = run_convergence(&parse_config(&format!("{SMALL}seed = 5")).unwrap()).unwrap();
    let b = run_convergence(&parse_config(&format!("{SMALL}seed = 5")).unwrap()).unwrap();
    let c = run_convergence(&parse_config(&format!("{SMALL}seed = 6")).unwrap()).unwrap();
    assert_eq!(errors_csv(&a), errors_csv(&b));
    assert_eq!(slopes_csv(&a), slopes_csv(&b));
    assert_ne!(errors_csv(&a), errors_csv(&c));
}

#[test]
fn simulation_is_reproducible() {
    let cfg = parse_config("n = 5\nsteps = 32\nseed = 12").unwrap();
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    assert_eq!(a.states, b.states);
}

#[test]
fn error_shrinks_with_the_step() {
    let cfg =
        parse_config("n = 4\nhurst_values = 0.8\ncoarse_steps = 4,8,16,32\nref_steps = 512\npaths = 500\nseed = 21")
            .unwrap();
    let report = run_convergence(&cfg).unwrap();
    let rows: Vec<_> = report.rows_for(0.8).collect();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[1].rmse < w[0].rmse, "{} !< {}", w[1].rmse, w[0].rmse);
    }
    assert!(report.warnings.is_empty());
}

#[test]
fn solution_paths_are_holder_continuous() {
    for hv in [0.6, 0.8] {
        let problem = builtin_laplacian_sine(4, HurstParameter::new(hv).unwrap()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.1, 2048).unwrap();
        let fit = holder_exponent(&problem, &grid, NoiseMode::RiemannOracle, &[1, 2, 4, 8], 40, 3).unwrap();
        assert!(fit.slope >= 2.0 * hv - 0.2, "H = {hv}: slope {}", fit.slope);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_power_laws_are_recovered(p in 0.2f64..3.0, c in 1e-4f64..10.0) {
        let hs: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
        let points: Vec<(f64, f64)> = hs.iter().map(|&h| (h, c * h.powf(p))).collect();
        let fit = fit_loglog(&points).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }
}
