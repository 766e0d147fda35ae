mod common;

use common::{hadamard_matrix, hadamard_mild_solution};
use expfbm::integrator::{
    builtin_laplacian_sine, exp_euler_step, integrate, laplacian_matrix, reference_solution, scalar_linear, Drift,
    Integrator, SemiLinearProblem,
};
use expfbm::matfun::{expm, phi1, SquareMatrix};
use expfbm::noise::{
    conv_riemann_oracle, sample_fbm_increments, Aggregator, HurstParameter, NoiseBlock, NoiseCoefficient, TimeGrid,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn hurst(v: f64) -> HurstParameter {
    HurstParameter::new(v).unwrap()
}

fn oracle_noise(problem: &SemiLinearProblem, grid: &TimeGrid, paths: usize, seed: u64) -> NoiseBlock {
    let inc = sample_fbm_increments(grid, problem.hurst(), problem.noise_count(), paths, seed).unwrap();
    conv_riemann_oracle(problem.a(), problem.noise(), grid, &inc).unwrap()
}

#[test]
fn one_step_with_noise_reproduces_mild_solution() {
    let lambdas = [-1.0, -4.0, -9.0, -100.0];
    let a = SquareMatrix::new(hadamard_matrix(lambdas)).unwrap();
    let c = DVector::from_row_slice(&[1.0, 2.0, -1.0, 0.5]);
    let problem = SemiLinearProblem::new(
        a.clone(),
        Drift::Constant(c.clone()),
        vec![NoiseCoefficient::basis(4, 0), NoiseCoefficient::basis(4, 2)],
        DVector::from_row_slice(&[0.2, -0.1, 0.4, 1.0]),
        (0.0, 0.3),
        hurst(0.7),
    )
    .unwrap();
    let h = 0.3;
    let v = problem.u0().clone();
    let i1 = [0.1, -0.2, 0.05, 0.3];
    let i2 = [-0.4, 0.0, 0.25, 0.1];
    let next = exp_euler_step(&problem, 0, 0.0, h, &v, &[&i1, &i2]).unwrap();
    let det = hadamard_mild_solution(lambdas, &v, &c, h);
    let expected = det + DVector::from_row_slice(&i1) + DVector::from_row_slice(&i2);
    assert!((next - &expected).norm() <= 1e-12 * expected.norm());
}

#[test]
fn homogeneous_pairs_differ_by_the_semigroup() {
    let a = laplacian_matrix(6).unwrap();
    let problem = builtin_laplacian_sine(6, hurst(0.8)).unwrap().with_drift(Drift::Zero);
    let other = DVector::from_fn(6, |i, _| (i as f64).cos());
    let grid = TimeGrid::new(vec![0.0, 0.003, 0.01, 0.02, 0.05, 0.07, 0.1]).unwrap();
    let noise = oracle_noise(&problem, &grid, 1, 4);
    let first = integrate(&problem, &noise, 0).unwrap();
    let second = integrate(&problem.clone().with_initial(other.clone()).unwrap(), &noise, 0).unwrap();
    let gap0 = problem.u0() - &other;
    for (k, t) in grid.points().iter().enumerate() {
        let want = expm(&a, *t).unwrap().into_entries() * &gap0;
        let got = &first.states[k] - &second.states[k];
        assert!((got - &want).norm() <= 1e-12 * gap0.norm(), "t = {t}");
    }
}

#[test]
fn stiffness_does_not_restrict_the_step() {
    let grid = TimeGrid::uniform(0.0, 0.1, 8).unwrap();
    for scale in [1e2, 1e6] {
        let a = SquareMatrix::new(hadamard_matrix([-1.0, -scale / 10.0, -scale / 2.0, -scale])).unwrap();
        let problem = SemiLinearProblem::new(
            a,
            Drift::Sine,
            vec![NoiseCoefficient::basis(4, 1)],
            DVector::from_element(4, 1.0),
            (0.0, 0.1),
            hurst(0.7),
        )
        .unwrap();
        let noise = oracle_noise(&problem, &grid, 1, 2);
        let traj = integrate(&problem, &noise, 0).unwrap();
        assert_eq!(traj.states.len(), 9);
        assert!(traj.states.iter().all(|s| s.iter().all(|x| x.is_finite() && x.abs() < 10.0)));
    }
}

#[test]
fn fine_reference_is_self_consistent() {
    let problem = builtin_laplacian_sine(4, hurst(0.75)).unwrap();
    let fine = TimeGrid::uniform(0.0, 0.1, 4096).unwrap();
    let mid = TimeGrid::uniform(0.0, 0.1, 2048).unwrap();
    let noise = oracle_noise(&problem, &fine, 1, 8);
    let on_fine = reference_solution(&problem, &noise.summed(), 0).unwrap();
    let coarse_noise = Aggregator::new(problem.a(), &fine, &mid).unwrap().apply(&noise.summed()).unwrap();
    let on_mid = reference_solution(&problem, &coarse_noise, 0).unwrap();
    let gap = (on_fine.final_state() - on_mid.final_state()).norm();
    assert!(gap < 1e-3, "gap {gap}");
}

#[test]
fn scalar_linear_noiseless_decay() {
    let p = scalar_linear(3.0, Drift::Zero, 2.0, (0.0, 1.0), hurst(0.6)).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 5).unwrap();
    let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
    for (t, x) in grid.points().iter().zip(&traj.states) {
        assert!((x[0] - 2.0 * (-3.0 * t).exp()).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_drift_scalar_is_exact(lam in 1e-3f64..1e5, c in -5.0f64..5.0, x0 in -5.0f64..5.0, n in 1usize..20) {
        let a = SquareMatrix::scalar(-lam).unwrap();
        let p = SemiLinearProblem::new(
            a.clone(),
            Drift::Constant(DVector::from_element(1, c)),
            vec![],
            DVector::from_element(1, x0),
            (0.0, 1.0),
            hurst(0.7),
        ).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
        let traj = Integrator::new(&p, &grid).unwrap().run_noiseless().unwrap();
        for (t, x) in grid.points().iter().zip(&traj.states) {
            let drift = if *t > 0.0 { phi1(&a, *t).unwrap().entries()[(0, 0)] * c } else { 0.0 };
            let want = (-lam * t).exp() * x0 + drift;
            prop_assert!((x[0] - want).abs() <= 1e-12 * want.abs().max(1e-3));
        }
    }
}
