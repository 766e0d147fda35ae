//! Semi-linear problems and the exponential Euler scheme.

mod problem;
mod scheme;

pub use problem::{
    builtin_laplacian_sine, laplacian_matrix, scalar_linear, AssumptionReport, DeclaredConstants, Drift,
    SemiLinearProblem,
};
pub use scheme::{exp_euler_step, integrate, reference_solution, Integrator, Trajectory, DIVERGENCE_THRESHOLD};
