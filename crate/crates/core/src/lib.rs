//! Exponential Euler integration of stiff semi-linear SDE systems
//!
//! ```text
//! dU = (A U + f(t, U)) dt + sum_i b_i(t) dB^H_i(t),   1/2 < H < 1
//! ```
//!
//! driven by independent fractional Brownian motions. The crate is split into
//!
//! - [`matfun`]: matrix exponential, `A^{-1}(e^{Ah} - I)` through the phi-1 function,
//!   logarithmic and operator norms;
//! - [`noise`]: the fBm kernel, the covariance of the stochastic convolution
//!   increments, exact Cholesky sampling, the Riemann-sum oracle and aggregation of
//!   fine noise onto coarser grids;
//! - [`integrator`]: problem definition and the exponential Euler loop;
//! - [`stability`]: the step-size stability condition and fractional
//!   Ornstein-Uhlenbeck checks;
//! - [`harness`]: the Monte Carlo convergence study, config parsing and CSV reports.

pub mod error;
pub mod harness;
pub mod integrator;
pub mod matfun;
pub mod noise;
pub mod stability;

pub use error::{Error, Result};
