//! Reliability assessment of multi-state systems whose state transitions form a
//! non-homogeneous continuous-time Markov chain.
//!
//! The state-probability vector `p(t)` obeys the forward Kolmogorov equations
//! `p'(t) = p(t) Q(t)`. This crate solves them four ways:
//!
//! - [`ode`]: fixed-step classical Runge–Kutta, plus the closed-form solution of the
//!   dual-processor example used as ground truth.
//! - [`mc`]: Monte Carlo sample paths drawn by inverting the integrated hazard.
//! - [`pinn`]: a physics-informed neural surrogate trained on the Kolmogorov residual.
//! - [`pigan`]: a physics-informed GAN that carries uncertainty in the initial
//!   condition and fuses inspection measurements.
//!
//! Everything here is `no_std` (with `alloc`) and deterministic given its seeds.
//! File formats, timing, threads, and the command line live in the `pirel` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod mc;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod ode;
pub mod pigan;
pub mod pinn;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    dual_processor_model, InitialCondition, MeasurementSet, MultiStateModel, RateMatrix, StateSpace, TransitionRateModel, WeibullRate,
};
pub use trajectory::ProbabilityTrajectory;
