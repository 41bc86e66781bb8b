use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Tolerance on trajectory entries and row sums.
pub const TRAJECTORY_TOLERANCE: f64 = 1e-9;

/// State-probability vectors `p(t)` on an ordered time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTrajectory {
    times: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

impl ProbabilityTrajectory {
    pub fn new(times: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != probs.len() {
            bail!(Shape, "{} times but {} probability rows", times.len(), probs.len());
        }
        if let Some(first) = probs.first() {
            if let Some(k) = probs.iter().position(|p| p.len() != first.len()) {
                bail!(Shape, "row {k} has {} states, expected {}", probs[k].len(), first.len());
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(Shape, "times must be strictly increasing");
        }
        Ok(Self { times, probs })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_count(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn at(&self, index: usize) -> (f64, &[f64]) {
        (self.times[index], &self.probs[index])
    }

    pub fn reliability(&self, up_states: &[usize]) -> Vec<f64> {
        self.probs.iter().map(|p| crate::ode::reliability_from_probs(p, up_states)).collect()
    }

    /// First row that is not a probability vector within [`TRAJECTORY_TOLERANCE`].
    pub fn check_simplex(&self) -> core::result::Result<(), (usize, alloc::string::String)> {
        for (k, p) in self.probs.iter().enumerate() {
            crate::model::check_simplex(p, TRAJECTORY_TOLERANCE).map_err(|e| (k, e))?;
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.times == other.times && self.state_count() == other.state_count()
    }
}

/// Evenly spaced grid from `start` to `end` inclusive, stepping by `step`.
///
/// The last point is `end` when `(end − start)/step` is integral within rounding.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        bail!(Domain, "step must be positive, got {step}");
    }
    if !(end >= start) || !start.is_finite() || !end.is_finite() {
        bail!(Domain, "grid end {end} precedes start {start}");
    }
    let n = libm::floor((end - start) / step + 1e-9) as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
