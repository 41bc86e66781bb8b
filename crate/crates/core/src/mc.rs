//! Monte Carlo sample paths of a non-homogeneous CTMC.
//!
//! Sojourns are drawn by inverting the integrated hazard: with `E ~ Exp(1)`, the
//! exit time from a state entered at `s` solves `∫ₛᵗ λ_state(u) du = E`. For
//! scaled-Weibull rates sharing one shape `α` the integral is `K·(t^α − s^α)`
//! and the inverse is closed form; mixed shapes fall back to bisection.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{bail, Result};
use crate::model::{sample_categorical, sample_initial_state, MultiStateModel};
use crate::rng::substream;
use crate::trajectory::ProbabilityTrajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sojourn {
    Exit(f64),
    /// The state is not left before the horizon (or is absorbing).
    Never,
}

/// Exit time from `state`, entered at `entry`, for a given unit-exponential draw.
pub fn sojourn_for_draw(model: &MultiStateModel, state: usize, entry: f64, draw: f64, horizon: f64) -> Sojourn {
    let rates = model.rates();
    let mut exits = rates.exits(state).peekable();
    let Some(first) = exits.peek().copied() else {
        return Sojourn::Never;
    };
    let shape = first.rate.shape;
    let hazard = |t: f64| rates.exits(state).map(|tr| tr.rate.integrated(entry, t)).sum::<f64>();
    if hazard(horizon) < draw {
        return Sojourn::Never;
    }
    if draw == 0.0 {
        return Sojourn::Exit(entry);
    }
    if rates.exits(state).all(|tr| tr.rate.shape == shape) {
        let k: f64 = rates.exits(state).map(|tr| tr.rate.intensity()).sum();
        let t = if shape == 1.0 { entry + draw / k } else { libm::pow(libm::pow(entry, shape) + draw / k, 1.0 / shape) };
        return Sojourn::Exit(t.min(horizon));
    }
    let (mut lo, mut hi) = (entry, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hazard(mid) < draw {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Sojourn::Exit(hi)
}

/// Draws the exit time from `state` entered at `entry`, truncated at `horizon`.
pub fn sample_sojourn<R: Rng + ?Sized>(model: &MultiStateModel, state: usize, entry: f64, horizon: f64, rng: &mut R) -> Sojourn {
    let draw: f64 = Exp1.sample(rng);
    sojourn_for_draw(model, state, entry, draw, horizon)
}

/// Destination of a jump out of `state` at time `t`, chosen with probability
/// `λ_{state,j}(t) / λ_state(t)`.
fn sample_destination<R: Rng + ?Sized>(model: &MultiStateModel, state: usize, t: f64, rng: &mut R) -> usize {
    let exits: Vec<_> = model.rates().exits(state).collect();
    let mut weights: Vec<f64> = exits.iter().map(|tr| tr.rate.at(t).unwrap_or(f64::INFINITY)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        // Rates vanish or blow up at t = 0; use the limiting split, carried by the
        // smallest shape.
        let min_shape = exits.iter().map(|tr| tr.rate.shape).fold(f64::INFINITY, f64::min);
        weights = exits.iter().map(|tr| if tr.rate.shape == min_shape { tr.rate.intensity() * tr.rate.shape } else { 0.0 }).collect();
    }
    exits[sample_categorical(&weights, rng)].to
}

/// Jump times and states of one realization, starting with `(0, initial state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    jumps: Vec<(f64, usize)>,
}

impl SamplePath {
    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn initial_state(&self) -> usize {
        self.jumps[0].1
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|&(s, _)| s <= t);
        self.jumps[k.saturating_sub(1)].1
    }
}

/// Simulates one path up to the model's mission time.
pub fn simulate_path<R: Rng + ?Sized>(model: &MultiStateModel, rng: &mut R) -> SamplePath {
    let start = sample_initial_state(model.initial(), rng);
    simulate_path_from(model, start, model.mission_time(), rng)
}

/// Simulates one path from a given state up to `horizon`.
pub fn simulate_path_from<R: Rng + ?Sized>(model: &MultiStateModel, start: usize, horizon: f64, rng: &mut R) -> SamplePath {
    let mut jumps = vec![(0.0, start)];
    let (mut t, mut state) = (0.0, start);
    loop {
        match sample_sojourn(model, state, t, horizon, rng) {
            Sojourn::Exit(exit) if exit < horizon => {
                let next = sample_destination(model, state, exit, rng);
                // A zero-length sojourn at the very start keeps times strictly increasing
                // only if we overwrite the placeholder entry.
                if exit == t {
                    jumps.last_mut().expect("non-empty").1 = next;
                } else {
                    jumps.push((exit, next));
                }
                t = exit;
                state = next;
            }
            _ => break,
        }
    }
    SamplePath { jumps }
}

/// Integer occupancy counts per (grid time, state).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyCounts {
    grid: Vec<f64>,
    states: usize,
    counts: Vec<u64>,
    paths: u64,
}

impl OccupancyCounts {
    pub fn new(grid: Vec<f64>, states: usize) -> Self {
        let counts = vec![0; grid.len() * states];
        Self { grid, states, counts, paths: 0 }
    }

    pub fn record(&mut self, path: &SamplePath) {
        for (k, &t) in self.grid.iter().enumerate() {
            self.counts[k * self.states + path.state_at(t)] += 1;
        }
        self.paths += 1;
    }

    /// Adds another tally on the same grid. Order of merging does not matter.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.grid, other.grid, "merging counts on different grids");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.paths += other.paths;
    }

    pub fn paths(&self) -> u64 {
        self.paths
    }

    pub fn count(&self, time_index: usize, state: usize) -> u64 {
        self.counts[time_index * self.states + state]
    }

    pub fn to_trajectory(&self) -> Result<ProbabilityTrajectory> {
        if self.paths == 0 {
            bail!(Domain, "no paths recorded");
        }
        let n = self.paths as f64;
        let rows = self.counts.chunks(self.states).map(|row| row.iter().map(|&c| c as f64 / n).collect()).collect();
        ProbabilityTrajectory::new(self.grid.clone(), rows)
    }
}

/// Simulates paths `range` of the run keyed by `master_seed`. Path `i` always uses
/// substream `i`, so any partition of the index range gives the same total.
pub fn accumulate_occupancy(model: &MultiStateModel, grid: &[f64], range: Range<u64>, master_seed: u64) -> OccupancyCounts {
    let horizon = grid.last().copied().unwrap_or(0.0).max(model.mission_time());
    let mut counts = OccupancyCounts::new(grid.to_vec(), model.state_count());
    for index in range {
        let mut rng = substream(master_seed, index);
        let start = sample_initial_state(model.initial(), &mut rng);
        let path = simulate_path_from(model, start, horizon, &mut rng);
        counts.record(&path);
    }
    counts
}

/// Empirical state-occupancy frequencies over `paths` independent paths.
pub fn estimate_state_probabilities(model: &MultiStateModel, paths: u64, grid: &[f64], master_seed: u64) -> Result<ProbabilityTrajectory> {
    if paths == 0 {
        bail!(Domain, "need at least one path");
    }
    accumulate_occupancy(model, grid, 0..paths, master_seed).to_trajectory()
}
