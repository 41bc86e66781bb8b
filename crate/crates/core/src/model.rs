//! Multi-state Markov reliability models.
//!
//! A model is a finite state space `{0, …, M}`, a time-dependent generator `Q(t)`
//! whose off-diagonal entries are scaled Weibull hazards `c·λ₀·α·t^(α−1)`, an initial
//! condition, the set of up states, and a mission time.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{bail, Error, Result};

/// Tolerance used when checking that a probability vector sums to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;
/// Looser tolerance for measurement vectors, which are often rounded.
pub const MEASUREMENT_TOLERANCE: f64 = 1e-6;
/// Row-sum tolerance for [`validate_generator`].
pub const GENERATOR_TOLERANCE: f64 = 1e-12;

/// Weibull hazard `λ₀·α·t^(α−1)`.
///
/// For `α < 1` the hazard is singular at `t = 0`, which is reported as a domain error.
pub fn weibull_transition_rate(scale: f64, shape: f64, t: f64) -> Result<f64> {
    if !(scale >= 0.0) || !scale.is_finite() {
        bail!(Domain, "rate scale must be finite and non-negative, got {scale}");
    }
    if !(shape > 0.0) || !shape.is_finite() {
        bail!(Domain, "shape must be finite and positive, got {shape}");
    }
    if !(t >= 0.0) || !t.is_finite() {
        bail!(Domain, "time must be finite and non-negative, got {t}");
    }
    if shape < 1.0 && t == 0.0 {
        bail!(Domain, "hazard with shape {shape} < 1 is singular at t = 0");
    }
    if shape == 1.0 {
        return Ok(scale);
    }
    Ok(scale * shape * libm::pow(t, shape - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateIndex(pub usize);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateSpace {
    count: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(count: usize) -> Result<Self> {
        if count < 2 {
            bail!(InvalidModel, "a state space needs at least 2 states, got {count}");
        }
        Ok(Self { count, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut space = Self::new(labels.len())?;
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn contains(&self, state: usize) -> bool {
        state < self.count
    }
}

/// Scaled Weibull rate `multiplier·λ₀·α·t^(α−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeibullRate {
    /// Dimensionless multiplier `c` (a branch probability, or a count of
    /// parallel components times one).
    pub multiplier: f64,
    /// Rate scale `λ₀`, in 1/time^α.
    pub scale: f64,
    /// Shape `α`.
    pub shape: f64,
}

impl WeibullRate {
    pub fn new(multiplier: f64, scale: f64, shape: f64) -> Result<Self> {
        if !(multiplier >= 0.0) || !multiplier.is_finite() {
            bail!(InvalidModel, "rate multiplier must be finite and non-negative, got {multiplier}");
        }
        // Validates scale and shape.
        weibull_transition_rate(scale, shape, 1.0)?;
        Ok(Self { multiplier, scale, shape })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.multiplier * weibull_transition_rate(self.scale, self.shape, t)?)
    }

    /// `c·λ₀`, the coefficient of `t^α` in the integrated hazard.
    pub fn intensity(&self) -> f64 {
        self.multiplier * self.scale
    }

    /// Integrated hazard `∫ₛᵗ rate(u) du = c·λ₀·(t^α − s^α)`.
    pub fn integrated(&self, from: f64, to: f64) -> f64 {
        self.intensity() * (libm::pow(to, self.shape) - libm::pow(from, self.shape))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: WeibullRate,
}

/// Off-diagonal rate functions of `Q(t)`, stored sparsely.
///
/// The diagonal is never stored; it is the negated row sum of the off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRateModel {
    states: usize,
    transitions: Vec<Transition>,
    exits: Vec<Vec<usize>>,
}

impl TransitionRateModel {
    pub fn new(states: usize, transitions: Vec<Transition>) -> Result<Self> {
        let mut exits = vec![Vec::new(); states];
        for (index, tr) in transitions.iter().enumerate() {
            if tr.from >= states || tr.to >= states {
                bail!(InvalidModel, "transition {}→{} references a state outside 0..{states}", tr.from, tr.to);
            }
            if tr.from == tr.to {
                bail!(InvalidModel, "self-transition {}→{} is not allowed", tr.from, tr.to);
            }
            if exits[tr.from].iter().any(|&k: &usize| transitions[k].to == tr.to) {
                bail!(InvalidModel, "duplicate transition {}→{}", tr.from, tr.to);
            }
            WeibullRate::new(tr.rate.multiplier, tr.rate.scale, tr.rate.shape)?;
            exits[tr.from].push(index);
        }
        Ok(Self { states, transitions, exits })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Transitions leaving `state` with a positive intensity.
    pub fn exits(&self, state: usize) -> impl Iterator<Item = &Transition> + '_ {
        self.exits[state].iter().map(move |&k| &self.transitions[k]).filter(|tr| tr.rate.intensity() > 0.0)
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        self.exits(state).next().is_none()
    }

    pub fn matrix_at(&self, t: f64) -> Result<RateMatrix> {
        let mut q = RateMatrix::zeros(self.states);
        for tr in &self.transitions {
            q.data[tr.from * self.states + tr.to] = tr.rate.at(t)?;
        }
        for i in 0..self.states {
            let row = &mut q.data[i * self.states..(i + 1) * self.states];
            let off: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).sum();
            row[i] = -off;
        }
        Ok(q)
    }
}

/// Dense square matrix of transition rates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RateMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                bail!(Shape, "row {i} has {} entries, expected {n}", row.len());
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Row vector times matrix: `out = p·Q`.
    pub fn left_mul_into(&self, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(self.row(i)) {
                *o += pi * q;
            }
        }
    }

    pub fn left_mul(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.left_mul_into(p, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorViolation {
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    RowSumNonzero { row: usize, sum: f64 },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for GeneratorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegativeOffDiagonal { row, col, value } => {
                write!(f, "negative off-diagonal at ({row}, {col}): {value}")
            }
            Self::RowSumNonzero { row, sum } => write!(f, "row sum nonzero in row {row}: {sum}"),
            Self::NonFinite { row, col } => write!(f, "non-finite entry at ({row}, {col})"),
        }
    }
}

impl core::error::Error for GeneratorViolation {}

/// Checks that `q` is a valid generator: finite, non-negative off-diagonals and rows
/// summing to zero within [`GENERATOR_TOLERANCE`]. Reports the first offending entry.
pub fn validate_generator(q: &RateMatrix) -> core::result::Result<(), GeneratorViolation> {
    for i in 0..q.dim() {
        let row = q.row(i);
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeneratorViolation::NonFinite { row: i, col: j });
            }
            if j != i && v < 0.0 {
                return Err(GeneratorViolation::NegativeOffDiagonal { row: i, col: j, value: v });
            }
        }
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum) > GENERATOR_TOLERANCE {
            return Err(GeneratorViolation::RowSumNonzero { row: i, sum });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitialCondition {
    /// Start in a known state.
    Deterministic(usize),
    /// Start from a fixed probability vector.
    Simplex(Vec<f64>),
    /// Start in `high` with probability `ρ₀` and in `low` otherwise, where
    /// `ρ₀ ~ Beta(alpha, beta)` carries epistemic uncertainty.
    BernoulliBeta { alpha: f64, beta: f64, high: usize, low: usize },
}

impl InitialCondition {
    pub fn validate(&self, states: usize) -> Result<()> {
        match self {
            Self::Deterministic(s) => {
                if *s >= states {
                    bail!(InitialCondition, "state {s} outside 0..{states}");
                }
            }
            Self::Simplex(p) => {
                if p.len() != states {
                    bail!(InitialCondition, "vector has {} entries, expected {states}", p.len());
                }
                check_simplex(p, SIMPLEX_TOLERANCE).map_err(Error::InitialCondition)?;
            }
            Self::BernoulliBeta { alpha, beta, high, low } => {
                if !(*alpha > 0.0 && alpha.is_finite() && *beta > 0.0 && beta.is_finite()) {
                    bail!(InitialCondition, "Beta shapes must be positive, got ({alpha}, {beta})");
                }
                if *high >= states || *low >= states {
                    bail!(InitialCondition, "states ({high}, {low}) outside 0..{states}");
                }
                if high == low {
                    bail!(InitialCondition, "high and low states must differ");
                }
            }
        }
        Ok(())
    }

    /// The fixed initial vector `s₀`. Distributional conditions have none.
    pub fn vector(&self, states: usize) -> Result<Vec<f64>> {
        match self {
            Self::Deterministic(s) => {
                let mut v = vec![0.0; states];
                v[*s] = 1.0;
                Ok(v)
            }
            Self::Simplex(p) => Ok(p.clone()),
            Self::BernoulliBeta { .. } => {
                bail!(InitialCondition, "Beta-Bernoulli initial condition is distributional; sample or average it first")
            }
        }
    }

    /// Expected initial vector. For Beta-Bernoulli this puts `α/(α+β)` on the high state.
    pub fn mean_vector(&self, states: usize) -> Vec<f64> {
        match self {
            Self::BernoulliBeta { alpha, beta, high, low } => {
                let mut v = vec![0.0; states];
                let m = alpha / (alpha + beta);
                v[*high] = m;
                v[*low] = 1.0 - m;
                v
            }
            _ => self.vector(states).expect("fixed initial condition"),
        }
    }

    /// One realization of the initial vector: `[ρ₀ on high, 1 − ρ₀ on low]` with a
    /// fresh `ρ₀` for Beta-Bernoulli, the fixed vector otherwise.
    pub fn sample_vector<R: Rng + ?Sized>(&self, states: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::BernoulliBeta { alpha, beta, high, low } => {
                let rho = sample_beta(*alpha, *beta, rng);
                let mut v = vec![0.0; states];
                v[*high] = rho;
                v[*low] = 1.0 - rho;
                Ok(v)
            }
            _ => self.vector(states),
        }
    }

    pub fn is_distributional(&self) -> bool {
        matches!(self, Self::BernoulliBeta { .. })
    }
}

/// Checks entries lie in `[0, 1]` and sum to one within `tol`.
pub fn check_simplex(p: &[f64], tol: f64) -> core::result::Result<(), String> {
    for (j, &v) in p.iter().enumerate() {
        if !v.is_finite() || !(-tol..=1.0 + tol).contains(&v) {
            return Err(format!("entry {j} = {v} is outside [0, 1]"));
        }
    }
    let sum: f64 = p.iter().sum();
    if libm::fabs(sum - 1.0) > tol {
        return Err(format!("entries sum to {sum}, not 1"));
    }
    Ok(())
}

/// Draws `ρ₀ ~ Beta(alpha, beta)` as `X/(X+Y)` with `X ~ Gamma(alpha)`, `Y ~ Gamma(beta)`.
pub fn sample_beta<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let x = Gamma::new(alpha, 1.0).expect("positive shape").sample(rng);
    let y = Gamma::new(beta, 1.0).expect("positive shape").sample(rng);
    if x + y == 0.0 {
        // Both underflowed; only possible for tiny shapes.
        return if alpha >= beta { 1.0 } else { 0.0 };
    }
    x / (x + y)
}

/// Draws a starting state from an initial condition.
pub fn sample_initial_state<R: Rng + ?Sized>(ic: &InitialCondition, rng: &mut R) -> usize {
    match ic {
        InitialCondition::Deterministic(s) => *s,
        InitialCondition::Simplex(p) => sample_categorical(p, rng),
        InitialCondition::BernoulliBeta { alpha, beta, high, low } => {
            let rho = sample_beta(*alpha, *beta, rng);
            if rng.random::<f64>() < rho {
                *high
            } else {
                *low
            }
        }
    }
}

/// Samples an index with probability proportional to `weights`.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStateModel {
    states: StateSpace,
    rates: TransitionRateModel,
    initial: InitialCondition,
    up_states: Vec<usize>,
    mission_time: f64,
}

impl MultiStateModel {
    pub fn new(
        states: StateSpace,
        rates: TransitionRateModel,
        initial: InitialCondition,
        mut up_states: Vec<usize>,
        mission_time: f64,
    ) -> Result<Self> {
        if rates.states() != states.count() {
            bail!(InvalidModel, "rate model has {} states, state space has {}", rates.states(), states.count());
        }
        initial.validate(states.count())?;
        up_states.sort_unstable();
        up_states.dedup();
        if let Some(&bad) = up_states.iter().find(|&&s| !states.contains(s)) {
            bail!(InvalidModel, "up state {bad} outside 0..{}", states.count());
        }
        if !(mission_time > 0.0) || !mission_time.is_finite() {
            bail!(InvalidModel, "mission time must be positive, got {mission_time}");
        }
        Ok(Self { states, rates, initial, up_states, mission_time })
    }

    pub fn state_count(&self) -> usize {
        self.states.count()
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.states
    }

    pub fn rates(&self) -> &TransitionRateModel {
        &self.rates
    }

    pub fn initial(&self) -> &InitialCondition {
        &self.initial
    }

    pub fn up_states(&self) -> &[usize] {
        &self.up_states
    }

    pub fn mission_time(&self) -> f64 {
        self.mission_time
    }

    /// Same model with a different initial condition.
    pub fn with_initial(&self, initial: InitialCondition) -> Result<Self> {
        initial.validate(self.state_count())?;
        Ok(Self { initial, ..self.clone() })
    }

    /// `Q(t)`: evaluated rate functions off the diagonal, negated row sums on it.
    pub fn rate_matrix_at(&self, t: f64) -> Result<RateMatrix> {
        self.rates.matrix_at(t)
    }

    pub fn reliability(&self, p: &[f64]) -> f64 {
        crate::ode::reliability_from_probs(p, &self.up_states)
    }
}

/// The dual-processor computing system with coverage `c₁ = c₂ = 0.9`, `λ₀ = 0.01`, `α = 2`.
///
/// States: 0 both processors up, 1 one processor up (degraded), 2 both failed,
/// 3 failed by an uncovered fault. Up states are {0, 1}; mission time is 30.
pub fn dual_processor_model() -> MultiStateModel {
    const COVERAGE_BOTH: f64 = 0.9;
    const COVERAGE_ONE: f64 = 0.9;
    const SCALE: f64 = 0.01;
    const SHAPE: f64 = 2.0;
    let rate = |multiplier: f64| WeibullRate { multiplier, scale: SCALE, shape: SHAPE };
    // Two processors at risk in state 0, one in state 1.
    let transitions = vec![
        Transition { from: 0, to: 1, rate: rate(2.0 * COVERAGE_BOTH) },
        Transition { from: 0, to: 3, rate: rate(2.0 * (1.0 - COVERAGE_BOTH)) },
        Transition { from: 1, to: 2, rate: rate(COVERAGE_ONE) },
        Transition { from: 1, to: 3, rate: rate(1.0 - COVERAGE_ONE) },
    ];
    let labels = ["both up", "degraded", "both down", "uncovered failure"].iter().map(|s| String::from(*s)).collect();
    MultiStateModel::new(
        StateSpace::with_labels(labels).expect("4 states"),
        TransitionRateModel::new(4, transitions).expect("valid transitions"),
        InitialCondition::Deterministic(0),
        vec![0, 1],
        30.0,
    )
    .expect("valid model")
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Measurement {
    pub t: f64,
    pub value: Vec<f64>,
}

/// Inspection data: probability vectors observed at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    entries: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn new(entries: Vec<Measurement>) -> Result<Self> {
        let mut prev: Option<f64> = None;
        for (k, m) in entries.iter().enumerate() {
            if !(m.t >= 0.0) || !m.t.is_finite() {
                bail!(Measurements, "entry {k}: time {} must be finite and non-negative", m.t);
            }
            if let Some(p) = prev {
                if m.t <= p {
                    bail!(Measurements, "entry {k}: times must be strictly increasing ({} after {p})", m.t);
                }
            }
            if let Some(first) = entries.first() {
                if m.value.len() != first.value.len() {
                    bail!(Measurements, "entry {k}: vector width {} differs from {}", m.value.len(), first.value.len());
                }
            }
            check_simplex(&m.value, MEASUREMENT_TOLERANCE).map_err(|e| Error::Measurements(format!("entry {k}: {e}")))?;
            prev = Some(m.t);
        }
        Ok(Self { entries })
    }

    /// Validates the set against a model: widths, mission window, and an entry at
    /// `t = 0` agreeing with a deterministic initial condition.
    pub fn validate_for(&self, model: &MultiStateModel) -> Result<()> {
        for (k, m) in self.entries.iter().enumerate() {
            if m.value.len() != model.state_count() {
                bail!(Measurements, "entry {k}: {} values for {} states", m.value.len(), model.state_count());
            }
            if m.t > model.mission_time() {
                bail!(Measurements, "entry {k}: time {} beyond mission time {}", m.t, model.mission_time());
            }
            if m.t == 0.0 {
                if let InitialCondition::Deterministic(_) = model.initial() {
                    let s0 = model.initial().vector(model.state_count())?;
                    if s0.iter().zip(&m.value).any(|(a, b)| libm::fabs(a - b) > MEASUREMENT_TOLERANCE) {
                        bail!(Measurements, "entry at t = 0 disagrees with the initial condition");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The first `n` entries.
    pub fn prefix(&self, n: usize) -> Self {
        Self { entries: self.entries[..n.min(self.entries.len())].to_vec() }
    }
}
