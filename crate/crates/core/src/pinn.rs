//! Physics-informed neural surrogate for the state probabilities.
//!
//! A network `N_θ(t)` with a softmax output stands in for `p(t)`. Training
//! minimizes
//!
//! ```text
//! L(θ) = ‖N_θ(0) − s₀‖² + λ·(1/N_r)·Σᵢ ‖N_θ(tᵢ)·Q(tᵢ) − dN_θ/dt(tᵢ)‖²
//! ```
//!
//! over linearly spaced collocation points `tᵢ`. Both norms sum squares over states.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::model::{MultiStateModel, RateMatrix};
use crate::neural::{
    forward_batch, initialize_parameters, learning_rate_at, parameter_gradients, Activation, Adam, AdamConfig, LayerSpec, NetworkSpec,
    OutputAdjoint, ParameterSet, TrainingSchedule,
};
use crate::trajectory::ProbabilityTrajectory;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PinnConfig {
    pub network: NetworkSpec,
    pub collocation_count: usize,
    pub loss_weight: f64,
    pub schedule: TrainingSchedule,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl PinnConfig {
    /// Two tanh layers of 50, softmax output, 40 collocation points, `λ = 1`,
    /// 2×10⁴ Adam iterations at `1e−3·0.9^(i/1000)`.
    pub fn standard(states: usize, seed: u64) -> Self {
        Self {
            network: NetworkSpec::mlp(1, 2, 50, Activation::Tanh, LayerSpec::new(states, Activation::Softmax)).expect("valid layout"),
            collocation_count: 40,
            loss_weight: 1.0,
            schedule: TrainingSchedule { initial_lr: 1e-3, decay_rate: 0.9, decay_steps: 1000, iterations: 20_000, staircase: false },
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn validate(&self, model: &MultiStateModel) -> Result<()> {
        self.network.validate()?;
        self.schedule.validate()?;
        if self.network.input_width != 1 {
            bail!(Config, "PINN network takes time alone; input width is {}", self.network.input_width);
        }
        if self.network.output.width != model.state_count() {
            bail!(Config, "output width {} differs from the model's {} states", self.network.output.width, model.state_count());
        }
        if self.network.output.activation != Activation::Softmax {
            bail!(Config, "PINN output layer must be softmax");
        }
        if self.collocation_count < 2 {
            bail!(Config, "need at least 2 collocation points, got {}", self.collocation_count);
        }
        if !(self.loss_weight > 0.0) || !self.loss_weight.is_finite() {
            bail!(Config, "loss weight must be positive, got {}", self.loss_weight);
        }
        Ok(())
    }
}

/// `count` points from 0 to `t_max` inclusive with uniform spacing.
pub fn collocation_grid(count: usize, t_max: f64) -> Result<Vec<f64>> {
    if count < 2 {
        bail!(Config, "need at least 2 collocation points, got {count}");
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        bail!(Config, "collocation range end must be positive, got {t_max}");
    }
    let h = t_max / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
    grid[count - 1] = t_max;
    Ok(grid)
}

/// `p·Q − dp/dt`, the forward-equation residual at one point.
pub fn kolmogorov_residual(q: &RateMatrix, p: &[f64], dp: &[f64]) -> Vec<f64> {
    let mut r = q.left_mul(p);
    r.iter_mut().zip(dp).for_each(|(ri, d)| *ri -= d);
    r
}

/// Mean squared residual norm over collocation points: `(1/N_r)·Σᵢ ‖p(tᵢ)Q(tᵢ) − p'(tᵢ)‖²`.
pub fn mean_residual<F>(model: &MultiStateModel, collocation: &[f64], mut solution: F) -> Result<f64>
where
    F: FnMut(f64) -> (Vec<f64>, Vec<f64>),
{
    let mut total = 0.0;
    for &t in collocation {
        let (p, dp) = solution(t);
        let r = kolmogorov_residual(&model.rate_matrix_at(t)?, &p, &dp);
        total += r.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total / collocation.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinnLoss {
    /// `‖N(0) − s₀‖²`.
    pub initial: f64,
    /// `(1/N_r)·Σ‖residual‖²`, before weighting.
    pub residual: f64,
    /// `initial + λ·residual`.
    pub total: f64,
}

/// Fixed inputs of the PINN objective: `s₀`, the collocation times and their
/// generators, and the residual weight.
#[derive(Debug, Clone)]
pub struct PinnProblem {
    initial: Vec<f64>,
    collocation: Vec<f64>,
    generators: Vec<RateMatrix>,
    loss_weight: f64,
    inputs: Vec<f64>,
}

impl PinnProblem {
    pub fn new(model: &MultiStateModel, collocation: &[f64], loss_weight: f64) -> Result<Self> {
        let initial = model.initial().vector(model.state_count())?;
        if collocation.is_empty() {
            bail!(Config, "no collocation points");
        }
        let generators = collocation.iter().map(|&t| model.rate_matrix_at(t)).collect::<Result<Vec<_>>>()?;
        // Row 0 is the initial-condition point; the rest are collocation points.
        let mut inputs = vec![0.0];
        inputs.extend_from_slice(collocation);
        Ok(Self { initial, collocation: collocation.to_vec(), generators, loss_weight, inputs })
    }

    pub fn collocation(&self) -> &[f64] {
        &self.collocation
    }

    /// Loss value and its gradient with respect to every network parameter.
    pub fn loss_and_gradient(&self, spec: &NetworkSpec, params: &ParameterSet) -> Result<(PinnLoss, ParameterSet)> {
        let mut terms = PinnLoss { initial: 0.0, residual: 0.0, total: 0.0 };
        let (_, grads) = parameter_gradients(spec, params, &self.inputs, true, |e| {
            let width = e.width;
            let dy = e.time_derivatives.expect("time derivatives requested");
            let mut g_y = vec![0.0; e.outputs.len()];
            let mut g_dy = vec![0.0; e.outputs.len()];

            for ((g, y), y0) in g_y.iter_mut().zip(&e.outputs[..width]).zip(&self.initial) {
                let d = y - y0;
                terms.initial += d * d;
                *g = 2.0 * d;
            }
            let n_r = self.collocation.len() as f64;
            let scale = 2.0 * self.loss_weight / n_r;
            for (i, q) in self.generators.iter().enumerate() {
                let row = (i + 1) * width..(i + 2) * width;
                let r = kolmogorov_residual(q, &e.outputs[row.clone()], &dy[row.clone()]);
                terms.residual += r.iter().map(|v| v * v).sum::<f64>();
                // ∂/∂y_m Σ_j r_j² = 2 Σ_j r_j Q_mj; ∂/∂ẏ_j = −2 r_j.
                for m in 0..width {
                    g_y[row.start + m] = scale * q.row(m).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
                }
                for (g, rj) in g_dy[row].iter_mut().zip(&r) {
                    *g = -scale * rj;
                }
            }
            terms.residual /= n_r;
            terms.total = terms.initial + self.loss_weight * terms.residual;
            (terms.total, OutputAdjoint { outputs: g_y, time_derivatives: Some(g_dy) })
        })?;
        Ok((terms, grads))
    }

    pub fn loss(&self, spec: &NetworkSpec, params: &ParameterSet) -> Result<PinnLoss> {
        Ok(self.loss_and_gradient(spec, params)?.0)
    }
}

/// Composite initial-condition plus weighted residual loss.
pub fn pinn_loss(spec: &NetworkSpec, params: &ParameterSet, model: &MultiStateModel, collocation: &[f64], loss_weight: f64) -> Result<f64> {
    Ok(PinnProblem::new(model, collocation, loss_weight)?.loss(spec, params)?.total)
}

/// A trained PINN, frozen.
#[derive(Debug, Clone)]
pub struct TrainedSurrogate {
    pub spec: NetworkSpec,
    pub params: ParameterSet,
    pub model: MultiStateModel,
    pub config: PinnConfig,
    pub final_loss: f64,
    /// Loss before each parameter update.
    pub loss_history: Vec<f64>,
}

/// Full-batch Adam on the PINN loss with the configured decaying learning rate.
pub fn train_pinn(model: &MultiStateModel, config: &PinnConfig) -> Result<TrainedSurrogate> {
    config.validate(model)?;
    let collocation = collocation_grid(config.collocation_count, model.mission_time())?;
    let problem = PinnProblem::new(model, &collocation, config.loss_weight)?;
    let spec = &config.network;
    let mut params = initialize_parameters(spec, config.seed);
    let mut adam = Adam::new(params.len(), config.adam);
    let iterations = config.schedule.iterations as usize;
    let mut history = Vec::with_capacity(iterations);
    for iteration in 0..iterations {
        let (loss, grads) = problem.loss_and_gradient(spec, &params).map_err(|_| Error::NonFinite { what: "PINN loss", iteration })?;
        if grads.as_slice().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { what: "PINN gradient", iteration });
        }
        history.push(loss.total);
        let lr = learning_rate_at(&config.schedule, iteration as u64);
        adam.update(params.as_mut_slice(), grads.as_slice(), lr);
    }
    let final_loss = problem.loss(spec, &params).map_err(|_| Error::NonFinite { what: "PINN loss", iteration: iterations })?.total;
    Ok(TrainedSurrogate { spec: spec.clone(), params, model: model.clone(), config: config.clone(), final_loss, loss_history: history })
}

/// Surrogate predictions, with the points outside `[0, mission time]` marked.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePrediction {
    pub trajectory: ProbabilityTrajectory,
    pub extrapolated: Vec<bool>,
}

impl SurrogatePrediction {
    pub fn any_extrapolated(&self) -> bool {
        self.extrapolated.iter().any(|&e| e)
    }
}

impl TrainedSurrogate {
    pub fn predict_state_probabilities(&self, times: &[f64]) -> Result<SurrogatePrediction> {
        if times.iter().any(|t| !t.is_finite()) {
            bail!(Domain, "prediction times must be finite");
        }
        let width = self.spec.output_width();
        let out = forward_batch(&self.spec, &self.params, times);
        let rows = out.chunks(width).map(<[f64]>::to_vec).collect();
        let horizon = self.model.mission_time();
        Ok(SurrogatePrediction {
            trajectory: ProbabilityTrajectory::new(times.to_vec(), rows)?,
            extrapolated: times.iter().map(|&t| !(0.0..=horizon).contains(&t)).collect(),
        })
    }

    pub fn predict_reliability(&self, times: &[f64], up_states: &[usize]) -> Result<Vec<f64>> {
        Ok(self.predict_state_probabilities(times)?.trajectory.reliability(up_states))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dual_processor_model, InitialCondition, StateSpace, TransitionRateModel};
    use crate::ode::analytic_dual_processor;

    /// Time derivative of the closed-form dual-processor solution.
    fn analytic_derivative(t: f64) -> Vec<f64> {
        let e1 = libm::exp(-0.01 * t * t);
        let e2 = libm::exp(-0.02 * t * t);
        let d0 = -0.04 * t * e2;
        let d1 = 1.8 * (-0.02 * t * e1 + 0.04 * t * e2);
        let d2 = 0.81 * 2.0 * (1.0 - e1) * 0.02 * t * e1;
        vec![d0, d1, d2, -(d0 + d1 + d2)]
    }

    fn small_config(seed: u64, iterations: u64) -> PinnConfig {
        let mut config = PinnConfig::standard(4, seed);
        config.network = NetworkSpec::mlp(1, 1, 5, Activation::Tanh, LayerSpec::new(4, Activation::Softmax)).unwrap();
        config.schedule.iterations = iterations;
        config
    }

    #[test]
    fn collocation_examples() {
        let g = collocation_grid(40, 30.0).unwrap();
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[39], 30.0);
        assert!(libm::fabs(g[1] - 30.0 / 39.0) < 1e-15);
        assert!(libm::fabs(g[1] - 0.76923) < 1e-5);
        assert_eq!(collocation_grid(2, 10.0).unwrap(), vec![0.0, 10.0]);
        assert!(collocation_grid(1, 10.0).is_err());
    }

    #[test]
    fn analytic_solution_has_no_residual() {
        let model = dual_processor_model();
        let grid = collocation_grid(40, 30.0).unwrap();
        let r = mean_residual(&model, &grid, |t| (analytic_dual_processor(t).to_vec(), analytic_derivative(t))).unwrap();
        assert!(r < 1e-20, "residual {r}");
    }

    #[test]
    fn constant_network_on_frozen_model_has_zero_loss() {
        let s0 = vec![0.7, 0.3];
        let model = MultiStateModel::new(
            StateSpace::new(2).unwrap(),
            TransitionRateModel::new(2, vec![]).unwrap(),
            InitialCondition::Simplex(s0.clone()),
            vec![0],
            10.0,
        )
        .unwrap();
        let spec = NetworkSpec::new(1, vec![], LayerSpec::new(2, Activation::Softmax)).unwrap();
        // Zero weights, biases ln(s₀): softmax returns s₀ at every t.
        let params = ParameterSet::from_values(&spec, vec![0.0, 0.0, libm::log(0.7), libm::log(0.3)]).unwrap();
        let loss = pinn_loss(&spec, &params, &model, &collocation_grid(5, 10.0).unwrap(), 1.0).unwrap();
        assert!(loss < 1e-30, "loss {loss}");
    }

    #[test]
    fn loss_is_linear_in_weight() {
        let model = dual_processor_model();
        let config = PinnConfig::standard(4, 3);
        let params = initialize_parameters(&config.network, 3);
        let grid = collocation_grid(40, 30.0).unwrap();
        let one = PinnProblem::new(&model, &grid, 1.0).unwrap().loss(&config.network, &params).unwrap();
        let two = pinn_loss(&config.network, &params, &model, &grid, 2.0).unwrap();
        assert!(libm::fabs((two - one.total) - one.residual) <= 1e-15 * two);
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let model = dual_processor_model();
        let config = small_config(5, 1);
        let mut params = initialize_parameters(&config.network, 5);
        for (k, v) in params.as_mut_slice().iter_mut().enumerate() {
            *v += 0.05 * libm::sin(k as f64);
        }
        let problem = PinnProblem::new(&model, &collocation_grid(40, 30.0).unwrap(), 1.0).unwrap();
        let (_, grads) = problem.loss_and_gradient(&config.network, &params).unwrap();
        let h = 1e-6;
        for k in 0..params.len() {
            let mut up = params.clone();
            up.as_mut_slice()[k] += h;
            let mut down = params.clone();
            down.as_mut_slice()[k] -= h;
            let fd = (problem.loss(&config.network, &up).unwrap().total - problem.loss(&config.network, &down).unwrap().total) / (2.0 * h);
            let g = grads.as_slice()[k];
            let err = libm::fabs(g - fd);
            assert!(err <= 1e-10 || err <= 1e-5 * libm::fabs(fd), "param {k}: {g} vs {fd}");
        }
    }

    #[test]
    fn short_training_reduces_loss_and_is_deterministic() {
        let model = dual_processor_model();
        let config = small_config(7, 300);
        let a = train_pinn(&model, &config).unwrap();
        let b = train_pinn(&model, &config).unwrap();
        assert_eq!(a.loss_history.len(), 300);
        assert!(a.final_loss < a.loss_history[0]);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn predictions_are_simplex_and_flag_extrapolation() {
        let model = dual_processor_model();
        let s = train_pinn(&model, &small_config(8, 20)).unwrap();
        let pred = s.predict_state_probabilities(&[0.0, 2.5, 30.0, 45.0]).unwrap();
        for p in pred.trajectory.probs() {
            assert!(libm::fabs(p.iter().sum::<f64>() - 1.0) <= 1e-15);
        }
        assert_eq!(pred.extrapolated, vec![false, false, false, true]);
        let r = s.predict_reliability(&[0.0, 2.5, 30.0, 45.0], &[0, 1]).unwrap();
        for (ri, p) in r.iter().zip(pred.trajectory.probs()) {
            assert_eq!(*ri, p[0] + p[1]);
        }
    }

    #[test]
    fn config_checks() {
        let model = dual_processor_model();
        let mut c = PinnConfig::standard(4, 0);
        assert!(c.validate(&model).is_ok());
        c.collocation_count = 1;
        assert!(c.validate(&model).is_err());
        let c = PinnConfig::standard(3, 0);
        assert!(c.validate(&model).is_err());
        let distributional = model.with_initial(InitialCondition::BernoulliBeta { alpha: 5.0, beta: 1.5, high: 0, low: 1 }).unwrap();
        assert!(train_pinn(&distributional, &small_config(0, 1)).is_err());
    }
}
