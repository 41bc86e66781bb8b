//! Physics-informed GAN for reliability under uncertainty and measurement data.
//!
//! The generator `G(t, z)` maps time and Gaussian noise to a state-probability
//! vector. Its loss combines a saturating adversarial term, a squared misfit to
//! the observations, and the weighted Kolmogorov residual at collocation points.
//! The discriminator `D(t, u)` scores `(time, probability vector)` pairs. After
//! training, stochastic forward passes of `G` give means and standard deviations
//! of the state probabilities and of reliability.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Error, Result};
use crate::model::{check_simplex, Measurement, MeasurementSet, MultiStateModel, RateMatrix, MEASUREMENT_TOLERANCE};
use crate::neural::{
    backward, forward_batch, forward_tape, initialize_parameters, learning_rate_at, Activation, Adam, AdamConfig, LayerSpec, NetworkSpec,
    OutputAdjoint, ParameterSet, TrainingSchedule,
};
use crate::pinn::{collocation_grid, kolmogorov_residual};
use crate::rng::{derive_seed, stream, Stream};

/// Lower clamp on the arguments of the adversarial logarithms.
pub const LOG_CLAMP: f64 = 1e-8;

/// `ln(max(x, LOG_CLAMP))` and its derivative in `x` (zero where clamped).
pub fn clamped_ln(x: f64) -> (f64, f64) {
    if x > LOG_CLAMP {
        (libm::log(x), 1.0 / x)
    } else {
        (libm::log(LOG_CLAMP), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GanConfig {
    pub generator: NetworkSpec,
    pub discriminator: NetworkSpec,
    pub latent_dim: usize,
    pub schedule: TrainingSchedule,
    pub adam: AdamConfig,
    pub loss_weight: f64,
    pub discriminator_steps: usize,
    pub sample_count: usize,
    pub collocation_count: usize,
    pub seed: u64,
}

impl GanConfig {
    /// Generator `(1+d_z) → 4×50 tanh → states softmax`, discriminator
    /// `(1+states) → 2×50 tanh → 1 sigmoid`, `d_z = 1`, 10⁵ iterations at
    /// `1e−2·0.9^(i/1000)`, `λ = 1`, one discriminator step per generator step,
    /// 5×10³ samples, 40 collocation points.
    pub fn standard(states: usize, seed: u64) -> Self {
        let latent_dim = 1;
        Self {
            generator: NetworkSpec::mlp(1 + latent_dim, 4, 50, Activation::Tanh, LayerSpec::new(states, Activation::Softmax))
                .expect("valid layout"),
            discriminator: NetworkSpec::mlp(1 + states, 2, 50, Activation::Tanh, LayerSpec::new(1, Activation::Sigmoid))
                .expect("valid layout"),
            latent_dim,
            schedule: TrainingSchedule { initial_lr: 1e-2, decay_rate: 0.9, decay_steps: 1000, iterations: 100_000, staircase: false },
            adam: AdamConfig::default(),
            loss_weight: 1.0,
            discriminator_steps: 1,
            sample_count: 5_000,
            collocation_count: 40,
            seed,
        }
    }

    /// Same networks, trained for 2×10⁴ iterations at `1e−3·0.9^(i/1000)`: the
    /// measurement-fusion setting.
    pub fn measurement_update(states: usize, seed: u64) -> Self {
        let mut config = Self::standard(states, seed);
        config.schedule.initial_lr = 1e-3;
        config.schedule.iterations = 20_000;
        config
    }

    pub fn validate(&self, states: usize) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.schedule.validate()?;
        if self.latent_dim == 0 {
            bail!(Config, "latent dimension must be at least 1");
        }
        if self.generator.input_width != 1 + self.latent_dim {
            bail!(Config, "generator input width {} is not 1 + latent dim {}", self.generator.input_width, self.latent_dim);
        }
        if self.generator.output != LayerSpec::new(states, Activation::Softmax) {
            bail!(Config, "generator output must be a softmax over the {states} states");
        }
        if self.discriminator.input_width != 1 + states {
            bail!(Config, "discriminator input width {} is not 1 + {states} states", self.discriminator.input_width);
        }
        if self.discriminator.output != LayerSpec::new(1, Activation::Sigmoid) {
            bail!(Config, "discriminator output must be one sigmoid unit");
        }
        if self.discriminator_steps == 0 {
            bail!(Config, "discriminator steps per generator step must be at least 1");
        }
        if self.sample_count < 2 {
            bail!(Config, "need at least 2 samples for a standard deviation");
        }
        if self.collocation_count < 2 {
            bail!(Config, "need at least 2 collocation points");
        }
        if !(self.loss_weight > 0.0) || !self.loss_weight.is_finite() {
            bail!(Config, "loss weight must be positive, got {}", self.loss_weight);
        }
        Ok(())
    }
}

/// Observations the generator is fitted to.
///
/// `anchor` is the initial condition written as an observation at `t = 0`
/// (index `k = 0`); `observations` are the measurements `k = 1..N_d`. The
/// generator-side sums run over both, the discriminator's real-data sum over
/// the observations only. All sums are normalized by the generator-side count.
#[derive(Debug, Clone, PartialEq)]
pub struct GanData {
    anchor: Option<Vec<f64>>,
    observations: Vec<Measurement>,
    states: usize,
}

impl GanData {
    /// Inspection data anchored by the model's fixed initial condition.
    pub fn from_measurements(model: &MultiStateModel, measurements: &MeasurementSet) -> Result<Self> {
        measurements.validate_for(model)?;
        let anchor = model.initial().vector(model.state_count())?;
        // A measurement at t = 0 restates the anchor.
        let observations = measurements.entries().iter().filter(|m| m.t > 0.0).cloned().collect();
        Ok(Self { anchor: Some(anchor), observations, states: model.state_count() })
    }

    /// Samples of an uncertain initial vector, each an observation at `t = 0`.
    pub fn from_initial_samples(samples: Vec<Vec<f64>>) -> Result<Self> {
        let Some(states) = samples.first().map(Vec::len) else {
            bail!(Measurements, "no initial samples");
        };
        let mut observations = Vec::with_capacity(samples.len());
        for (k, value) in samples.into_iter().enumerate() {
            if value.len() != states {
                bail!(Measurements, "sample {k} has {} entries, expected {states}", value.len());
            }
            check_simplex(&value, MEASUREMENT_TOLERANCE).map_err(|e| Error::Measurements(alloc::format!("sample {k}: {e}")))?;
            observations.push(Measurement { t: 0.0, value });
        }
        Ok(Self { anchor: None, observations, states })
    }

    pub fn anchor(&self) -> Option<&[f64]> {
        self.anchor.as_deref()
    }

    pub fn observations(&self) -> &[Measurement] {
        &self.observations
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Entries the generator is evaluated at: the anchor, then the observations.
    pub fn generator_entries(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.anchor.iter().map(|a| (0.0, a.as_slice())).chain(self.observations.iter().map(|m| (m.t, m.value.as_slice())))
    }

    pub fn generator_count(&self) -> usize {
        self.observations.len() + usize::from(self.anchor.is_some())
    }
}

/// Fresh latent draws for one loss evaluation: one vector per generator-side
/// data entry and one per collocation point.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub data: Vec<f64>,
    pub collocation: Vec<f64>,
}

impl NoiseDraws {
    pub fn draw<R: Rng + ?Sized>(latent_dim: usize, data_points: usize, collocation_points: usize, rng: &mut R) -> Self {
        let mut normal = |n: usize| (0..n * latent_dim).map(|_| StandardNormal.sample(rng)).collect::<Vec<f64>>();
        let data = normal(data_points);
        let collocation = normal(collocation_points);
        Self { data, collocation }
    }
}

/// A generator network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub spec: NetworkSpec,
    pub params: ParameterSet,
    pub latent_dim: usize,
}

/// Something that maps `(t, z)` to a probability vector, for sampling statistics.
pub trait StochasticSurrogate {
    fn states(&self) -> usize;
    fn latent_dim(&self) -> usize;
    /// Outputs at time `t` for each latent vector in `noise` (`n × latent_dim`),
    /// returned as `n × states`.
    fn sample_batch(&self, t: f64, noise: &[f64]) -> Vec<f64>;
}

impl StochasticSurrogate for Generator {
    fn states(&self) -> usize {
        self.spec.output_width()
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn sample_batch(&self, t: f64, noise: &[f64]) -> Vec<f64> {
        forward_batch(&self.spec, &self.params, &stack_inputs(&[t], noise, self.latent_dim, noise.len() / self.latent_dim))
    }
}

/// Rows `(tₖ, zₖ)`; a single time is broadcast across all rows.
fn stack_inputs(times: &[f64], noise: &[f64], latent_dim: usize, rows: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(rows * (1 + latent_dim));
    for k in 0..rows {
        input.push(if times.len() == 1 { times[0] } else { times[k] });
        input.extend_from_slice(&noise[k * latent_dim..(k + 1) * latent_dim]);
    }
    input
}

/// Rows `(tₖ, uₖ)` for the discriminator.
fn pair_inputs(times: &[f64], values: &[f64], width: usize) -> Vec<f64> {
    let mut input = Vec::with_capacity(times.len() * (1 + width));
    for (k, &t) in times.iter().enumerate() {
        input.push(t);
        input.extend_from_slice(&values[k * width..(k + 1) * width]);
    }
    input
}

/// The fixed pieces of a PIGAN objective.
#[derive(Debug, Clone)]
pub struct GanProblem {
    data: GanData,
    collocation: Vec<f64>,
    generators: Vec<RateMatrix>,
    loss_weight: f64,
    data_times: Vec<f64>,
    data_values: Vec<f64>,
    real_times: Vec<f64>,
    real_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    /// `(1/K)·Σₖ ln(1 − D(tₖ, G(tₖ, zₖ)))`.
    pub adversarial: f64,
    /// `(1/K)·Σₖ ‖y(tₖ) − G(tₖ, zₖ)‖²`.
    pub data: f64,
    /// `λ·(1/N_r)·Σᵢ ‖G·Q − dG/dt‖²`.
    pub physics: f64,
    pub total: f64,
}

/// Minimal view of a network for loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Net<'a> {
    pub spec: &'a NetworkSpec,
    pub params: &'a ParameterSet,
}

impl GanProblem {
    pub fn new(model: &MultiStateModel, data: GanData, collocation: &[f64], loss_weight: f64) -> Result<Self> {
        if data.states() != model.state_count() {
            bail!(Measurements, "data has {} states, model has {}", data.states(), model.state_count());
        }
        if data.generator_count() == 0 {
            bail!(Measurements, "PIGAN needs at least one data entry (the initial condition)");
        }
        let generators = collocation.iter().map(|&t| model.rate_matrix_at(t)).collect::<Result<Vec<_>>>()?;
        let (mut data_times, mut data_values) = (Vec::new(), Vec::new());
        for (t, v) in data.generator_entries() {
            data_times.push(t);
            data_values.extend_from_slice(v);
        }
        let real_times = data.observations().iter().map(|m| m.t).collect();
        let real_values = data.observations().iter().flat_map(|m| m.value.iter().copied()).collect();
        Ok(Self { data, collocation: collocation.to_vec(), generators, loss_weight, data_times, data_values, real_times, real_values })
    }

    pub fn data(&self) -> &GanData {
        &self.data
    }

    pub fn collocation(&self) -> &[f64] {
        &self.collocation
    }

    fn normalizer(&self) -> f64 {
        1.0 / self.data.generator_count() as f64
    }

    /// Generator loss and its gradient with respect to the generator parameters.
    pub fn generator_loss_and_gradient(
        &self,
        gen: Net<'_>,
        disc: Net<'_>,
        latent_dim: usize,
        noise: &NoiseDraws,
    ) -> (GeneratorLoss, ParameterSet) {
        let width = self.data.states();
        let k_count = self.data_times.len();
        let norm = self.normalizer();
        let mut grads = ParameterSet::zeros(gen.spec);

        // Data entries: adversarial and misfit terms.
        let gen_input = stack_inputs(&self.data_times, &noise.data, latent_dim, k_count);
        let gen_tape = forward_tape(gen.spec, gen.params, &gen_input, None);
        let fake = gen_tape.output();
        let disc_input = pair_inputs(&self.data_times, fake, width);
        let disc_tape = forward_tape(disc.spec, disc.params, &disc_input, None);
        let scores = disc_tape.output();

        let mut adversarial = 0.0;
        let mut score_bar = vec![0.0; k_count];
        for (k, &d) in scores.iter().enumerate() {
            let (value, slope) = clamped_ln(1.0 - d);
            adversarial += norm * value;
            score_bar[k] = -norm * slope;
        }
        let mut scratch = vec![0.0; disc.params.len()];
        let disc_input_bar =
            backward(disc.spec, disc.params, &disc_tape, &OutputAdjoint { outputs: score_bar, time_derivatives: None }, &mut scratch);

        let mut misfit = 0.0;
        let mut fake_bar = vec![0.0; k_count * width];
        for k in 0..k_count {
            for j in 0..width {
                let d = fake[k * width + j] - self.data_values[k * width + j];
                misfit += norm * d * d;
                fake_bar[k * width + j] = 2.0 * norm * d + disc_input_bar[k * (1 + width) + 1 + j];
            }
        }
        backward(gen.spec, gen.params, &gen_tape, &OutputAdjoint { outputs: fake_bar, time_derivatives: None }, grads.as_mut_slice());

        // Collocation points: Kolmogorov residual.
        let n_r = self.collocation.len();
        let coll_input = stack_inputs(&self.collocation, &noise.collocation, latent_dim, n_r);
        let mut direction = vec![0.0; coll_input.len()];
        direction.iter_mut().step_by(1 + latent_dim).for_each(|v| *v = 1.0);
        let coll_tape = forward_tape(gen.spec, gen.params, &coll_input, Some(&direction));
        let y = coll_tape.output();
        let dy = coll_tape.output_tangent().expect("tangent requested");
        let scale = 2.0 * self.loss_weight / n_r as f64;
        let mut residual = 0.0;
        let mut g_y = vec![0.0; y.len()];
        let mut g_dy = vec![0.0; y.len()];
        for (i, q) in self.generators.iter().enumerate() {
            let row = i * width..(i + 1) * width;
            let r = kolmogorov_residual(q, &y[row.clone()], &dy[row.clone()]);
            residual += r.iter().map(|v| v * v).sum::<f64>();
            for m in 0..width {
                g_y[row.start + m] = scale * q.row(m).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
            }
            for (g, rj) in g_dy[row].iter_mut().zip(&r) {
                *g = -scale * rj;
            }
        }
        let physics = self.loss_weight * residual / n_r as f64;
        backward(gen.spec, gen.params, &coll_tape, &OutputAdjoint { outputs: g_y, time_derivatives: Some(g_dy) }, grads.as_mut_slice());

        let total = adversarial + misfit + physics;
        (GeneratorLoss { adversarial, data: misfit, physics, total }, grads)
    }

    /// Discriminator objective `L_D` (to be maximized) and the gradient of `−L_D`
    /// with respect to the discriminator parameters.
    pub fn discriminator_loss_and_gradient(
        &self,
        gen: Net<'_>,
        disc: Net<'_>,
        latent_dim: usize,
        noise: &NoiseDraws,
    ) -> (f64, ParameterSet) {
        let width = self.data.states();
        let norm = self.normalizer();
        let mut grads = ParameterSet::zeros(disc.spec);
        let mut objective = 0.0;

        if !self.real_times.is_empty() {
            let real_tape = forward_tape(disc.spec, disc.params, &pair_inputs(&self.real_times, &self.real_values, width), None);
            let mut seed = vec![0.0; self.real_times.len()];
            for (k, &d) in real_tape.output().iter().enumerate() {
                let (value, slope) = clamped_ln(d);
                objective += norm * value;
                seed[k] = -norm * slope;
            }
            backward(disc.spec, disc.params, &real_tape, &OutputAdjoint { outputs: seed, time_derivatives: None }, grads.as_mut_slice());
        }

        let k_count = self.data_times.len();
        let fake = forward_batch(gen.spec, gen.params, &stack_inputs(&self.data_times, &noise.data, latent_dim, k_count));
        let fake_tape = forward_tape(disc.spec, disc.params, &pair_inputs(&self.data_times, &fake, width), None);
        let mut seed = vec![0.0; k_count];
        for (k, &d) in fake_tape.output().iter().enumerate() {
            let (value, slope) = clamped_ln(1.0 - d);
            objective += norm * value;
            // −∂/∂D ln(1 − D) = +1/(1 − D)
            seed[k] = norm * slope;
        }
        backward(disc.spec, disc.params, &fake_tape, &OutputAdjoint { outputs: seed, time_derivatives: None }, grads.as_mut_slice());
        (objective, grads)
    }
}

/// Generator loss value: adversarial, misfit and weighted residual terms.
pub fn generator_loss(problem: &GanProblem, gen: Net<'_>, disc: Net<'_>, latent_dim: usize, noise: &NoiseDraws) -> GeneratorLoss {
    problem.generator_loss_and_gradient(gen, disc, latent_dim, noise).0
}

/// Discriminator objective value (the quantity the discriminator maximizes).
pub fn discriminator_loss(problem: &GanProblem, gen: Net<'_>, disc: Net<'_>, latent_dim: usize, noise: &NoiseDraws) -> f64 {
    problem.discriminator_loss_and_gradient(gen, disc, latent_dim, noise).0
}

/// Discriminator objective from precomputed scores, normalized by `1/count`.
pub fn discriminator_objective(real_scores: &[f64], fake_scores: &[f64], count: usize) -> f64 {
    let norm = 1.0 / count as f64;
    real_scores.iter().map(|&d| norm * clamped_ln(d).0).sum::<f64>()
        + fake_scores.iter().map(|&d| norm * clamped_ln(1.0 - d).0).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct TrainedGan {
    pub generator: Generator,
    pub discriminator: ParameterSet,
    pub config: GanConfig,
    pub generator_history: Vec<GeneratorLoss>,
    /// Discriminator objective after each discriminator step.
    pub discriminator_history: Vec<f64>,
}

/// Alternating adversarial training: per iteration, the configured number of
/// discriminator ascent steps, then one generator descent step, all with Adam
/// under the shared learning-rate schedule and fresh noise each step.
pub fn train_pigan(model: &MultiStateModel, data: GanData, config: &GanConfig) -> Result<TrainedGan> {
    config.validate(model.state_count())?;
    let collocation = collocation_grid(config.collocation_count, model.mission_time())?;
    let problem = GanProblem::new(model, data, &collocation, config.loss_weight)?;
    let gen_spec = &config.generator;
    let disc_spec = &config.discriminator;
    let mut gen_params = initialize_parameters(gen_spec, derive_seed(config.seed, 0));
    let mut disc_params = initialize_parameters(disc_spec, derive_seed(config.seed, 1));
    let mut gen_adam = Adam::new(gen_params.len(), config.adam);
    let mut disc_adam = Adam::new(disc_params.len(), config.adam);
    let mut rng = stream(derive_seed(config.seed, 2));

    let iterations = config.schedule.iterations as usize;
    let k_count = problem.data().generator_count();
    let n_r = collocation.len();
    let mut generator_history = Vec::with_capacity(iterations);
    let mut discriminator_history = Vec::with_capacity(iterations * config.discriminator_steps);
    for iteration in 0..iterations {
        let lr = learning_rate_at(&config.schedule, iteration as u64);
        for _ in 0..config.discriminator_steps {
            let noise = NoiseDraws::draw(config.latent_dim, k_count, 0, &mut rng);
            let (objective, grads) = problem.discriminator_loss_and_gradient(
                Net { spec: gen_spec, params: &gen_params },
                Net { spec: disc_spec, params: &disc_params },
                config.latent_dim,
                &noise,
            );
            if !objective.is_finite() || grads.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { what: "discriminator loss", iteration });
            }
            discriminator_history.push(objective);
            disc_adam.update(disc_params.as_mut_slice(), grads.as_slice(), lr);
        }
        let noise = NoiseDraws::draw(config.latent_dim, k_count, n_r, &mut rng);
        let (loss, grads) = problem.generator_loss_and_gradient(
            Net { spec: gen_spec, params: &gen_params },
            Net { spec: disc_spec, params: &disc_params },
            config.latent_dim,
            &noise,
        );
        if !loss.total.is_finite() || grads.as_slice().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { what: "generator loss", iteration });
        }
        generator_history.push(loss);
        gen_adam.update(gen_params.as_mut_slice(), grads.as_slice(), lr);
    }
    Ok(TrainedGan {
        generator: Generator { spec: gen_spec.clone(), params: gen_params, latent_dim: config.latent_dim },
        discriminator: disc_params,
        config: config.clone(),
        generator_history,
        discriminator_history,
    })
}

/// Per-state sample mean and standard deviation (divisor `N_s − 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateStatistics {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn draw_noise(latent_dim: usize, count: usize, rng: &mut Stream) -> Vec<f64> {
    (0..count * latent_dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}

fn state_stats_of(samples: &[f64], width: usize, n: usize) -> StateStatistics {
    let (mean, std) = (0..width).map(|j| mean_std(samples.iter().skip(j).step_by(width).copied(), n)).unzip();
    StateStatistics { mean, std }
}

fn reliability_stats_of(samples: &[f64], width: usize, n: usize, up_states: &[usize]) -> (f64, f64) {
    mean_std(samples.chunks(width).map(|p| up_states.iter().map(|&j| p[j]).sum::<f64>()), n)
}

/// Mean and standard deviation of each state probability over `count` noise draws at `t`.
pub fn sample_state_statistics<S: StochasticSurrogate + ?Sized>(
    surrogate: &S,
    t: f64,
    count: usize,
    rng: &mut Stream,
) -> Result<StateStatistics> {
    if count < 2 {
        bail!(Config, "need at least 2 samples, got {count}");
    }
    let noise = draw_noise(surrogate.latent_dim(), count, rng);
    Ok(state_stats_of(&surrogate.sample_batch(t, &noise), surrogate.states(), count))
}

/// Mean and standard deviation of the per-sample reliability (sum over up states).
pub fn sample_reliability_statistics<S: StochasticSurrogate + ?Sized>(
    surrogate: &S,
    t: f64,
    count: usize,
    up_states: &[usize],
    rng: &mut Stream,
) -> Result<(f64, f64)> {
    if count < 2 {
        bail!(Config, "need at least 2 samples, got {count}");
    }
    let noise = draw_noise(surrogate.latent_dim(), count, rng);
    Ok(reliability_stats_of(&surrogate.sample_batch(t, &noise), surrogate.states(), count, up_states))
}

/// Per-time statistics of state probabilities and reliability.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStats {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub reliability_mean: Vec<f64>,
    pub reliability_std: Vec<f64>,
}

impl PredictionStats {
    pub fn state_count(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    /// `(mean − 2σ, mean + 2σ)` for reliability at each time.
    pub fn reliability_band(&self) -> Vec<(f64, f64)> {
        self.reliability_mean.iter().zip(&self.reliability_std).map(|(m, s)| (m - 2.0 * s, m + 2.0 * s)).collect()
    }
}

/// State and reliability statistics at each time, from one sample set per time.
/// Time `k` uses noise substream `k` of `seed`.
pub fn prediction_stats<S: StochasticSurrogate + ?Sized>(
    surrogate: &S,
    times: &[f64],
    count: usize,
    up_states: &[usize],
    seed: u64,
) -> Result<PredictionStats> {
    if count < 2 {
        bail!(Config, "need at least 2 samples, got {count}");
    }
    let width = surrogate.states();
    let mut stats = PredictionStats {
        times: times.to_vec(),
        mean: Vec::with_capacity(times.len()),
        std: Vec::with_capacity(times.len()),
        reliability_mean: Vec::with_capacity(times.len()),
        reliability_std: Vec::with_capacity(times.len()),
    };
    for (k, &t) in times.iter().enumerate() {
        let mut rng = crate::rng::substream(seed, k as u64);
        let noise = draw_noise(surrogate.latent_dim(), count, &mut rng);
        let samples = surrogate.sample_batch(t, &noise);
        let s = state_stats_of(&samples, width, count);
        let (rm, rs) = reliability_stats_of(&samples, width, count, up_states);
        stats.mean.push(s.mean);
        stats.std.push(s.std);
        stats.reliability_mean.push(rm);
        stats.reliability_std.push(rs);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ShiftDirection {
    /// The system ages more slowly: at inspection `t` it looks like the baseline at `t − Δt`.
    Better,
    /// The system ages faster: at inspection `t` it looks like the baseline at `t + Δt`.
    Worse,
}

/// Synthetic inspections `(t, p*(t ∓ Δt))` from a baseline solution `p*`.
pub fn synthesize_shifted_measurements<F>(
    mut baseline: F,
    inspections: &[f64],
    shifts: &[f64],
    direction: ShiftDirection,
) -> Result<MeasurementSet>
where
    F: FnMut(f64) -> Vec<f64>,
{
    if inspections.len() != shifts.len() {
        bail!(Measurements, "{} inspections but {} shifts", inspections.len(), shifts.len());
    }
    let mut entries = Vec::with_capacity(inspections.len());
    for (&t, &dt) in inspections.iter().zip(shifts) {
        let shifted = match direction {
            ShiftDirection::Better => t - dt,
            ShiftDirection::Worse => t + dt,
        };
        if !(shifted >= 0.0) || !shifted.is_finite() {
            bail!(Measurements, "shifted time {shifted} for inspection {t} is negative");
        }
        entries.push(Measurement { t, value: baseline(shifted) });
    }
    MeasurementSet::new(entries)
}
