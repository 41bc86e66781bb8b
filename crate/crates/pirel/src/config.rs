//! Run configuration documents (JSON) and model definition files.
//!
//! ```json
//! {
//!   "model": "dual_processor",
//!   "method": { "kind": "pinn", "iterations": 5000 },
//!   "output_dir": "runs/pinn",
//!   "seed": 7,
//!   "grid": { "start": 0, "end": 30, "step": 1 },
//!   "replications": 1
//! }
//! ```
//!
//! `model` is the built-in name, an inline model object, or `{"path": "model.json"}`.
//! `method` is a bare kind (`"ode"`, `"mc"`, `"pinn"`, `"pigan"`) or an object
//! with `kind` plus overrides. Omitted fields take the published defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use pirel_core::model::{InitialCondition, StateSpace, Transition, TransitionRateModel, WeibullRate};
use pirel_core::neural::{Activation, AdamConfig, LayerSpec, NetworkSpec, TrainingSchedule};
use pirel_core::pigan::GanConfig;
use pirel_core::pinn::PinnConfig;
use pirel_core::{dual_processor_model, MultiStateModel};
use serde::{Deserialize, Serialize};

/// Name of the built-in model.
pub const BUILTIN_MODEL: &str = "dual_processor";

/// Upper bound on any iteration or path count accepted from a config.
const MAX_COUNT: u64 = 1_000_000_000;

/// Rewrites serde's "unknown field" wording to name the offending key.
fn config_error(e: serde_json::Error) -> anyhow::Error {
    let msg = e.to_string();
    match msg.strip_prefix("unknown field ") {
        Some(rest) => anyhow!("unknown key {rest}"),
        None => anyhow!(msg),
    }
}

fn from_value<T: for<'de> Deserialize<'de>>(value: serde_json::Value, section: &str) -> Result<T> {
    serde_json::from_value(value).map_err(config_error).with_context(|| format!("in `{section}`"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub from: usize,
    pub to: usize,
    /// Multiplier `c`.
    pub c: f64,
    pub lambda0: f64,
    pub alpha: f64,
}

/// On-disk model definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub transitions: Vec<TransitionRecord>,
    pub up_states: Vec<usize>,
    pub initial: InitialCondition,
    pub mission_time: f64,
}

impl ModelFile {
    pub fn from_model(model: &MultiStateModel) -> Self {
        Self {
            states: model.state_count(),
            labels: model.state_space().labels().map(<[String]>::to_vec),
            transitions: model
                .rates()
                .transitions()
                .iter()
                .map(|t| TransitionRecord { from: t.from, to: t.to, c: t.rate.multiplier, lambda0: t.rate.scale, alpha: t.rate.shape })
                .collect(),
            up_states: model.up_states().to_vec(),
            initial: model.initial().clone(),
            mission_time: model.mission_time(),
        }
    }

    pub fn build(&self) -> Result<MultiStateModel> {
        let space = match &self.labels {
            Some(labels) => {
                ensure!(labels.len() == self.states, "{} labels for {} states", labels.len(), self.states);
                StateSpace::with_labels(labels.clone())?
            }
            None => StateSpace::new(self.states)?,
        };
        let transitions = self
            .transitions
            .iter()
            .map(|t| Ok(Transition { from: t.from, to: t.to, rate: WeibullRate::new(t.c, t.lambda0, t.alpha)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiStateModel::new(
            space,
            TransitionRateModel::new(self.states, transitions)?,
            self.initial.clone(),
            self.up_states.clone(),
            self.mission_time,
        )?)
    }
}

pub fn parse_model(text: &str) -> Result<MultiStateModel> {
    let value: serde_json::Value = serde_json::from_str(text).context("model file is not valid JSON")?;
    from_value::<ModelFile>(value, "model")?.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { start: 0.0, end: 30.0, step: 1.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.step > 0.0 && self.step.is_finite(), "grid step must be positive, got {}", self.step);
        ensure!(self.start.is_finite() && self.end.is_finite(), "grid bounds must be finite");
        ensure!(self.start >= 0.0, "grid start must be ≥ 0, got {}", self.start);
        ensure!(self.end >= self.start, "grid end {} is before start {}", self.end, self.start);
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(pirel_core::trajectory::uniform_grid(self.start, self.end, self.step)?)
    }

    /// Parses `start:end:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        ensure!(parts.len() == 3, "grid must be start:end:step, got {text:?}");
        let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("grid value {s:?}"));
        let grid = Self { start: num(parts[0])?, end: num(parts[1])?, step: num(parts[2])? };
        grid.validate()?;
        Ok(grid)
    }
}

fn default_step() -> f64 {
    pirel_core::ode::DEFAULT_STEP
}
fn default_paths() -> u64 {
    100_000
}
const fn default_pinn_layers() -> usize {
    2
}
const fn default_gan_layers() -> usize {
    4
}
const fn default_disc_layers() -> usize {
    2
}
const fn default_width() -> usize {
    50
}
fn default_activation() -> Activation {
    Activation::Tanh
}
const fn default_collocation() -> usize {
    40
}
const fn default_weight() -> f64 {
    1.0
}
const fn default_decay_rate() -> f64 {
    0.9
}
const fn default_decay_steps() -> u64 {
    1000
}
const fn default_pinn_lr() -> f64 {
    1e-3
}
const fn default_pinn_iterations() -> u64 {
    20_000
}
const fn default_gan_lr() -> f64 {
    1e-2
}
const fn default_gan_iterations() -> u64 {
    100_000
}
const fn default_one() -> usize {
    1
}
const fn default_samples() -> usize {
    5_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSection {
    Ode {
        #[serde(default = "default_step")]
        step: f64,
    },
    Mc {
        #[serde(default = "default_paths")]
        paths: u64,
    },
    Pinn {
        #[serde(default = "default_pinn_layers")]
        hidden_layers: usize,
        #[serde(default = "default_width")]
        width: usize,
        #[serde(default = "default_activation")]
        activation: Activation,
        #[serde(default = "default_collocation")]
        collocation_count: usize,
        #[serde(default = "default_weight")]
        loss_weight: f64,
        #[serde(default = "default_pinn_lr")]
        initial_lr: f64,
        #[serde(default = "default_decay_rate")]
        decay_rate: f64,
        #[serde(default = "default_decay_steps")]
        decay_steps: u64,
        #[serde(default = "default_pinn_iterations")]
        iterations: u64,
        #[serde(default)]
        staircase: bool,
    },
    Pigan {
        #[serde(default = "default_gan_layers")]
        generator_layers: usize,
        #[serde(default = "default_width")]
        generator_width: usize,
        #[serde(default = "default_disc_layers")]
        discriminator_layers: usize,
        #[serde(default = "default_width")]
        discriminator_width: usize,
        #[serde(default = "default_one")]
        latent_dim: usize,
        #[serde(default = "default_collocation")]
        collocation_count: usize,
        #[serde(default = "default_weight")]
        loss_weight: f64,
        #[serde(default = "default_gan_lr")]
        initial_lr: f64,
        #[serde(default = "default_decay_rate")]
        decay_rate: f64,
        #[serde(default = "default_decay_steps")]
        decay_steps: u64,
        #[serde(default = "default_gan_iterations")]
        iterations: u64,
        #[serde(default)]
        staircase: bool,
        #[serde(default = "default_one")]
        discriminator_steps: usize,
        #[serde(default = "default_samples")]
        sample_count: usize,
        /// Measurement CSV (`t,y0,...`); resolved to an absolute path.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        measurements: Option<PathBuf>,
        /// Draws of a distributional initial condition used as `t = 0` data.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_samples: Option<usize>,
    },
}

impl MethodSection {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Ode { .. } => "ode",
            Self::Mc { .. } => "mc",
            Self::Pinn { .. } => "pinn",
            Self::Pigan { .. } => "pigan",
        }
    }
}

fn in_range<T: PartialOrd + std::fmt::Display>(name: &str, value: T, lo: T, hi: T) -> Result<()> {
    ensure!(value >= lo && value <= hi, "{name} must be in [{lo}, {hi}], got {value}");
    Ok(())
}

fn check_schedule(initial_lr: f64, decay_rate: f64, decay_steps: u64, iterations: u64) -> Result<()> {
    ensure!(initial_lr > 0.0 && initial_lr.is_finite(), "initial_lr must be in (0, ∞), got {initial_lr}");
    ensure!(decay_rate > 0.0 && decay_rate <= 1.0, "decay_rate must be in (0, 1], got {decay_rate}");
    in_range("decay_steps", decay_steps, 1, MAX_COUNT)?;
    in_range("iterations", iterations, 1, MAX_COUNT)
}

/// The resolved solver selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Ode { step: f64 },
    Mc { paths: u64 },
    Pinn(PinnConfig),
    Pigan { config: GanConfig, measurements: Option<PathBuf>, initial_samples: Option<usize> },
}

/// Number of initial-condition draws used when a distributional condition has no explicit count.
pub const DEFAULT_INITIAL_SAMPLES: usize = 50;

impl MethodSection {
    fn resolve(&self, model: &MultiStateModel, seed: u64) -> Result<Method> {
        let states = model.state_count();
        Ok(match *self {
            Self::Ode { step } => {
                ensure!(step > 0.0 && step.is_finite(), "step must be positive, got {step}");
                Method::Ode { step }
            }
            Self::Mc { paths } => {
                in_range("paths", paths, 1, MAX_COUNT)?;
                Method::Mc { paths }
            }
            Self::Pinn {
                hidden_layers,
                width,
                activation,
                collocation_count,
                loss_weight,
                initial_lr,
                decay_rate,
                decay_steps,
                iterations,
                staircase,
            } => {
                in_range("hidden_layers", hidden_layers, 0, 64)?;
                in_range("width", width, 1, 4096)?;
                in_range("collocation_count", collocation_count, 2, 1_000_000)?;
                ensure!(loss_weight > 0.0 && loss_weight.is_finite(), "loss_weight must be in (0, ∞), got {loss_weight}");
                check_schedule(initial_lr, decay_rate, decay_steps, iterations)?;
                ensure!(activation != Activation::Softmax, "softmax is only allowed on the output layer");
                let config = PinnConfig {
                    network: NetworkSpec::mlp(1, hidden_layers, width, activation, LayerSpec::new(states, Activation::Softmax))?,
                    collocation_count,
                    loss_weight,
                    schedule: TrainingSchedule { initial_lr, decay_rate, decay_steps, iterations, staircase },
                    adam: AdamConfig::default(),
                    seed,
                };
                config.validate(model)?;
                Method::Pinn(config)
            }
            Self::Pigan {
                generator_layers,
                generator_width,
                discriminator_layers,
                discriminator_width,
                latent_dim,
                collocation_count,
                loss_weight,
                initial_lr,
                decay_rate,
                decay_steps,
                iterations,
                staircase,
                discriminator_steps,
                sample_count,
                ref measurements,
                initial_samples,
            } => {
                in_range("generator_layers", generator_layers, 0, 64)?;
                in_range("discriminator_layers", discriminator_layers, 0, 64)?;
                in_range("generator_width", generator_width, 1, 4096)?;
                in_range("discriminator_width", discriminator_width, 1, 4096)?;
                in_range("latent_dim", latent_dim, 1, 64)?;
                in_range("collocation_count", collocation_count, 2, 1_000_000)?;
                in_range("discriminator_steps", discriminator_steps, 1, 100)?;
                in_range("sample_count", sample_count, 2, 10_000_000)?;
                ensure!(loss_weight > 0.0 && loss_weight.is_finite(), "loss_weight must be in (0, ∞), got {loss_weight}");
                check_schedule(initial_lr, decay_rate, decay_steps, iterations)?;
                if let Some(n) = initial_samples {
                    in_range("initial_samples", n, 1, 1_000_000)?;
                }
                let distributional = model.initial().is_distributional();
                if measurements.is_none() && !distributional {
                    bail!("pigan needs data entries: give `measurements`, or a distributional initial condition to sample");
                }
                if measurements.is_some() && distributional {
                    bail!("measurements require a fixed initial condition; the model's is distributional");
                }
                if initial_samples.is_some() && !distributional {
                    bail!("`initial_samples` applies only to a distributional initial condition");
                }
                let mut config = GanConfig::standard(states, seed);
                config.generator = NetworkSpec::mlp(
                    1 + latent_dim,
                    generator_layers,
                    generator_width,
                    Activation::Tanh,
                    LayerSpec::new(states, Activation::Softmax),
                )?;
                config.discriminator = NetworkSpec::mlp(
                    1 + states,
                    discriminator_layers,
                    discriminator_width,
                    Activation::Tanh,
                    LayerSpec::new(1, Activation::Sigmoid),
                )?;
                config.latent_dim = latent_dim;
                config.collocation_count = collocation_count;
                config.loss_weight = loss_weight;
                config.schedule = TrainingSchedule { initial_lr, decay_rate, decay_steps, iterations, staircase };
                config.discriminator_steps = discriminator_steps;
                config.sample_count = sample_count;
                config.validate(states)?;
                Method::Pigan {
                    config,
                    measurements: measurements.clone(),
                    initial_samples: distributional.then(|| initial_samples.unwrap_or(DEFAULT_INITIAL_SAMPLES)),
                }
            }
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    model: Option<serde_json::Value>,
    method: Option<serde_json::Value>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    grid: Option<GridSpec>,
    #[serde(default)]
    replications: Option<usize>,
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: MultiStateModel,
    pub method: Method,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub grid: GridSpec,
    pub replications: usize,
    /// The config document with every default filled in and paths made absolute;
    /// parsing it again yields the same `RunConfig`.
    pub resolved: serde_json::Value,
}

pub const DEFAULT_OUTPUT_DIR: &str = "pirel-out";

fn absolute(base: &Path, path: &Path) -> Result<PathBuf> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    ensure!(full.exists(), "referenced file {} does not exist", full.display());
    Ok(full.canonicalize()?)
}

/// Parses a config document. Relative paths inside it resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(config_error).context("invalid config")?;

    let model_file = match raw.model {
        None => ModelFile::from_model(&dual_processor_model()),
        Some(serde_json::Value::String(name)) => {
            ensure!(name == BUILTIN_MODEL, "unknown built-in model {name:?} (available: {BUILTIN_MODEL})");
            ModelFile::from_model(&dual_processor_model())
        }
        Some(serde_json::Value::Object(map)) if map.contains_key("path") => {
            ensure!(map.len() == 1, "a model reference has only a `path` key");
            let path = map["path"].as_str().context("model path must be a string")?;
            let path = absolute(base_dir, Path::new(path))?;
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let value = serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
            from_value(value, "model")?
        }
        Some(value) => from_value(value, "model")?,
    };
    let model = model_file.build().context("in `model`")?;

    let method_value = match raw.method {
        None => bail!("missing required section `method`"),
        Some(serde_json::Value::String(kind)) => serde_json::json!({ "kind": kind }),
        Some(v) => v,
    };
    let mut section: MethodSection = from_value(method_value, "method")?;
    if let MethodSection::Pigan { measurements: Some(path), .. } = &mut section {
        *path = absolute(base_dir, path).context("in `method.measurements`")?;
    }

    let seed = raw.seed.unwrap_or(0);
    let method = section.resolve(&model, seed).context("in `method`")?;
    let grid = raw.grid.unwrap_or_default();
    grid.validate().context("in `grid`")?;
    ensure!(grid.end <= model.mission_time() * 10.0, "grid end {} is far beyond the mission time", grid.end);
    let replications = raw.replications.unwrap_or(1);
    in_range("replications", replications, 1, 100_000)?;
    let output_dir = raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let output_dir = std::path::absolute(base_dir.join(output_dir))?;

    let resolved = serde_json::json!({
        "model": model_file,
        "method": section,
        "output_dir": output_dir,
        "seed": seed,
        "grid": grid,
        "replications": replications,
    });
    Ok(RunConfig { model, method, output_dir, seed, grid, replications, resolved })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parse_config(&text, base).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn minimal_pinn_takes_published_defaults() {
        let c = parse(r#"{"method": "pinn"}"#).unwrap();
        let Method::Pinn(p) = &c.method else { panic!("not pinn") };
        assert_eq!(p.network.canonical(), "1>50:tanh>50:tanh>4:softmax");
        assert_eq!(p.collocation_count, 40);
        assert_eq!(p.schedule.iterations, 20_000);
        assert_eq!(p.schedule.initial_lr, 1e-3);
        assert_eq!(p.schedule.decay_rate, 0.9);
        assert_eq!(p.schedule.decay_steps, 1000);
        assert_eq!(c.grid, GridSpec::default());
        assert_eq!(c.model, dual_processor_model());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = format!("{:#}", parse(r#"{"methd": "pinn"}"#).unwrap_err());
        assert!(e.contains("unknown key") && e.contains("methd"), "{e}");
        let e = format!("{:#}", parse(r#"{"method": {"kind": "pinn", "iteratons": 5}}"#).unwrap_err());
        assert!(e.contains("unknown key") && e.contains("iteratons"), "{e}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let e = format!("{:#}", parse(r#"{"method": "ode", "grid": {"start": 0, "end": 30, "step": 0}}"#).unwrap_err());
        assert!(e.contains("step must be positive"), "{e}");
        assert!(GridSpec::parse("0:30:0").unwrap_err().to_string().contains("step must be positive"));
        let e = format!("{:#}", parse(r#"{"method": {"kind": "mc", "paths": 0}}"#).unwrap_err());
        assert!(e.contains("paths must be in [1, "), "{e}");
        assert!(format!("{:#}", parse("{}").unwrap_err()).contains("missing required section `method`"));
        assert!(parse(r#"{"method": "bogus"}"#).is_err());
        assert!(parse(r#"{"method": "ode", "model": {"path": "/nonexistent/model.json"}}"#).is_err());
    }

    #[test]
    fn pigan_needs_data() {
        let e = format!("{:#}", parse(r#"{"method": "pigan"}"#).unwrap_err());
        assert!(e.contains("needs data entries"), "{e}");
        let mut model = ModelFile::from_model(&dual_processor_model());
        model.initial = InitialCondition::BernoulliBeta { alpha: 5.0, beta: 1.5, high: 0, low: 1 };
        let doc = serde_json::json!({"method": "pigan", "model": model});
        let c = parse(&doc.to_string()).unwrap();
        let Method::Pigan { config, initial_samples, .. } = &c.method else { panic!() };
        assert_eq!(*initial_samples, Some(DEFAULT_INITIAL_SAMPLES));
        assert_eq!(config.schedule.iterations, 100_000);
        assert_eq!(config.schedule.initial_lr, 1e-2);
    }

    #[test]
    fn resolved_document_reparses_identically() {
        let c = parse(r#"{"method": {"kind": "pinn", "width": 8}, "seed": 3, "grid": {"start": 0, "end": 10, "step": 0.5}}"#).unwrap();
        let again = parse(&c.resolved.to_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn model_file_round_trip() {
        let file = ModelFile::from_model(&dual_processor_model());
        let text = serde_json::to_string_pretty(&file).unwrap();
        assert_eq!(parse_model(&text).unwrap(), dual_processor_model());
        let bad = text.replace("\"mission_time\"", "\"mission\"");
        assert!(format!("{:#}", parse_model(&bad).unwrap_err()).contains("unknown key"));
    }
}
