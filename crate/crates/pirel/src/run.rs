//! The three worked examples and single-method runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use pirel_core::metrics::{compare_statistics, rmse_by_state, EnsembleStats, ReplicationEnsemble};
use pirel_core::model::{check_simplex, InitialCondition, Measurement, MeasurementSet};
use pirel_core::ode::{analytic_dual_processor, solve_forward_kolmogorov, DEFAULT_STEP};
use pirel_core::pigan::{
    prediction_stats, synthesize_shifted_measurements, train_pigan, GanConfig, GanData, PredictionStats, ShiftDirection,
    StochasticSurrogate, TrainedGan,
};
use pirel_core::pinn::{train_pinn, PinnConfig};
use pirel_core::rng::{derive_seed, stream};
use pirel_core::{dual_processor_model, MultiStateModel, ProbabilityTrajectory};
use serde::{Deserialize, Serialize};

use crate::config::{GridSpec, Method, RunConfig};
use crate::csv_io;
use crate::harness::{estimate_parallel, timed_replications};
use crate::manifest::{PhaseRecord, RunManifest, SeedRecord};
use crate::params_file::write_parameters;

/// Tolerance for the simplex check on emitted probability rows.
const EMIT_TOLERANCE: f64 = 1e-9;

/// Beta shape parameters of the uncertain initial condition in the second example.
pub const EXAMPLE2_BETA: (f64, f64) = (5.0, 1.5);
pub const EXAMPLE2_INITIAL_SAMPLES: usize = 50;

/// Inspections of the third example, as `(time, shift)`; rows follow the shift rule.
pub const BETTER_INSPECTIONS: [(f64, f64); 3] = [(5.0, 2.0), (10.0, 2.0), (15.0, 2.0)];
pub const WORSE_INSPECTIONS: [(f64, f64); 3] = [(2.0, 3.0), (5.0, 2.0), (9.0, 4.0)];

/// Loss histories are written every this many iterations.
const LOSS_STRIDE: usize = 100;

/// Output directory, manifest and phase bookkeeping for one invocation.
pub struct Session {
    out: PathBuf,
    manifest: RunManifest,
    verbose: bool,
}

impl Session {
    pub fn new(out: &Path, command: &str, config: serde_json::Value) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { out: out.to_path_buf(), manifest: RunManifest::new(command, config), verbose: true })
    }

    pub fn quiet(mut self) -> Self {
        self.verbose = false;
        self
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    fn say(&self, line: &str) {
        if self.verbose {
            println!("{line}");
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> u64 {
        self.manifest.seeds.push(SeedRecord { name: name.to_owned(), seed });
        seed
    }

    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.say(&format!("[{name}] start"));
        let start = Instant::now();
        let result = f(self).with_context(|| format!("phase `{name}`"));
        let duration_s = start.elapsed().as_secs_f64();
        self.manifest.phases.push(PhaseRecord {
            name: name.to_owned(),
            duration_s,
            ok: result.is_ok(),
            error: result.as_ref().err().map(|e| format!("{e:#}")),
        });
        self.say(&format!("[{name}] {} in {duration_s:.2} s", if result.is_ok() { "done" } else { "FAILED" }));
        result
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.manifest.outputs.push(name.to_owned());
        Ok(path)
    }

    pub fn trajectory(&mut self, name: &str, trajectory: &ProbabilityTrajectory, up_states: &[usize]) -> Result<()> {
        if let Err((row, e)) = trajectory.check_simplex() {
            bail!("{name}: row {row} (t = {}) is not a probability vector: {e}", trajectory.times()[row]);
        }
        let path = self.path(name)?;
        csv_io::write_trajectory(&path, trajectory, up_states)
    }

    pub fn stats(&mut self, name: &str, stats: &PredictionStats) -> Result<()> {
        for (k, m) in stats.mean.iter().enumerate() {
            check_simplex(m, EMIT_TOLERANCE)
                .map_err(|e| anyhow!("{name}: mean at t = {} is not a probability vector: {e}", stats.times[k]))?;
        }
        let path = self.path(name)?;
        csv_io::write_stats(&path, stats)
    }

    pub fn ensemble(&mut self, tag: &str, ensemble: &ReplicationEnsemble, up_states: &[usize]) -> Result<()> {
        for (i, r) in ensemble.replications().iter().enumerate() {
            self.trajectory(&format!("ensemble_{tag}/replication_{i:03}.csv"), &r.trajectory, up_states)?;
        }
        let path = self.path(&format!("replications_{tag}.csv"))?;
        csv_io::write_replications(&path, ensemble)?;
        let path = self.path(&format!("timing_{tag}.csv"))?;
        csv_io::write_timings(&path, ensemble)
    }

    pub fn file(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.path(name)?;
        write(&path)
    }

    /// Writes the manifest, marking the run failed if `result` is an error.
    pub fn finish<T>(mut self, result: Result<T>) -> Result<(T, RunManifest)> {
        self.manifest.ok = result.is_ok();
        self.manifest.error = result.as_ref().err().map(|e| format!("{e:#}"));
        self.manifest.write_atomic(&self.out)?;
        result.map(|v| (v, self.manifest))
    }
}

/// RK4 forward-Kolmogorov solution on `grid`; the solve always starts at `t = 0`.
pub fn ode_on_grid(model: &MultiStateModel, grid: &[f64], step: f64) -> Result<ProbabilityTrajectory> {
    ensure!(!grid.is_empty(), "empty grid");
    if grid[0] == 0.0 {
        return Ok(solve_forward_kolmogorov(model, grid, step.min(min_spacing(grid)))?);
    }
    let mut full = vec![0.0];
    full.extend_from_slice(grid);
    let sol = solve_forward_kolmogorov(model, &full, step.min(min_spacing(&full)))?;
    Ok(ProbabilityTrajectory::new(grid.to_vec(), sol.probs()[1..].to_vec())?)
}

fn min_spacing(grid: &[f64]) -> f64 {
    grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn pinn_trajectory(
    model: &MultiStateModel,
    config: &PinnConfig,
    grid: &[f64],
) -> Result<(ProbabilityTrajectory, pirel_core::pinn::TrainedSurrogate)> {
    let surrogate = train_pinn(model, config)?;
    Ok((surrogate.predict_state_probabilities(grid)?.trajectory, surrogate))
}

fn losses_csv(path: &Path, gan: &TrainedGan) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "generator", "adversarial", "data", "physics", "discriminator"])?;
    let steps = gan.config.discriminator_steps;
    for (i, g) in gan.generator_history.iter().enumerate().step_by(LOSS_STRIDE) {
        let d = gan.discriminator_history[(i + 1) * steps - 1];
        w.write_record([
            i.to_string(),
            csv_io::real(g.total),
            csv_io::real(g.adversarial),
            csv_io::real(g.data),
            csv_io::real(g.physics),
            csv_io::real(d),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn save_gan(session: &mut Session, tag: &str, gan: &TrainedGan) -> Result<()> {
    let g = &gan.generator;
    session.file(&format!("generator{tag}.params"), |p| write_parameters(p, &g.spec, &g.params, Some(&gan.config)))?;
    session.file(&format!("discriminator{tag}.params"), |p| {
        write_parameters(p, &gan.config.discriminator, &gan.discriminator, Some(&gan.config))
    })?;
    session.file(&format!("losses{tag}.csv"), |p| losses_csv(p, gan))
}

fn stats_as_ensemble(stats: &PredictionStats) -> EnsembleStats {
    EnsembleStats { times: stats.times.clone(), mean: stats.mean.clone(), std: stats.std.clone() }
}

/// Options shared by the example commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleOptions {
    pub example: u8,
    pub seed: u64,
    pub grid: GridSpec,
    /// Replication count; defaults per example.
    pub replications: Option<usize>,
    /// Full-scale Monte Carlo for the second example.
    pub full_scale: bool,
    /// Overrides the training iteration count of every neural phase.
    pub iterations: Option<u64>,
}

impl ExampleOptions {
    pub fn new(example: u8, seed: u64) -> Self {
        Self { example, seed, grid: GridSpec::default(), replications: None, full_scale: false, iterations: None }
    }
}

/// Runs example 1, 2 or 3 into `out`, writing a manifest whether or not it succeeds.
pub fn run_example(options: &ExampleOptions, out: &Path) -> Result<RunManifest> {
    ensure!((1..=3).contains(&options.example), "no example {}; choose 1, 2 or 3", options.example);
    let mut session = Session::new(out, "example", serde_json::to_value(options)?)?;
    let result = match options.example {
        1 => example1(&mut session, options),
        2 => example2(&mut session, options),
        _ => example3(&mut session, options),
    };
    session.finish(result).map(|(_, m)| m)
}

/// Deterministic start: RK4, Monte Carlo and PINN, compared by RMSE, mean
/// differences and composite standard deviations.
fn example1(session: &mut Session, options: &ExampleOptions) -> Result<()> {
    let model = dual_processor_model();
    let up = model.up_states().to_vec();
    let grid = options.grid.points()?;
    let replications = options.replications.unwrap_or(pirel_core::metrics::DEFAULT_REPLICATIONS);
    let mc_seed = session.seed("mc", derive_seed(options.seed, 1));
    let pinn_seed = session.seed("pinn", derive_seed(options.seed, 2));

    let reference = session.phase("ode", |s| {
        let t = ode_on_grid(&model, &grid, DEFAULT_STEP)?;
        s.trajectory("trajectory_ode.csv", &t, &up)?;
        Ok(t)
    })?;
    let mc = session.phase("mc", |s| {
        let e = timed_replications(replications, mc_seed, |_, seed| estimate_parallel(&model, 100_000, &grid, seed))?;
        s.trajectory("trajectory_mc.csv", &e.replications()[0].trajectory, &up)?;
        s.ensemble("mc", &e, &up)?;
        s.stats("stats_mc.csv", &csv_io::ensemble_prediction_stats(&e, &up))?;
        Ok(e)
    })?;
    let pinn = session.phase("pinn", |s| {
        let out = s.out().to_path_buf();
        let e = timed_replications(replications, pinn_seed, |index, seed| {
            let mut config = PinnConfig::standard(model.state_count(), seed);
            if let Some(n) = options.iterations {
                config.schedule.iterations = n;
            }
            let (t, surrogate) = pinn_trajectory(&model, &config, &grid)?;
            if index == 0 {
                write_parameters(&out.join("pinn.params"), &surrogate.spec, &surrogate.params, Some(&config))?;
            }
            Ok(t)
        })?;
        s.manifest.outputs.push("pinn.params".into());
        s.trajectory("trajectory_pinn.csv", &e.replications()[0].trajectory, &up)?;
        s.ensemble("pinn", &e, &up)?;
        s.stats("stats_pinn.csv", &csv_io::ensemble_prediction_stats(&e, &up))?;
        Ok(e)
    })?;
    session.phase("metrics", |s| {
        let rmse = rmse_by_state(&pinn, &reference)?;
        s.file("rmse.csv", |p| csv_io::write_rmse(p, &grid, &rmse))?;
        let rmse_mc = rmse_by_state(&mc, &reference)?;
        s.file("rmse_mc.csv", |p| csv_io::write_rmse(p, &grid, &rmse_mc))?;
        let deltas = compare_statistics(&pinn.statistics(), &mc.statistics())?;
        s.file("deltas.csv", |p| csv_io::write_deltas(p, &grid, &deltas))?;
        let worst = rmse.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        let mean_pinn = mean_duration(&pinn);
        let mean_mc = mean_duration(&mc);
        s.say(&format!("example 1: max PINN RMSE {worst:.3e}; mean time per replication PINN {mean_pinn:.2} s, MC {mean_mc:.2} s"));
        Ok(())
    })
}

fn mean_duration(e: &ReplicationEnsemble) -> f64 {
    e.replications().iter().map(|r| r.duration_s).sum::<f64>() / e.len() as f64
}

/// Draws of `ρ₀ ~ Beta(5, 1.5)`, each giving the initial vector `[ρ₀, 1 − ρ₀, 0, 0]`.
pub fn example2_initial_samples(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let (alpha, beta) = EXAMPLE2_BETA;
    let initial = InitialCondition::BernoulliBeta { alpha, beta, high: 0, low: 1 };
    let mut rng = stream(seed);
    (0..count).map(|_| initial.sample_vector(4, &mut rng).expect("valid condition")).collect()
}

/// Uncertain start: PIGAN trained on Beta-sampled initial vectors, against Monte
/// Carlo replications that each start from one sampled vector.
fn example2(session: &mut Session, options: &ExampleOptions) -> Result<()> {
    let (alpha, beta) = EXAMPLE2_BETA;
    let model = dual_processor_model().with_initial(InitialCondition::BernoulliBeta { alpha, beta, high: 0, low: 1 })?;
    let up = model.up_states().to_vec();
    let grid = options.grid.points()?;
    let (default_reps, paths) = if options.full_scale { (50, 100_000) } else { (10, 10_000) };
    let replications = options.replications.unwrap_or(default_reps);
    let sample_seed = session.seed("initial_samples", derive_seed(options.seed, 3));
    let gan_seed = session.seed("pigan", derive_seed(options.seed, 4));
    let eval_seed = session.seed("pigan_sampling", derive_seed(options.seed, 5));
    let mc_seed = session.seed("mc", derive_seed(options.seed, 6));

    let samples = example2_initial_samples(sample_seed, EXAMPLE2_INITIAL_SAMPLES);
    let entries: Vec<Measurement> = samples.iter().map(|v| Measurement { t: 0.0, value: v.clone() }).collect();
    session.file("initial_samples.csv", |p| csv_io::write_measurements(p, &entries))?;

    session.phase("ode", |s| {
        let mean_start = model.with_initial(InitialCondition::Simplex(model.initial().mean_vector(4)))?;
        let t = ode_on_grid(&mean_start, &grid, DEFAULT_STEP)?;
        s.trajectory("trajectory_ode.csv", &t, &up)
    })?;
    let gan_stats = session.phase("pigan", |s| {
        let mut config = GanConfig::standard(model.state_count(), gan_seed);
        if let Some(n) = options.iterations {
            config.schedule.iterations = n;
        }
        let gan = train_pigan(&model, GanData::from_initial_samples(samples.clone())?, &config)?;
        save_gan(s, "", &gan)?;
        let stats = prediction_stats(&gan.generator, &grid, config.sample_count, &up, eval_seed)?;
        s.stats("stats_pigan.csv", &stats)?;
        s.file("band_pigan.csv", |p| csv_io::write_reliability_band(p, &stats))?;
        // Generated initial vectors, for comparison with the sampled ones.
        let z = draw_latent(&gan.generator, config.sample_count, eval_seed);
        let generated = gan.generator.sample_batch(0.0, &z);
        let rows: Vec<Measurement> = generated.chunks(4).map(|p| Measurement { t: 0.0, value: p.to_vec() }).collect();
        s.file("generated_t0.csv", |p| csv_io::write_measurements(p, &rows))?;
        let last = gan.generator_history.last().map_or(f64::NAN, |l| l.total);
        s.say(&format!("example 2: PIGAN final generator loss {last:.4e}; p0(0) mean {:.4} std {:.4}", stats.mean[0][0], stats.std[0][0]));
        Ok(stats)
    })?;
    let mc = session.phase("mc", |s| {
        let e = timed_replications(replications, mc_seed, |index, seed| {
            let start = model.with_initial(InitialCondition::Simplex(samples[index % samples.len()].clone()))?;
            estimate_parallel(&start, paths, &grid, seed)
        })?;
        s.ensemble("mc", &e, &up)?;
        s.stats("stats_mc.csv", &csv_io::ensemble_prediction_stats(&e, &up))?;
        Ok(e)
    })?;
    session.phase("metrics", |s| {
        let deltas = compare_statistics(&stats_as_ensemble(&gan_stats), &mc.statistics())?;
        s.file("deltas.csv", |p| csv_io::write_deltas(p, &grid, &deltas))
    })
}

fn draw_latent(g: &pirel_core::pigan::Generator, count: usize, seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream(derive_seed(seed, u64::MAX));
    (0..count * g.latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// One scenario of the third example: its measurements and per-stage statistics.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: &'static str,
    pub measurements: MeasurementSet,
    /// Statistics after training on the first `k + 1` measurements.
    pub stages: Vec<PredictionStats>,
}

pub fn example3_measurements(direction: ShiftDirection) -> Result<MeasurementSet> {
    let rows = match direction {
        ShiftDirection::Better => BETTER_INSPECTIONS,
        ShiftDirection::Worse => WORSE_INSPECTIONS,
    };
    let (times, shifts): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    Ok(synthesize_shifted_measurements(|t| analytic_dual_processor(t).to_vec(), &times, &shifts, direction)?)
}

/// Evaluation times: the grid plus every inspection time.
fn with_inspections(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut times: Vec<f64> = grid.iter().chain(extra).copied().collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Measurement fusion: for each scenario, retrain from scratch on the first one,
/// two and three inspections, and record reliability bands.
fn example3(session: &mut Session, options: &ExampleOptions) -> Result<()> {
    let model = dual_processor_model();
    let up = model.up_states().to_vec();
    let grid = options.grid.points()?;
    let eval_seed = session.seed("pigan_sampling", derive_seed(options.seed, 7));

    session.phase("ode", |s| s.trajectory("trajectory_ode.csv", &ode_on_grid(&model, &grid, DEFAULT_STEP)?, &up))?;
    let mut check = Vec::new();
    for (index, (name, direction)) in [("better", ShiftDirection::Better), ("worse", ShiftDirection::Worse)].into_iter().enumerate() {
        let measurements = example3_measurements(direction)?;
        session.file(&format!("measurements_{name}.csv"), |p| csv_io::write_measurements(p, measurements.entries()))?;
        let inspection_times: Vec<f64> = measurements.entries().iter().map(|m| m.t).collect();
        let times = with_inspections(&grid, &inspection_times);
        for stage in 1..=measurements.len() {
            let seed = session.seed(&format!("pigan_{name}_stage{stage}"), derive_seed(options.seed, 10 + 3 * index as u64 + stage as u64));
            let stats = session.phase(&format!("pigan_{name}_stage{stage}"), |s| {
                let mut config = GanConfig::measurement_update(model.state_count(), seed);
                if let Some(n) = options.iterations {
                    config.schedule.iterations = n;
                }
                let data = GanData::from_measurements(&model, &measurements.prefix(stage))?;
                let gan = train_pigan(&model, data, &config)?;
                save_gan(s, &format!("_{name}_stage{stage}"), &gan)?;
                let stats = prediction_stats(&gan.generator, &times, config.sample_count, &up, eval_seed)?;
                s.stats(&format!("stats_{name}_stage{stage}.csv"), &stats)?;
                s.file(&format!("band_{name}_stage{stage}.csv"), |p| csv_io::write_reliability_band(p, &stats))?;
                Ok(stats)
            })?;
            for m in &measurements.entries()[..stage] {
                let k = stats.times.iter().position(|&t| t == m.t).expect("inspection time is evaluated");
                let measured: f64 = up.iter().map(|&j| m.value[j]).sum();
                let (mean, sd) = (stats.reliability_mean[k], stats.reliability_std[k]);
                check.push((name, stage, m.t, measured, mean, sd));
            }
        }
    }
    session.file("inspection_check.csv", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["scenario", "stage", "t", "R_measured", "R_mean", "R_std", "inside_band"])?;
        for (name, stage, t, measured, mean, sd) in &check {
            let inside = (measured - mean).abs() <= 2.0 * sd;
            w.write_record([
                name.to_string(),
                stage.to_string(),
                csv_io::real(*t),
                csv_io::real(*measured),
                csv_io::real(*mean),
                csv_io::real(*sd),
                inside.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Runs the method selected by `config`; returns a one-line summary.
pub fn run_method(config: &RunConfig) -> Result<(String, RunManifest)> {
    let mut session = Session::new(&config.output_dir, "run", config.resolved.clone())?;
    let result = method_phases(&mut session, config);
    session.finish(result)
}

fn method_phases(session: &mut Session, config: &RunConfig) -> Result<String> {
    let model = &config.model;
    let up = model.up_states().to_vec();
    let grid = config.grid.points()?;
    let n = config.replications;
    let master = session.seed("master", config.seed);
    match &config.method {
        Method::Ode { step } => session.phase("ode", |s| {
            let start = Instant::now();
            ensure!(!model.initial().is_distributional(), "the ODE solver needs a fixed initial condition");
            let t = ode_on_grid(model, &grid, *step)?;
            s.trajectory("trajectory_ode.csv", &t, &up)?;
            let r = *t.reliability(&up).last().expect("non-empty grid");
            Ok(format!("ode: {} points, R({}) = {r:.6}, {:.3} s", t.len(), grid[grid.len() - 1], start.elapsed().as_secs_f64()))
        }),
        Method::Mc { paths } => session.phase("mc", |s| {
            let start = Instant::now();
            let e = timed_replications(n, master, |_, seed| estimate_parallel(model, *paths, &grid, seed))?;
            s.trajectory("trajectory_mc.csv", &e.replications()[0].trajectory, &up)?;
            s.ensemble("mc", &e, &up)?;
            if n > 1 {
                s.stats("stats_mc.csv", &csv_io::ensemble_prediction_stats(&e, &up))?;
            }
            Ok(format!("mc: {} × {paths} paths, {:.2} s", n, start.elapsed().as_secs_f64()))
        }),
        Method::Pinn(base) => session.phase("pinn", |s| {
            let start = Instant::now();
            let out = s.out().to_path_buf();
            let losses = std::sync::Mutex::new(vec![f64::NAN; n]);
            let e = timed_replications(n, master, |index, seed| {
                let pinn = PinnConfig { seed, ..base.clone() };
                let (t, surrogate) = pinn_trajectory(model, &pinn, &grid)?;
                losses.lock().expect("unpoisoned")[index] = surrogate.final_loss;
                if index == 0 {
                    write_parameters(&out.join("pinn.params"), &surrogate.spec, &surrogate.params, Some(&pinn))?;
                }
                Ok(t)
            })?;
            s.manifest.outputs.push("pinn.params".into());
            s.trajectory("trajectory_pinn.csv", &e.replications()[0].trajectory, &up)?;
            s.ensemble("pinn", &e, &up)?;
            if n > 1 {
                s.stats("stats_pinn.csv", &csv_io::ensemble_prediction_stats(&e, &up))?;
            }
            let loss = losses.into_inner().expect("unpoisoned")[0];
            Ok(format!("pinn: final loss {loss:.4e}, {:.2} s", start.elapsed().as_secs_f64()))
        }),
        Method::Pigan { config: base, measurements, initial_samples } => session.phase("pigan", |s| {
            ensure!(n == 1, "pigan runs a single training; set replications to 1");
            let start = Instant::now();
            let gan_config = GanConfig { seed: derive_seed(master, 0), ..base.clone() };
            let data = match (measurements, initial_samples) {
                (Some(path), _) => GanData::from_measurements(model, &csv_io::read_measurements(path)?)?,
                (None, Some(count)) => {
                    let mut rng = stream(derive_seed(master, 1));
                    let samples: Vec<Vec<f64>> = (0..*count)
                        .map(|_| model.initial().sample_vector(model.state_count(), &mut rng))
                        .collect::<pirel_core::Result<_>>()?;
                    let entries: Vec<Measurement> = samples.iter().map(|v| Measurement { t: 0.0, value: v.clone() }).collect();
                    s.file("initial_samples.csv", |p| csv_io::write_measurements(p, &entries))?;
                    GanData::from_initial_samples(samples)?
                }
                (None, None) => bail!("pigan needs data entries"),
            };
            let gan = train_pigan(model, data, &gan_config)?;
            save_gan(s, "", &gan)?;
            let stats = prediction_stats(&gan.generator, &grid, gan_config.sample_count, &up, derive_seed(master, 2))?;
            s.stats("stats_pigan.csv", &stats)?;
            s.file("band_pigan.csv", |p| csv_io::write_reliability_band(p, &stats))?;
            let last = gan.generator_history.last().map_or(f64::NAN, |l| l.total);
            Ok(format!(
                "pigan: final generator loss {last:.4e}, {} samples per time, {:.2} s",
                gan_config.sample_count,
                start.elapsed().as_secs_f64()
            ))
        }),
    }
}

/// Per-(time, state) RMSE of every trajectory CSV in `dir` against `reference`.
pub fn ensemble_metrics(dir: &Path, reference: &Path, out: &Path) -> Result<String> {
    let reference = csv_io::read_trajectory(reference)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    files.sort();
    ensure!(!files.is_empty(), "no trajectory CSVs in {}", dir.display());
    let replications = files
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(pirel_core::metrics::Replication { seed: i as u64, duration_s: 0.0, trajectory: csv_io::read_trajectory(p)? }))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = ReplicationEnsemble::new(replications)?;
    let rmse = rmse_by_state(&ensemble, &reference)?;
    std::fs::create_dir_all(out)?;
    csv_io::write_rmse(&out.join("rmse.csv"), reference.times(), &rmse)?;
    let flat: Vec<f64> = rmse.iter().flatten().copied().collect();
    let max = flat.iter().fold(0.0f64, |a, &b| a.max(b));
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    Ok(format!("metrics: {} replications, RMSE max {max:.4e}, mean {mean:.4e}", ensemble.len()))
}
