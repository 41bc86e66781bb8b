use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pirel::config::GridSpec;
use pirel::manifest::RunManifest;
use pirel::run::ensemble_metrics;
use pirel::{parse_config, run_example, run_method, ExampleOptions};

/// Physics-informed reliability assessment of multi-state systems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Output root; each command writes into a directory beneath it unless `--out` is given.
    #[arg(long, env = "PIREL_OUT", default_value = "pirel-out", global = true)]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce one of the three worked examples.
    Example {
        /// 1: deterministic start; 2: uncertain start; 3: inspection data.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        number: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: <out-root>/example<N>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation grid as start:end:step.
        #[arg(long, value_parser = GridSpec::parse, default_value = "0:30:1")]
        grid: GridSpec,
        #[arg(long)]
        replications: Option<usize>,
        /// Full-scale Monte Carlo (50 × 10⁵ paths in example 2).
        #[arg(long)]
        full_scale: bool,
        /// Override the training iterations of every neural phase.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Run one method from a JSON config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = GridSpec::parse)]
        grid: Option<GridSpec>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// RMSE of every trajectory CSV in a directory against a reference trajectory.
    Metrics {
        ensemble_dir: PathBuf,
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest into a new directory.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn finish(manifest: &RunManifest, out: &std::path::Path) {
    println!("wrote {} files and manifest to {}", manifest.outputs.len(), out.display());
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Example { number, seed, out, grid, replications, full_scale, iterations } => {
            let out = out.unwrap_or_else(|| cli.out_root.join(format!("example{number}")));
            let options = ExampleOptions { example: number, seed, grid, replications, full_scale, iterations };
            let manifest = run_example(&options, &out)?;
            finish(&manifest, &out);
        }
        Command::Run { config, seed, out, grid, replications } => {
            let mut doc: serde_json::Value = {
                let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
                serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", config.display()))?
            };
            // Command-line flags override the document.
            if let Some(map) = doc.as_object_mut() {
                if let Some(seed) = seed {
                    map.insert("seed".into(), seed.into());
                }
                if let Some(out) = &out {
                    map.insert("output_dir".into(), serde_json::to_value(std::path::absolute(out)?)?);
                }
                if let Some(grid) = grid {
                    map.insert("grid".into(), serde_json::to_value(grid)?);
                }
                if let Some(n) = replications {
                    map.insert("replications".into(), n.into());
                }
                if !map.contains_key("output_dir") {
                    let stem = config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                    map.insert("output_dir".into(), serde_json::to_value(std::path::absolute(cli.out_root.join(stem))?)?);
                }
            }
            let base = config.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(std::path::Path::new("."));
            let resolved = parse_config(&doc.to_string(), base).with_context(|| format!("in {}", config.display()))?;
            let (summary, manifest) = run_method(&resolved)?;
            println!("{summary}");
            finish(&manifest, &resolved.output_dir);
        }
        Command::Metrics { ensemble_dir, reference, out } => {
            let out = out.unwrap_or_else(|| cli.out_root.join("metrics"));
            println!("{}", ensemble_metrics(&ensemble_dir, &reference, &out)?);
        }
        Command::Replay { manifest, out } => {
            let recorded = RunManifest::read(&manifest)?;
            match recorded.command.as_str() {
                "example" => {
                    let options: ExampleOptions = serde_json::from_value(recorded.config).context("example options")?;
                    let m = run_example(&options, &out)?;
                    finish(&m, &out);
                }
                "run" => {
                    let mut doc = recorded.config;
                    doc["output_dir"] = serde_json::to_value(std::path::absolute(&out)?)?;
                    let resolved = parse_config(&doc.to_string(), std::path::Path::new("."))?;
                    let (summary, m) = run_method(&resolved)?;
                    println!("{summary}");
                    finish(&m, &out);
                }
                other => anyhow::bail!("manifest records unknown command {other:?}"),
            }
        }
    }
    Ok(())
}
