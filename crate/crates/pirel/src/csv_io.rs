//! CSV schemas for trajectories, prediction statistics, measurements and metrics.
//!
//! Every real is written with 17 significant digits, so a value read back is
//! bit-identical to the one written.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pirel_core::metrics::{EnsembleStats, ReplicationEnsemble};
use pirel_core::model::{Measurement, MeasurementSet};
use pirel_core::pigan::PredictionStats;
use pirel_core::ProbabilityTrajectory;

/// Formats a real with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_real(field: &str, line: u64, column: &str) -> Result<f64> {
    field.trim().parse().with_context(|| format!("line {line}, column {column}: not a number: {field:?}"))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source)
}

fn header_of<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    Ok(rdr.headers()?.iter().map(str::to_owned).collect())
}

fn expect_header(found: &[String], expected: &[String]) -> Result<()> {
    ensure!(found == expected, "unexpected header {:?}, expected {:?}", found.join(","), expected.join(","));
    Ok(())
}

fn state_header(prefix: &str, states: usize, suffixes: &[&str]) -> Vec<String> {
    (0..states).flat_map(|j| suffixes.iter().map(move |s| format!("{prefix}{j}{s}"))).collect()
}

/// `t,p0,...,pM,R`
pub fn trajectory_header(states: usize) -> Vec<String> {
    let mut h = vec!["t".to_owned()];
    h.extend(state_header("p", states, &[""]));
    h.push("R".to_owned());
    h
}

pub fn write_trajectory_to<W: Write>(out: W, trajectory: &ProbabilityTrajectory, up_states: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(trajectory.state_count()))?;
    for ((t, p), r) in trajectory.times().iter().zip(trajectory.probs()).zip(trajectory.reliability(up_states)) {
        let mut row = vec![real(*t)];
        row.extend(p.iter().map(|&v| real(v)));
        row.push(real(r));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, trajectory: &ProbabilityTrajectory, up_states: &[usize]) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trajectory_to(file, trajectory, up_states)
}

/// Reads a trajectory; the `R` column is parsed but not used.
pub fn read_trajectory_from<R: Read>(source: R) -> Result<ProbabilityTrajectory> {
    let mut rdr = reader(source);
    let header = header_of(&mut rdr)?;
    ensure!(header.len() >= 4, "trajectory header needs t, at least two states and R");
    let states = header.len() - 2;
    expect_header(&header, &trajectory_header(states))?;
    let (mut times, mut probs) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        ensure!(record.len() == header.len(), "line {line}: {} fields, expected {}", record.len(), header.len());
        times.push(parse_real(&record[0], line, "t")?);
        probs.push((0..states).map(|j| parse_real(&record[j + 1], line, &header[j + 1])).collect::<Result<Vec<_>>>()?);
        parse_real(&record[states + 1], line, "R")?;
    }
    Ok(ProbabilityTrajectory::new(times, probs)?)
}

pub fn read_trajectory(path: &Path) -> Result<ProbabilityTrajectory> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trajectory_from(file).with_context(|| format!("reading {}", path.display()))
}

/// `t,p0_mean,p0_std,...,pM_mean,pM_std,R_mean,R_std`
pub fn stats_header(states: usize) -> Vec<String> {
    let mut h = vec!["t".to_owned()];
    h.extend(state_header("p", states, &["_mean", "_std"]));
    h.extend(["R_mean".to_owned(), "R_std".to_owned()]);
    h
}

pub fn write_stats(path: &Path, stats: &PredictionStats) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(stats_header(stats.state_count()))?;
    for k in 0..stats.times.len() {
        let mut row = vec![real(stats.times[k])];
        for (m, s) in stats.mean[k].iter().zip(&stats.std[k]) {
            row.extend([real(*m), real(*s)]);
        }
        row.extend([real(stats.reliability_mean[k]), real(stats.reliability_std[k])]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stats(path: &Path) -> Result<PredictionStats> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = reader(file);
    let header = header_of(&mut rdr)?;
    ensure!(header.len() >= 5 && header.len() % 2 == 1, "malformed stats header in {}", path.display());
    let states = (header.len() - 3) / 2;
    expect_header(&header, &stats_header(states))?;
    let mut stats =
        PredictionStats { times: Vec::new(), mean: Vec::new(), std: Vec::new(), reliability_mean: Vec::new(), reliability_std: Vec::new() };
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record.iter().zip(&header).map(|(f, h)| parse_real(f, line, h)).collect::<Result<Vec<_>>>()?;
        ensure!(values.len() == header.len(), "line {line}: wrong field count");
        stats.times.push(values[0]);
        stats.mean.push((0..states).map(|j| values[1 + 2 * j]).collect());
        stats.std.push((0..states).map(|j| values[2 + 2 * j]).collect());
        stats.reliability_mean.push(values[1 + 2 * states]);
        stats.reliability_std.push(values[2 + 2 * states]);
    }
    Ok(stats)
}

/// Ensemble statistics in the stats schema, with reliability computed per replication.
pub fn ensemble_prediction_stats(ensemble: &ReplicationEnsemble, up_states: &[usize]) -> PredictionStats {
    let EnsembleStats { times, mean, std } = ensemble.statistics();
    let n = ensemble.len() as f64;
    let reliabilities: Vec<Vec<f64>> = ensemble.replications().iter().map(|r| r.trajectory.reliability(up_states)).collect();
    let (mut reliability_mean, mut reliability_std) = (Vec::new(), Vec::new());
    for k in 0..times.len() {
        let m = reliabilities.iter().map(|r| r[k]).sum::<f64>() / n;
        let ss: f64 = reliabilities.iter().map(|r| (r[k] - m).powi(2)).sum();
        reliability_mean.push(m);
        reliability_std.push(if ensemble.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 });
    }
    PredictionStats { times, mean, std, reliability_mean, reliability_std }
}

/// `t,y0,...,yM`
pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rdr = reader(file);
    let header = header_of(&mut rdr)?;
    ensure!(header.len() >= 3, "measurement header needs t and at least two states");
    let mut expected = vec!["t".to_owned()];
    expected.extend(state_header("y", header.len() - 1, &[""]));
    expect_header(&header, &expected)?;
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        ensure!(record.len() == header.len(), "line {line}: {} fields, expected {}", record.len(), header.len());
        let t = parse_real(&record[0], line, "t")?;
        let value = (1..header.len()).map(|j| parse_real(&record[j], line, &header[j])).collect::<Result<Vec<_>>>()?;
        entries.push(Measurement { t, value });
    }
    if entries.is_empty() {
        bail!("{} holds no measurements", path.display());
    }
    MeasurementSet::new(entries).with_context(|| format!("reading {}", path.display()))
}

pub fn write_measurements(path: &Path, entries: &[Measurement]) -> Result<()> {
    let states = entries.first().map_or(0, |m| m.value.len());
    let mut w = writer(path)?;
    let mut header = vec!["t".to_owned()];
    header.extend(state_header("y", states, &[""]));
    w.write_record(&header)?;
    for m in entries {
        let mut row = vec![real(m.t)];
        row.extend(m.value.iter().map(|&v| real(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,state,rmse`
pub fn write_rmse(path: &Path, times: &[f64], rmse: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "state", "rmse"])?;
    for (t, row) in times.iter().zip(rmse) {
        for (j, v) in row.iter().enumerate() {
            w.write_record([real(*t), j.to_string(), real(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,state,delta_p,delta_sigma`
pub fn write_deltas(path: &Path, times: &[f64], deltas: &[Vec<(f64, f64)>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "state", "delta_p", "delta_sigma"])?;
    for (t, row) in times.iter().zip(deltas) {
        for (j, (dp, ds)) in row.iter().enumerate() {
            w.write_record([real(*t), j.to_string(), real(*dp), real(*ds)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `replication,seed,duration_s`
pub fn write_timings(path: &Path, ensemble: &ReplicationEnsemble) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["replication", "seed", "duration_s"])?;
    for (i, r) in ensemble.replications().iter().enumerate() {
        w.write_record([i.to_string(), r.seed.to_string(), format!("{:.6}", r.duration_s)])?;
    }
    w.flush()?;
    Ok(())
}

/// `replication,seed,t,p0..pM`: every replication's trajectory in one table.
pub fn write_replications(path: &Path, ensemble: &ReplicationEnsemble) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["replication".to_owned(), "seed".to_owned(), "t".to_owned()];
    header.extend(state_header("p", ensemble.state_count(), &[""]));
    w.write_record(&header)?;
    for (i, r) in ensemble.replications().iter().enumerate() {
        for (t, p) in r.trajectory.times().iter().zip(r.trajectory.probs()) {
            let mut row = vec![i.to_string(), r.seed.to_string(), real(*t)];
            row.extend(p.iter().map(|&v| real(v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,R_mean,R_std,R_lower,R_upper`, the band being mean ± 2σ.
pub fn write_reliability_band(path: &Path, stats: &PredictionStats) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "R_mean", "R_std", "R_lower", "R_upper"])?;
    for (k, (lo, hi)) in stats.reliability_band().into_iter().enumerate() {
        w.write_record([real(stats.times[k]), real(stats.reliability_mean[k]), real(stats.reliability_std[k]), real(lo), real(hi)])?;
    }
    w.flush()?;
    Ok(())
}
