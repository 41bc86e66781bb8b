//! Cross-method validation statistics over replicated runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::rng::derive_seed;
use crate::trajectory::ProbabilityTrajectory;

/// Replication count used for the PINN/MC comparison.
pub const DEFAULT_REPLICATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    pub duration_s: f64,
    pub trajectory: ProbabilityTrajectory,
}

/// Trajectories from repeated seeded runs, all on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationEnsemble {
    replications: Vec<Replication>,
}

/// Per-(time, state) statistics, indexed `[time][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

impl ReplicationEnsemble {
    pub fn new(replications: Vec<Replication>) -> Result<Self> {
        let Some(first) = replications.first() else {
            bail!(Config, "an ensemble needs at least one replication");
        };
        for (i, r) in replications.iter().enumerate().skip(1) {
            if !r.trajectory.same_grid(&first.trajectory) {
                bail!(GridMismatch, "replication {i} is not on the grid of replication 0");
            }
        }
        Ok(Self { replications })
    }

    pub fn len(&self) -> usize {
        self.replications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replications.is_empty()
    }

    pub fn replications(&self) -> &[Replication] {
        &self.replications
    }

    pub fn times(&self) -> &[f64] {
        self.replications[0].trajectory.times()
    }

    pub fn state_count(&self) -> usize {
        self.replications[0].trajectory.state_count()
    }

    /// Mean and standard deviation (divisor `N − 1`; zero when `N = 1`), two-pass.
    pub fn statistics(&self) -> EnsembleStats {
        let (times, states, n) = (self.times(), self.state_count(), self.len() as f64);
        let mut mean = vec![vec![0.0; states]; times.len()];
        let mut std = vec![vec![0.0; states]; times.len()];
        for k in 0..times.len() {
            for j in 0..states {
                let m = self.replications.iter().map(|r| r.trajectory.probs()[k][j]).sum::<f64>() / n;
                let ss: f64 = self.replications.iter().map(|r| (r.trajectory.probs()[k][j] - m).powi(2)).sum();
                mean[k][j] = m;
                std[k][j] = if self.len() > 1 { libm::sqrt(ss / (n - 1.0)) } else { 0.0 };
            }
        }
        EnsembleStats { times: times.to_vec(), mean, std }
    }

    /// Same quantities as [`statistics`](Self::statistics), by Welford's streaming update.
    pub fn streaming_statistics(&self) -> EnsembleStats {
        let (times, states) = (self.times(), self.state_count());
        let mut mean = vec![vec![0.0; states]; times.len()];
        let mut m2 = vec![vec![0.0; states]; times.len()];
        for (i, r) in self.replications.iter().enumerate() {
            let count = (i + 1) as f64;
            for (k, p) in r.trajectory.probs().iter().enumerate() {
                for j in 0..states {
                    let delta = p[j] - mean[k][j];
                    mean[k][j] += delta / count;
                    m2[k][j] += delta * (p[j] - mean[k][j]);
                }
            }
        }
        let denom = (self.len().max(2) - 1) as f64;
        let std =
            m2.into_iter().map(|row| row.into_iter().map(|v| if self.len() > 1 { libm::sqrt(v / denom) } else { 0.0 }).collect()).collect();
        EnsembleStats { times: times.to_vec(), mean, std }
    }
}

/// Seed for replication `index` under `master`.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Runs `task(index, seed)` for `count` replications, in order. Durations are
/// whatever the task reports; the std front end supplies wall-clock timing.
pub fn replication_run<F>(count: usize, master_seed: u64, mut task: F) -> Result<ReplicationEnsemble>
where
    F: FnMut(usize, u64) -> Result<(ProbabilityTrajectory, f64)>,
{
    if count == 0 {
        bail!(Config, "replication count must be at least 1");
    }
    let mut replications = Vec::with_capacity(count);
    for index in 0..count {
        let seed = replication_seed(master_seed, index);
        let (trajectory, duration_s) = task(index, seed).map_err(|e| Error::Config(alloc::format!("replication {index}: {e}")))?;
        replications.push(Replication { seed, duration_s, trajectory });
    }
    ReplicationEnsemble::new(replications)
}

/// `RMSE_j(t) = sqrt((1/N)·Σᵢ (p_jⁱ(t) − p_j*(t))²)`, indexed `[time][state]`.
pub fn rmse_by_state(ensemble: &ReplicationEnsemble, reference: &ProbabilityTrajectory) -> Result<Vec<Vec<f64>>> {
    if !ensemble.replications[0].trajectory.same_grid(reference) {
        bail!(GridMismatch, "reference grid differs from the ensemble grid");
    }
    let n = ensemble.len() as f64;
    Ok(reference
        .probs()
        .iter()
        .enumerate()
        .map(|(k, truth)| {
            truth
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    let ss: f64 = ensemble.replications.iter().map(|r| (r.trajectory.probs()[k][j] - p).powi(2)).sum();
                    libm::sqrt(ss / n)
                })
                .collect()
        })
        .collect())
}

pub fn absolute_difference(a: f64, b: f64) -> f64 {
    libm::fabs(a - b)
}

/// `sqrt(a² + b²)`.
pub fn composite_std(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}

/// Per-(time, state) `(|mean_a − mean_b|, composite std)` between two sets of statistics.
pub fn compare_statistics(a: &EnsembleStats, b: &EnsembleStats) -> Result<Vec<Vec<(f64, f64)>>> {
    if a.times != b.times || a.mean.first().map(Vec::len) != b.mean.first().map(Vec::len) {
        bail!(GridMismatch, "statistics are on different grids or state counts");
    }
    Ok((0..a.times.len())
        .map(|k| {
            (0..a.mean[k].len())
                .map(|j| (absolute_difference(a.mean[k][j], b.mean[k][j]), composite_std(a.std[k][j], b.std[k][j])))
                .collect()
        })
        .collect())
}
