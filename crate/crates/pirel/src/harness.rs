//! Parallel, seeded replication and Monte Carlo estimation.

use std::time::Instant;

use anyhow::{anyhow, Result};
use pirel_core::mc::{accumulate_occupancy, OccupancyCounts};
use pirel_core::metrics::{replication_seed, Replication, ReplicationEnsemble};
use pirel_core::{MultiStateModel, ProbabilityTrajectory};
use rayon::prelude::*;

/// Paths per parallel work unit. Results do not depend on it.
const MC_CHUNK: u64 = 4096;

/// Runs `task(index, seed)` for `count` replications on the rayon pool, timing
/// each. Seeds derive from `(master_seed, index)`, so the ensemble (durations
/// aside) does not depend on the thread count.
pub fn timed_replications<F>(count: usize, master_seed: u64, task: F) -> Result<ReplicationEnsemble>
where
    F: Fn(usize, u64) -> Result<ProbabilityTrajectory> + Sync,
{
    anyhow::ensure!(count >= 1, "replication count must be at least 1");
    let replications = (0..count)
        .into_par_iter()
        .map(|index| {
            let seed = replication_seed(master_seed, index);
            let start = Instant::now();
            let trajectory = task(index, seed).map_err(|e| anyhow!("replication {index} (seed {seed}): {e:#}"))?;
            Ok(Replication { seed, duration_s: start.elapsed().as_secs_f64(), trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationEnsemble::new(replications)?)
}

/// [`pirel_core::mc::estimate_state_probabilities`] fanned out over the rayon
/// pool; bit-identical to the sequential estimate.
pub fn estimate_parallel(model: &MultiStateModel, paths: u64, grid: &[f64], master_seed: u64) -> Result<ProbabilityTrajectory> {
    anyhow::ensure!(paths >= 1, "need at least one path");
    let chunks = paths.div_ceil(MC_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| accumulate_occupancy(model, grid, c * MC_CHUNK..((c + 1) * MC_CHUNK).min(paths), master_seed))
        .reduce(
            || OccupancyCounts::new(grid.to_vec(), model.state_count()),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    Ok(counts.to_trajectory()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pirel_core::dual_processor_model;
    use pirel_core::mc::estimate_state_probabilities;

    #[test]
    fn parallel_mc_matches_sequential() {
        let model = dual_processor_model();
        let grid: Vec<f64> = (0..=30).map(f64::from).collect();
        let a = estimate_parallel(&model, 10_000, &grid, 5).unwrap();
        let b = estimate_state_probabilities(&model, 10_000, &grid, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replications_are_ordered_and_seeded() {
        let grid = vec![0.0, 1.0];
        let task = |_: usize, seed: u64| {
            let p = (seed % 100) as f64 / 100.0;
            Ok(ProbabilityTrajectory::new(grid.clone(), vec![vec![p, 1.0 - p]; 2])?)
        };
        let a = timed_replications(8, 3, task).unwrap();
        let b = timed_replications(8, 3, task).unwrap();
        for (i, (x, y)) in a.replications().iter().zip(b.replications()).enumerate() {
            assert_eq!(x.seed, replication_seed(3, i));
            assert_eq!(x.trajectory, y.trajectory);
        }
        let err = timed_replications(3, 0, |i, s| if i == 1 { anyhow::bail!("diverged") } else { task(i, s) }).unwrap_err();
        assert!(err.to_string().contains("replication 1"));
    }
}
