//! Reference solutions of the forward Kolmogorov equations `p'(t) = p(t)·Q(t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::model::MultiStateModel;
use crate::trajectory::ProbabilityTrajectory;

/// Default integration step for validation runs.
pub const DEFAULT_STEP: f64 = 0.01;

/// Integrates the forward equations with classical fourth-order Runge–Kutta and
/// reports `p(t)` at each grid time.
///
/// Between consecutive grid points the interval is split into the fewest equal
/// substeps no longer than `step`.
pub fn solve_forward_kolmogorov(model: &MultiStateModel, grid: &[f64], step: f64) -> Result<ProbabilityTrajectory> {
    if grid.first() != Some(&0.0) {
        bail!(Domain, "grid must start at t = 0");
    }
    if !(step > 0.0) || !step.is_finite() {
        bail!(Domain, "step must be positive, got {step}");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        bail!(Domain, "grid times must be strictly increasing");
    }
    let min_spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if step > min_spacing * (1.0 + 1e-12) {
        bail!(Domain, "step {step} exceeds the minimum grid spacing {min_spacing}");
    }
    let mut p = model.initial().vector(model.state_count())?;
    let n = p.len();
    let mut rows = Vec::with_capacity(grid.len());
    rows.push(p.clone());

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let substeps = libm::ceil((t1 - t0) / step - 1e-9).max(1.0) as usize;
        let h = (t1 - t0) / substeps as f64;
        for s in 0..substeps {
            let t = t0 + s as f64 * h;
            model.rate_matrix_at(t)?.left_mul_into(&p, &mut k1);
            let q_mid = model.rate_matrix_at(t + 0.5 * h)?;
            axpy_into(&p, 0.5 * h, &k1, &mut tmp);
            q_mid.left_mul_into(&tmp, &mut k2);
            axpy_into(&p, 0.5 * h, &k2, &mut tmp);
            q_mid.left_mul_into(&tmp, &mut k3);
            axpy_into(&p, h, &k3, &mut tmp);
            model.rate_matrix_at(t + h)?.left_mul_into(&tmp, &mut k4);
            for j in 0..n {
                p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        rows.push(p.clone());
    }
    ProbabilityTrajectory::new(grid.to_vec(), rows)
}

fn axpy_into(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Closed-form state probabilities of the dual-processor model started in state 0.
///
/// The generator is upper triangular with rates linear in `t`, so each equation
/// is solved by an integrating factor in `u = t²`.
pub fn analytic_dual_processor(t: f64) -> [f64; 4] {
    let e1 = libm::exp(-0.01 * t * t);
    let e2 = libm::exp(-0.02 * t * t);
    let p0 = e2;
    let p1 = 1.8 * (e1 - e2);
    let p2 = 0.81 * (1.0 - e1) * (1.0 - e1);
    [p0, p1, p2, 1.0 - p0 - p1 - p2]
}

/// Closed-form solution of the dual-processor model started in state 1.
pub fn analytic_dual_processor_from_degraded(t: f64) -> [f64; 4] {
    let e1 = libm::exp(-0.01 * t * t);
    [0.0, e1, 0.9 * (1.0 - e1), 0.1 * (1.0 - e1)]
}

/// Closed-form solution from the initial vector `[ρ, 1 − ρ, 0, 0]`.
///
/// By linearity, averaging over a random `ρ` gives the mean trajectory with `ρ`
/// replaced by its mean.
pub fn analytic_dual_processor_mixture(t: f64, rho: f64) -> [f64; 4] {
    let a = analytic_dual_processor(t);
    let b = analytic_dual_processor_from_degraded(t);
    core::array::from_fn(|j| rho * a[j] + (1.0 - rho) * b[j])
}

/// Total probability on the up states.
pub fn reliability_from_probs(p: &[f64], up_states: &[usize]) -> f64 {
    up_states.iter().map(|&j| p[j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dual_processor_model, InitialCondition};
    use crate::trajectory::uniform_grid;

    // Integrated independently (DOP853, rtol 1e-13) and frozen.
    const AT_3: [f64; 4] = [0.8352702114, 0.1415897529, 0.0060003511, 0.0171396845];
    const AT_7: [f64; 4] = [0.3753110989, 0.4271675316, 0.1215472315, 0.0759741381];
    const AT_13: [f64; 4] = [0.0340474547, 0.2708497247, 0.5386568095, 0.1564460111];
    const FROM_DEGRADED_AT_7: [f64; 4] = [0.0, 0.6126263942, 0.3486362452, 0.0387373606];

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            assert!(libm::fabs(x - y) <= tol, "component {j}: {x} vs {y}");
        }
    }

    #[test]
    fn analytic_matches_frozen_integration() {
        assert_vec_close(&analytic_dual_processor(0.0), &[1.0, 0.0, 0.0, 0.0], 0.0);
        assert_vec_close(&analytic_dual_processor(3.0), &AT_3, 1e-9);
        assert_vec_close(&analytic_dual_processor(7.0), &AT_7, 1e-9);
        assert_vec_close(&analytic_dual_processor(13.0), &AT_13, 1e-9);
        assert_vec_close(&analytic_dual_processor_from_degraded(7.0), &FROM_DEGRADED_AT_7, 1e-9);
    }

    #[test]
    fn reliability_examples() {
        assert_eq!(reliability_from_probs(&[1.0, 0.0, 0.0, 0.0], &[0, 1]), 1.0);
        assert_eq!(reliability_from_probs(&[0.25; 4], &[0, 1]), 0.5);
        let r = reliability_from_probs(&analytic_dual_processor(13.0), &[0, 1]);
        assert!(libm::fabs(r - 0.3048971794) < 1e-9);
        assert!(libm::fabs(r - 0.3053) < 1e-3);
    }

    #[test]
    fn rk4_initial_point() {
        let traj = solve_forward_kolmogorov(&dual_processor_model(), &[0.0], 0.5).unwrap();
        assert_eq!(traj.probs()[0], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rk4_matches_analytic_on_half_grid() {
        let grid = uniform_grid(0.0, 30.0, 0.5).unwrap();
        let traj = solve_forward_kolmogorov(&dual_processor_model(), &grid, DEFAULT_STEP).unwrap();
        for (t, p) in traj.times().iter().zip(traj.probs()) {
            assert_vec_close(p, &analytic_dual_processor(*t), 1e-6);
            let sum: f64 = p.iter().sum();
            assert!(libm::fabs(sum - 1.0) < 1e-9);
        }
        let (_, p3) = traj.at(6);
        assert_vec_close(p3, &AT_3, 1e-6);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let model = dual_processor_model();
        let grid = uniform_grid(0.0, 30.0, 2.0).unwrap();
        let err = |h: f64| {
            let traj = solve_forward_kolmogorov(&model, &grid, h).unwrap();
            traj.times()
                .iter()
                .zip(traj.probs())
                .flat_map(|(t, p)| {
                    let a = analytic_dual_processor(*t);
                    p.iter().zip(a).map(|(x, y)| libm::fabs(x - y)).collect::<Vec<_>>()
                })
                .fold(0.0, f64::max)
        };
        let mut prev = err(1.0);
        for h in [0.5, 0.25] {
            let e = err(h);
            assert!(prev / e >= 8.0, "error ratio {} at step {h}", prev / e);
            prev = e;
        }
    }

    #[test]
    fn rk4_absorbing_monotone() {
        let grid = uniform_grid(0.0, 30.0, 1.0).unwrap();
        let model = dual_processor_model();
        let traj = solve_forward_kolmogorov(&model, &grid, DEFAULT_STEP).unwrap();
        let r = traj.reliability(model.up_states());
        for k in 1..traj.len() {
            assert!(traj.probs()[k][2] >= traj.probs()[k - 1][2]);
            assert!(traj.probs()[k][3] >= traj.probs()[k - 1][3]);
            assert!(r[k] <= r[k - 1]);
        }
    }

    #[test]
    fn rk4_rejects_distributional_start_and_bad_grids() {
        let model =
            dual_processor_model().with_initial(InitialCondition::BernoulliBeta { alpha: 5.0, beta: 1.5, high: 0, low: 1 }).unwrap();
        assert!(solve_forward_kolmogorov(&model, &[0.0, 1.0], 0.01).is_err());
        let model = dual_processor_model();
        assert!(solve_forward_kolmogorov(&model, &[1.0, 2.0], 0.01).is_err());
        assert!(solve_forward_kolmogorov(&model, &[0.0, 0.1], 0.5).is_err());
    }

    #[test]
    fn mixture_reduces_to_pure_starts() {
        assert_vec_close(&analytic_dual_processor_mixture(4.0, 1.0), &analytic_dual_processor(4.0), 0.0);
        let from_one =
            solve_forward_kolmogorov(&dual_processor_model().with_initial(InitialCondition::Deterministic(1)).unwrap(), &[0.0, 7.0], 0.01)
                .unwrap();
        assert_vec_close(&from_one.probs()[1], &analytic_dual_processor_mixture(7.0, 0.0), 1e-9);
    }
}
