use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Exponentially decaying learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingSchedule {
    pub initial_lr: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub iterations: u64,
    /// Decay in whole steps (`⌊iteration / decay_steps⌋`) instead of continuously.
    #[cfg_attr(feature = "serde", serde(default))]
    pub staircase: bool,
}

impl TrainingSchedule {
    pub fn new(initial_lr: f64, decay_rate: f64, decay_steps: u64, iterations: u64) -> Result<Self> {
        let s = Self { initial_lr, decay_rate, decay_steps, iterations, staircase: false };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0) || !self.initial_lr.is_finite() {
            bail!(Config, "initial learning rate must be positive, got {}", self.initial_lr);
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            bail!(Config, "decay rate must be in (0, 1], got {}", self.decay_rate);
        }
        if self.decay_steps == 0 {
            bail!(Config, "decay steps must be positive");
        }
        if self.iterations == 0 {
            bail!(Config, "iterations must be positive");
        }
        Ok(())
    }
}

/// `initial_lr · decay_rate^(iteration / decay_steps)`.
pub fn learning_rate_at(schedule: &TrainingSchedule, iteration: u64) -> f64 {
    let mut exponent = iteration as f64 / schedule.decay_steps as f64;
    if schedule.staircase {
        exponent = libm::floor(exponent);
    }
    schedule.initial_lr * libm::pow(schedule.decay_rate, exponent)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moment accumulators for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam step on `params` with gradient `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter length changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        self.step += 1;
        let c1 = 1.0 - libm::pow(beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(beta2, self.step as f64);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> TrainingSchedule {
        TrainingSchedule::new(1e-3, 0.9, 1000, 20_000).unwrap()
    }

    #[test]
    fn learning_rate_examples() {
        let s = schedule();
        assert_eq!(learning_rate_at(&s, 0), 1e-3);
        assert!(libm::fabs(learning_rate_at(&s, 1000) - 9e-4) < 1e-18);
        assert!(libm::fabs(learning_rate_at(&s, 500) - 1e-3 * libm::sqrt(0.9)) < 1e-18);
        assert!(libm::fabs(learning_rate_at(&s, 500) - 9.4868e-4) < 1e-8);
        let stairs = TrainingSchedule { staircase: true, ..s };
        assert_eq!(learning_rate_at(&stairs, 999), 1e-3);
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainingSchedule::new(0.0, 0.9, 1000, 1).is_err());
        assert!(TrainingSchedule::new(1e-3, 1.5, 1000, 1).is_err());
        assert!(TrainingSchedule::new(1e-3, 0.9, 0, 1).is_err());
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut adam = Adam::new(3, AdamConfig::default());
        let mut p = [1.0, -2.0, 0.5];
        adam.update(&mut p, &[0.0; 3], 1e-2);
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2, AdamConfig::default());
        let mut p = [0.0, 0.0];
        let g = [3.0, -0.02];
        adam.update(&mut p, &g, 1e-3);
        // m̂ = g, v̂ = g², so each coordinate moves by lr·|g|/(|g| + ε).
        for (x, gi) in p.iter().zip(g) {
            let expected = -1e-3 * gi / (libm::fabs(gi) + 1e-8);
            assert!(libm::fabs(x - expected) < 1e-15);
        }
    }

    #[test]
    fn update_is_pure_in_its_inputs() {
        let mut a = Adam::new(2, AdamConfig::default());
        let mut pa = [0.3, 0.1];
        a.update(&mut pa, &[0.2, 0.4], 1e-3);
        let (mut b, mut c) = (a.clone(), a.clone());
        let (mut pb, mut pc) = (pa, pa);
        b.update(&mut pb, &[0.5, -0.1], 1e-3);
        c.update(&mut pc, &[0.5, -0.1], 1e-3);
        assert_eq!(pb, pc);
        assert_eq!(b, c);
    }
}
