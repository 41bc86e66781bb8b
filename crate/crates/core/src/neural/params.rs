use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::spec::NetworkSpec;
use crate::error::{bail, Result};
use crate::rng::stream;

/// Weights and biases of a dense network, stored flat.
///
/// Layer `l` occupies a contiguous block: its `fan_out × fan_in` weight matrix in
/// row-major order, then its `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    shapes: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ParameterSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let shapes: Vec<(usize, usize)> = spec.layers().map(|(i, o, _)| (o, i)).collect();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for &(o, i) in &shapes {
            offsets.push(total);
            total += o * i + o;
        }
        Self { shapes, offsets, values: vec![0.0; total] }
    }

    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        let mut params = Self::zeros(spec);
        if values.len() != params.values.len() {
            bail!(Shape, "{} values for a network with {} parameters", values.len(), params.values.len());
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            bail!(Domain, "parameter {k} is not finite");
        }
        params.values = values;
        Ok(params)
    }

    /// `(fan_out, fan_in)` per layer.
    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn layer_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (o, i) = self.shapes[layer];
        &self.values[self.offsets[layer]..self.offsets[layer] + o * i]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (o, i) = self.shapes[layer];
        let start = self.offsets[layer] + o * i;
        &self.values[start..start + o]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (o, i) = self.shapes[layer];
        &mut self.values[self.offsets[layer]..self.offsets[layer] + o * i]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (o, i) = self.shapes[layer];
        let start = self.offsets[layer] + o * i;
        &mut self.values[start..start + o]
    }

    /// Block of `layer` (weights then bias) in the flat vector.
    pub fn layer_range(&self, layer: usize) -> core::ops::Range<usize> {
        let (o, i) = self.shapes[layer];
        self.offsets[layer]..self.offsets[layer] + o * i + o
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, spec: &NetworkSpec) -> bool {
        self.shapes.iter().copied().eq(spec.layers().map(|(i, o, _)| (o, i)))
    }
}

/// Glorot-uniform weights in `±sqrt(6/(fan_in + fan_out))`, zero biases.
pub fn initialize_parameters(spec: &NetworkSpec, seed: u64) -> ParameterSet {
    let mut params = ParameterSet::zeros(spec);
    let mut rng = stream(seed);
    for layer in 0..params.layer_count() {
        let (o, i) = params.shapes[layer];
        let bound = libm::sqrt(6.0 / (i + o) as f64);
        for w in params.weights_mut(layer) {
            *w = rng.random_range(-bound..bound);
        }
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, LayerSpec};

    fn pinn_spec() -> NetworkSpec {
        NetworkSpec::mlp(1, 2, 50, Activation::Tanh, LayerSpec::new(4, Activation::Softmax)).unwrap()
    }

    #[test]
    fn shapes_follow_spec() {
        let p = initialize_parameters(&pinn_spec(), 1);
        assert_eq!(p.shapes(), &[(50, 1), (50, 50), (4, 50)]);
        assert_eq!(p.bias(0).len(), 50);
        assert_eq!(p.bias(1).len(), 50);
        assert_eq!(p.bias(2).len(), 4);
        assert!(p.bias(1).iter().all(|&b| b == 0.0));
        assert!(p.matches(&pinn_spec()));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(initialize_parameters(&pinn_spec(), 8), initialize_parameters(&pinn_spec(), 8));
        assert_ne!(initialize_parameters(&pinn_spec(), 8), initialize_parameters(&pinn_spec(), 9));
    }

    #[test]
    fn glorot_bound() {
        let p = initialize_parameters(&pinn_spec(), 2);
        let bound = libm::sqrt(6.0 / 100.0);
        assert!(libm::fabs(bound - 0.2449) < 1e-4);
        assert!(p.weights(1).iter().all(|w| libm::fabs(*w) <= bound));
        // The bound is actually approached, not just respected.
        assert!(p.weights(1).iter().any(|w| libm::fabs(*w) > 0.9 * bound));
    }

    #[test]
    fn from_values_checks_length_and_finiteness() {
        let spec = pinn_spec();
        assert!(ParameterSet::from_values(&spec, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; spec.parameter_count()];
        v[7] = f64::NAN;
        assert!(ParameterSet::from_values(&spec, v).is_err());
    }
}
