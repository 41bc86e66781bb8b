use alloc::vec;
use alloc::vec::Vec;

use super::params::ParameterSet;
use super::spec::{Activation, NetworkSpec};
use crate::error::{bail, Error, Result};

/// Activations recorded by a batched forward pass, for use by [`backward`].
///
/// All matrices are row-major with one row per point.
#[derive(Debug, Clone)]
pub struct Tape {
    points: usize,
    input: Vec<f64>,
    input_tangent: Option<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    pre_tangents: Vec<Vec<f64>>,
    out_tangents: Vec<Vec<f64>>,
}

impl Tape {
    pub fn points(&self) -> usize {
        self.points
    }

    /// Network output, `points × output_width`.
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("at least one layer")
    }

    /// Directional derivative of the output along the input tangent.
    pub fn output_tangent(&self) -> Option<&[f64]> {
        self.input_tangent.as_ref().map(|_| self.out_tangents.last().expect("at least one layer").as_slice())
    }

    pub fn has_tangent(&self) -> bool {
        self.input_tangent.is_some()
    }
}

/// Batched forward pass. `input` holds `points × input_width` values; with
/// `tangent`, the same-shaped direction is pushed forward alongside.
pub fn forward_tape(spec: &NetworkSpec, params: &ParameterSet, input: &[f64], tangent: Option<&[f64]>) -> Tape {
    let width = spec.input_width;
    assert!(params.matches(spec), "parameters do not match the network spec");
    assert_eq!(input.len() % width, 0, "input length is not a multiple of the input width");
    let points = input.len() / width;
    if let Some(dir) = tangent {
        assert_eq!(dir.len(), input.len(), "tangent shape differs from input");
    }
    let depth = spec.depth();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(depth);
    let mut pre_tangents = Vec::with_capacity(depth);
    let mut out_tangents: Vec<Vec<f64>> = Vec::with_capacity(depth);

    for (l, (fan_in, fan_out, act)) in spec.layers().enumerate() {
        let a: &[f64] = if l == 0 { input } else { &outputs[l - 1] };
        let a_dot: Option<&[f64]> = match (l, tangent) {
            (_, None) => None,
            (0, Some(dir)) => Some(dir),
            _ => Some(&out_tangents[l - 1]),
        };
        let w = params.weights(l);
        let b = params.bias(l);
        let mut z = vec![0.0; points * fan_out];
        for n in 0..points {
            let row = &a[n * fan_in..(n + 1) * fan_in];
            for (i, zi) in z[n * fan_out..(n + 1) * fan_out].iter_mut().enumerate() {
                *zi = b[i] + dot(&w[i * fan_in..(i + 1) * fan_in], row);
            }
        }
        let z_dot = a_dot.map(|a_dot| {
            let mut z_dot = vec![0.0; points * fan_out];
            for n in 0..points {
                let row = &a_dot[n * fan_in..(n + 1) * fan_in];
                for (i, zi) in z_dot[n * fan_out..(n + 1) * fan_out].iter_mut().enumerate() {
                    *zi = dot(&w[i * fan_in..(i + 1) * fan_in], row);
                }
            }
            z_dot
        });
        let (h, h_dot) = activate(act, z, z_dot.as_deref(), fan_out);
        outputs.push(h);
        if let (Some(zd), Some(hd)) = (z_dot, h_dot) {
            pre_tangents.push(zd);
            out_tangents.push(hd);
        }
    }
    Tape { points, input: input.to_vec(), input_tangent: tangent.map(<[f64]>::to_vec), outputs, pre_tangents, out_tangents }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Applies `act` row-wise, returning the output and (given `ż`) its tangent.
fn activate(act: Activation, mut z: Vec<f64>, z_dot: Option<&[f64]>, width: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    match act {
        Activation::Identity => {
            let h_dot = z_dot.map(<[f64]>::to_vec);
            (z, h_dot)
        }
        Activation::Tanh => {
            z.iter_mut().for_each(|v| *v = libm::tanh(*v));
            let h_dot = z_dot.map(|zd| z.iter().zip(zd).map(|(h, d)| (1.0 - h * h) * d).collect());
            (z, h_dot)
        }
        Activation::Sigmoid => {
            z.iter_mut().for_each(|v| *v = sigmoid(*v));
            let h_dot = z_dot.map(|zd| z.iter().zip(zd).map(|(h, d)| h * (1.0 - h) * d).collect());
            (z, h_dot)
        }
        Activation::Softmax => {
            for row in z.chunks_mut(width) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = libm::exp(*v - max);
                    total += *v;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            let h_dot = z_dot.map(|zd| {
                let mut out = vec![0.0; z.len()];
                for ((h, d), o) in z.chunks(width).zip(zd.chunks(width)).zip(out.chunks_mut(width)) {
                    let s = dot(h, d);
                    for k in 0..width {
                        o[k] = h[k] * (d[k] - s);
                    }
                }
                out
            });
            (z, h_dot)
        }
    }
}

/// Adjoint seeds for the network outputs and, when the tape carries a tangent,
/// for the output tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputAdjoint {
    pub outputs: Vec<f64>,
    pub time_derivatives: Option<Vec<f64>>,
}

/// Reverse pass over `tape`. Accumulates `∂L/∂θ` into `grads` (same layout as
/// [`ParameterSet::as_slice`]) and returns `∂L/∂input`, `points × input_width`.
///
/// The seeds are `∂L/∂N` and optionally `∂L/∂(dN/dt)`; the latter flows back
/// through the second derivatives of the activations.
pub fn backward(spec: &NetworkSpec, params: &ParameterSet, tape: &Tape, seed: &OutputAdjoint, grads: &mut [f64]) -> Vec<f64> {
    assert_eq!(grads.len(), params.len(), "gradient buffer has the wrong length");
    let points = tape.points;
    let out_width = spec.output_width();
    assert_eq!(seed.outputs.len(), points * out_width, "output adjoint has the wrong shape");
    let with_tangent = tape.has_tangent();
    if seed.time_derivatives.is_some() {
        assert!(with_tangent, "tangent adjoint given for a tape without tangents");
    }
    let layers: Vec<_> = spec.layers().collect();

    let mut h_bar = seed.outputs.clone();
    let mut hd_bar: Option<Vec<f64>> =
        if with_tangent { Some(seed.time_derivatives.clone().unwrap_or_else(|| vec![0.0; points * out_width])) } else { None };

    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out, act) = layers[l];
        let h = &tape.outputs[l];
        let z_dot = if with_tangent { Some(tape.pre_tangents[l].as_slice()) } else { None };
        let (z_bar, zd_bar) = activation_adjoint(act, h, z_dot, &h_bar, hd_bar.as_deref(), fan_out);

        let a: &[f64] = if l == 0 { &tape.input } else { &tape.outputs[l - 1] };
        let a_dot: Option<&[f64]> = if !with_tangent {
            None
        } else if l == 0 {
            tape.input_tangent.as_deref()
        } else {
            Some(&tape.out_tangents[l - 1])
        };

        let w = params.weights(l);
        let range = params.layer_range(l);
        let (g_w, g_b) = grads[range].split_at_mut(fan_out * fan_in);
        let mut a_bar = vec![0.0; points * fan_in];
        let mut ad_bar = zd_bar.as_ref().map(|_| vec![0.0; points * fan_in]);
        for n in 0..points {
            let a_row = &a[n * fan_in..(n + 1) * fan_in];
            let zb_row = &z_bar[n * fan_out..(n + 1) * fan_out];
            for i in 0..fan_out {
                let zb = zb_row[i];
                if zb != 0.0 {
                    axpy(zb, a_row, &mut g_w[i * fan_in..(i + 1) * fan_in]);
                    g_b[i] += zb;
                    axpy(zb, &w[i * fan_in..(i + 1) * fan_in], &mut a_bar[n * fan_in..(n + 1) * fan_in]);
                }
            }
            if let (Some(zd_bar), Some(a_dot), Some(ad_bar)) = (&zd_bar, a_dot, ad_bar.as_mut()) {
                let ad_row = &a_dot[n * fan_in..(n + 1) * fan_in];
                for i in 0..fan_out {
                    let zdb = zd_bar[n * fan_out + i];
                    if zdb != 0.0 {
                        axpy(zdb, ad_row, &mut g_w[i * fan_in..(i + 1) * fan_in]);
                        axpy(zdb, &w[i * fan_in..(i + 1) * fan_in], &mut ad_bar[n * fan_in..(n + 1) * fan_in]);
                    }
                }
            }
        }
        h_bar = a_bar;
        hd_bar = ad_bar;
    }
    h_bar
}

/// Pulls `(h̄, ḣ̄)` back through `h = σ(z)`, `ḣ = σ'(z)·ż` to `(z̄, ż̄)`.
fn activation_adjoint(
    act: Activation,
    h: &[f64],
    z_dot: Option<&[f64]>,
    h_bar: &[f64],
    hd_bar: Option<&[f64]>,
    width: usize,
) -> (Vec<f64>, Option<Vec<f64>>) {
    match (act, z_dot, hd_bar) {
        (Activation::Identity, _, hd) => (h_bar.to_vec(), hd.map(<[f64]>::to_vec)),
        (Activation::Tanh, None, _) => (h_bar.iter().zip(h).map(|(b, h)| b * (1.0 - h * h)).collect(), None),
        (Activation::Tanh, Some(zd), Some(hdb)) => {
            let mut z_bar = Vec::with_capacity(h.len());
            let mut zd_bar = Vec::with_capacity(h.len());
            for k in 0..h.len() {
                let d = 1.0 - h[k] * h[k];
                z_bar.push(h_bar[k] * d - 2.0 * h[k] * d * zd[k] * hdb[k]);
                zd_bar.push(hdb[k] * d);
            }
            (z_bar, Some(zd_bar))
        }
        (Activation::Sigmoid, None, _) => (h_bar.iter().zip(h).map(|(b, h)| b * h * (1.0 - h)).collect(), None),
        (Activation::Sigmoid, Some(zd), Some(hdb)) => {
            let mut z_bar = Vec::with_capacity(h.len());
            let mut zd_bar = Vec::with_capacity(h.len());
            for k in 0..h.len() {
                let d = h[k] * (1.0 - h[k]);
                z_bar.push(h_bar[k] * d + hdb[k] * zd[k] * d * (1.0 - 2.0 * h[k]));
                zd_bar.push(hdb[k] * d);
            }
            (z_bar, Some(zd_bar))
        }
        (Activation::Softmax, None, _) => {
            let mut z_bar = vec![0.0; h.len()];
            for ((y, yb), zb) in h.chunks(width).zip(h_bar.chunks(width)).zip(z_bar.chunks_mut(width)) {
                softmax_pullback(y, yb, zb);
            }
            (z_bar, None)
        }
        (Activation::Softmax, Some(zd), Some(hdb)) => {
            let mut z_bar = vec![0.0; h.len()];
            let mut zd_bar = vec![0.0; h.len()];
            let mut y_bar = vec![0.0; width];
            for n in 0..h.len() / width {
                let span = n * width..(n + 1) * width;
                let (y, zd, yb, ydb) = (&h[span.clone()], &zd[span.clone()], &h_bar[span.clone()], &hdb[span.clone()]);
                // ẏ = y ⊙ (ż − ⟨y, ż⟩), viewed as a function of y and ż.
                let s = dot(y, zd);
                let r = dot(y, ydb);
                for k in 0..width {
                    zd_bar[n * width + k] = y[k] * (ydb[k] - r);
                    y_bar[k] = yb[k] + ydb[k] * (zd[k] - s) - zd[k] * r;
                }
                softmax_pullback(y, &y_bar, &mut z_bar[span]);
            }
            (z_bar, Some(zd_bar))
        }
        (_, Some(_), None) => unreachable!("tangent adjoints track tangents"),
    }
}

/// `z̄ = J(y)ᵀ ȳ` with `J = diag(y) − y yᵀ`.
fn softmax_pullback(y: &[f64], y_bar: &[f64], z_bar: &mut [f64]) {
    let s = dot(y, y_bar);
    for k in 0..y.len() {
        z_bar[k] = y[k] * (y_bar[k] - s);
    }
}

/// Network output at one input point.
pub fn forward(spec: &NetworkSpec, params: &ParameterSet, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_width {
        bail!(Shape, "input has {} values, network expects {}", input.len(), spec.input_width);
    }
    if input.iter().any(|v| !v.is_finite()) {
        bail!(Domain, "non-finite network input");
    }
    Ok(forward_tape(spec, params, input, None).output().to_vec())
}

/// Network outputs at a batch of points (`points × input_width`), without a tape tangent.
pub fn forward_batch(spec: &NetworkSpec, params: &ParameterSet, inputs: &[f64]) -> Vec<f64> {
    forward_tape(spec, params, inputs, None).outputs.pop().expect("at least one layer")
}

/// Output and its exact derivative with respect to `t`, for the input `(t, aux…)`.
pub fn forward_with_time_derivative(spec: &NetworkSpec, params: &ParameterSet, t: f64, aux: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if 1 + aux.len() != spec.input_width {
        bail!(Shape, "input (t, aux) has {} values, network expects {}", 1 + aux.len(), spec.input_width);
    }
    let mut input = Vec::with_capacity(spec.input_width);
    input.push(t);
    input.extend_from_slice(aux);
    if input.iter().any(|v| !v.is_finite()) {
        bail!(Domain, "non-finite network input");
    }
    let mut direction = vec![0.0; spec.input_width];
    direction[0] = 1.0;
    let tape = forward_tape(spec, params, &input, Some(&direction));
    let dy = tape.output_tangent().expect("tangent requested").to_vec();
    Ok((tape.output().to_vec(), dy))
}

/// Outputs (and optionally time derivatives) at a batch of points, as seen by a loss.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation<'a> {
    pub points: usize,
    pub width: usize,
    pub outputs: &'a [f64],
    pub time_derivatives: Option<&'a [f64]>,
}

/// Value and parameter gradient of a scalar loss of the network's outputs at a
/// batch of inputs.
///
/// `loss` receives the outputs (and `dN/dt` when `time_derivative` is set, taking
/// input column 0 as time) and returns the loss value with its adjoint seeds.
pub fn parameter_gradients<F>(
    spec: &NetworkSpec,
    params: &ParameterSet,
    inputs: &[f64],
    time_derivative: bool,
    loss: F,
) -> Result<(f64, ParameterSet)>
where
    F: FnOnce(Evaluation<'_>) -> (f64, OutputAdjoint),
{
    let points = inputs.len() / spec.input_width;
    let direction = time_derivative.then(|| {
        let mut d = vec![0.0; inputs.len()];
        d.iter_mut().step_by(spec.input_width).for_each(|v| *v = 1.0);
        d
    });
    let tape = forward_tape(spec, params, inputs, direction.as_deref());
    let (value, seed) =
        loss(Evaluation { points, width: spec.output_width(), outputs: tape.output(), time_derivatives: tape.output_tangent() });
    if !value.is_finite() {
        return Err(Error::NonFinite { what: "loss", iteration: 0 });
    }
    let mut grads = ParameterSet::zeros(spec);
    backward(spec, params, &tape, &seed, grads.as_mut_slice());
    Ok((value, grads))
}
