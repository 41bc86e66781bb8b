use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
    /// Normalized exponential; only allowed on the output layer.
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Sigmoid => "sigmoid",
            Self::Identity => "identity",
            Self::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    pub input_width: usize,
    pub hidden: Vec<LayerSpec>,
    pub output: LayerSpec,
}

impl NetworkSpec {
    pub fn new(input_width: usize, hidden: Vec<LayerSpec>, output: LayerSpec) -> Result<Self> {
        let spec = Self { input_width, hidden, output };
        spec.validate()?;
        Ok(spec)
    }

    /// `input → [width; depth] (activation) → output`.
    pub fn mlp(input_width: usize, depth: usize, width: usize, hidden: Activation, output: LayerSpec) -> Result<Self> {
        Self::new(input_width, alloc::vec![LayerSpec::new(width, hidden); depth], output)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            bail!(Config, "input width must be at least 1");
        }
        for (k, layer) in self.hidden.iter().enumerate() {
            if layer.width == 0 {
                bail!(Config, "hidden layer {k} has width 0");
            }
            if layer.activation == Activation::Softmax {
                bail!(Config, "softmax is only allowed on the output layer (hidden layer {k})");
            }
        }
        if self.output.width == 0 {
            bail!(Config, "output width must be at least 1");
        }
        Ok(())
    }

    /// `(fan_in, fan_out, activation)` per layer, input to output.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize, Activation)> + '_ {
        let widths = core::iter::once(self.input_width).chain(self.hidden.iter().map(|l| l.width));
        widths.zip(self.hidden.iter().chain(core::iter::once(&self.output))).map(|(fan_in, l)| (fan_in, l.width, l.activation))
    }

    pub fn depth(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn output_width(&self) -> usize {
        self.output.width
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|(i, o, _)| o * i + o).sum()
    }

    pub fn widest(&self) -> usize {
        self.layers().map(|(i, o, _)| i.max(o)).max().unwrap_or(0)
    }

    /// Canonical text form, e.g. `1>50:tanh>50:tanh>4:softmax`.
    pub fn canonical(&self) -> String {
        let mut s = format!("{}", self.input_width);
        for (_, width, act) in self.layers() {
            let _ = write!(s, ">{width}:{}", act.name());
        }
        s
    }
}
