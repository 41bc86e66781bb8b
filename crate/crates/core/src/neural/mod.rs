//! Dense-network kernel for physics-informed training.
//!
//! Networks are small multilayer perceptrons evaluated on batches of points. The
//! forward pass can carry a tangent along the time input (forward-mode dual
//! numbers), giving exact `dN/dt` through every layer including softmax. The
//! backward pass propagates adjoints of both the outputs and their time
//! derivatives, which yields exact parameter gradients of losses that penalize
//! `dN/dt` (a mixed second-order derivative).

mod optim;
mod params;
mod spec;
mod tape;

pub use optim::{learning_rate_at, Adam, AdamConfig, TrainingSchedule};
pub use params::{initialize_parameters, ParameterSet};
pub use spec::{Activation, LayerSpec, NetworkSpec};
pub use tape::{
    backward, forward, forward_batch, forward_tape, forward_with_time_derivative, parameter_gradients, Evaluation, OutputAdjoint, Tape,
};
