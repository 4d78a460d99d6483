//! Dense 64-bit kernels with hand-written backward passes.
//!
//! Every reduction sums left to right in index order, so results are
//! bit-identical across runs of the same build.

mod attention;
mod gradcheck;
mod lstm;
mod matrix;
mod ops;
mod optim;

pub use attention::{attention_backward, attention_step};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, LstmCache, LstmParams, LstmState, GATE_CELL, GATE_FORGET, GATE_INPUT,
    GATE_OUTPUT,
};
pub use matrix::Matrix;
pub use ops::{cross_entropy, dot, softmax_in_place, softmax_rows};
pub use optim::{clip_global_norm, init_uniform, sgd_step, ClipOutcome, DEFAULT_INIT_SCALE};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no weighted targets")]
    NoWeightedTargets,
    #[error("target id {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("attention memory is empty")]
    EmptyMemory,
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("initialization scale must be positive, got {0}")]
    BadScale(f64),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// A named trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// A collection of parameter tensors visited in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&ParamTensor>;
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Parameters for ParamTensor {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![self]
    }
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![self]
    }
}

impl Parameters for Vec<ParamTensor> {
    fn tensors(&self) -> Vec<&ParamTensor> {
        self.iter().collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.iter_mut().collect()
    }
}
