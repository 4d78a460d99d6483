use rand::Rng;

use super::{KernelError, Matrix, ParamTensor, Result};

pub const DEFAULT_INIT_SCALE: f64 = 0.08;

/// `rows × cols` matrix with entries drawn uniformly from `[-scale, scale]`.
pub fn init_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Result<Matrix> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(KernelError::BadScale(scale));
    }
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
    Matrix::from_vec(rows, cols, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipOutcome {
    /// Factor every gradient was multiplied by (1 when untouched).
    pub scale: f64,
    /// Global l2 norm before clipping.
    pub global_norm: f64,
}

/// Rescales all gradients together so their joint l2 norm is at most
/// `max_norm`.
pub fn clip_global_norm(tensors: &mut [&mut ParamTensor], max_norm: f64) -> ClipOutcome {
    let global_norm = tensors.iter().fold(0.0, |acc, t| acc + t.grad.sum_squares()).sqrt();
    let mut scale = 1.0;
    if global_norm > max_norm {
        scale = max_norm / global_norm;
        for t in tensors.iter_mut() {
            t.grad.scale(scale);
        }
    }
    ClipOutcome { scale, global_norm }
}

/// Plain SGD update followed by zeroing the gradients.
pub fn sgd_step(tensors: &mut [&mut ParamTensor], lr: f64) {
    for t in tensors.iter_mut() {
        let ParamTensor { value, grad, .. } = &mut **t;
        for (v, g) in value.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *v -= lr * g;
        }
        grad.fill(0.0);
    }
}
