use super::ops::{dot, softmax_in_place};
use super::{KernelError, Matrix, Result};

/// Global dot-product attention. Each row of `memory` is one encoder
/// position; only unmasked positions should be passed in.
/// Returns `(context, weights)`.
pub fn attention_step(query: &[f64], memory: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if memory.rows() == 0 {
        return Err(KernelError::EmptyMemory);
    }
    if memory.cols() != query.len() {
        return Err(KernelError::Shape(format!(
            "query of length {} against memory width {}",
            query.len(),
            memory.cols()
        )));
    }
    let mut weights: Vec<f64> = (0..memory.rows()).map(|s| dot(query, memory.row(s))).collect();
    softmax_in_place(&mut weights);
    let mut context = vec![0.0; query.len()];
    memory.matvec_t_acc(&weights, &mut context);
    Ok((context, weights))
}

/// Gradients of the context with respect to the query and each memory row.
pub fn attention_backward(query: &[f64], memory: &Matrix, weights: &[f64], dcontext: &[f64]) -> (Vec<f64>, Matrix) {
    let n = memory.rows();
    let mut dmemory = Matrix::zeros(n, memory.cols());
    // context = Σ a_s m_s
    let dweights: Vec<f64> = (0..n).map(|s| dot(dcontext, memory.row(s))).collect();
    let mean = dot(weights, &dweights);
    let dscores: Vec<f64> = weights.iter().zip(&dweights).map(|(a, da)| a * (da - mean)).collect();
    let mut dquery = vec![0.0; query.len()];
    memory.matvec_t_acc(&dscores, &mut dquery);
    for s in 0..n {
        let row = dmemory.row_mut(s);
        for ((d, c), q) in row.iter_mut().zip(dcontext).zip(query) {
            *d = weights[s] * c + dscores[s] * q;
        }
    }
    (dquery, dmemory)
}
