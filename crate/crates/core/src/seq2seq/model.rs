use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nnkernel::{
    attention_backward, attention_step, clip_global_norm, cross_entropy, init_uniform, lstm_cell_backward,
    lstm_cell_forward, sgd_step, LstmCache, LstmParams, LstmState, Matrix, ParamTensor, Parameters, DEFAULT_INIT_SCALE,
    GATE_FORGET,
};
use crate::textproc::{Batch, TokenId, PAD_ID};

use super::{ModelConfig, ModelError, Result};

/// All trainable weights. The embedding is shared by encoder and decoder
/// inputs; the decoder consumes `[embedding; previous attentional state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embedding: ParamTensor,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    /// `hidden × 2·hidden`, applied to `[context; decoder hidden]`.
    pub combine_w: ParamTensor,
    pub combine_b: ParamTensor,
    /// `vocab × hidden`.
    pub output_w: ParamTensor,
    pub output_b: ParamTensor,
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![
            &self.embedding,
            &self.encoder.w,
            &self.encoder.u,
            &self.encoder.b,
            &self.decoder.w,
            &self.decoder.u,
            &self.decoder.b,
            &self.combine_w,
            &self.combine_b,
            &self.output_w,
            &self.output_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.embedding,
            &mut self.encoder.w,
            &mut self.encoder.u,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.u,
            &mut self.decoder.b,
            &mut self.combine_w,
            &mut self.combine_b,
            &mut self.output_w,
            &mut self.output_b,
        ]
    }
}

impl ModelParams {
    /// Zero-valued parameters with the shapes implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let (v, d, h) = (config.vocab_size, config.embed_dim, config.hidden_dim);
        Self {
            embedding: ParamTensor::new("embedding", Matrix::zeros(v, d)),
            encoder: LstmParams::zeros("encoder", d, h),
            decoder: LstmParams::zeros("decoder", d + h, h),
            combine_w: ParamTensor::new("combine.w", Matrix::zeros(h, 2 * h)),
            combine_b: ParamTensor::new("combine.b", Matrix::zeros(h, 1)),
            output_w: ParamTensor::new("output.w", Matrix::zeros(v, h)),
            output_b: ParamTensor::new("output.b", Matrix::zeros(v, 1)),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.value.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.value.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    fn check_id(&self, id: TokenId) -> Result<usize> {
        let i = id as usize;
        if i < self.vocab_size() {
            Ok(i)
        } else {
            Err(ModelError::TokenOutOfRange {
                id,
                vocab_size: self.vocab_size(),
            })
        }
    }
}

/// Initializes every weight matrix uniformly in ±0.08. Draw order:
/// embedding, encoder W, encoder U, decoder W, decoder U, combine W,
/// output W. Biases start at zero except the LSTM forget gates (1.0).
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut params = ModelParams::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.hidden_dim;
    for t in [
        &mut params.embedding,
        &mut params.encoder.w,
        &mut params.encoder.u,
        &mut params.decoder.w,
        &mut params.decoder.u,
        &mut params.combine_w,
        &mut params.output_w,
    ] {
        let (r, c) = t.value.shape();
        t.value = init_uniform(r, c, DEFAULT_INIT_SCALE, &mut rng)?;
    }
    for lstm in [&mut params.encoder, &mut params.decoder] {
        let bias = lstm.b.value.as_mut_slice();
        bias[GATE_FORGET * h..(GATE_FORGET + 1) * h].fill(1.0);
    }
    Ok(params)
}

/// Encoder pass over one reversed, pad-prefixed column. `_PAD` positions
/// are skipped: they neither update the state nor enter the memory.
#[derive(Debug, Clone)]
pub(crate) struct EncoderTrace {
    ids: Vec<usize>,
    caches: Vec<LstmCache>,
    /// One row per non-pad position, in reading order.
    pub(crate) memory: Matrix,
    pub(crate) final_state: LstmState,
}

pub(crate) fn encode(column: &[TokenId], params: &ModelParams) -> Result<EncoderTrace> {
    let h = params.hidden_dim();
    let mut state = LstmState::zeros(h);
    let mut ids = Vec::new();
    let mut caches = Vec::new();
    let mut rows = Vec::new();
    for &id in column {
        if id == PAD_ID {
            continue;
        }
        let i = params.check_id(id)?;
        let (next, cache) = lstm_cell_forward(params.embedding.value.row(i), &state, &params.encoder)?;
        rows.extend_from_slice(&next.h);
        ids.push(i);
        caches.push(cache);
        state = next;
    }
    let memory = Matrix::from_vec(ids.len(), h, rows)?;
    Ok(EncoderTrace {
        ids,
        caches,
        memory,
        final_state: state,
    })
}

/// One teacher-forced or free-running decoder step.
#[derive(Debug, Clone)]
pub(crate) struct DecoderStep {
    input_id: usize,
    cell: LstmCache,
    pub(crate) state: LstmState,
    attention: Vec<f64>,
    /// `[context; hidden]`
    combined_input: Vec<f64>,
    pub(crate) attentional: Vec<f64>,
    pub(crate) logits: Vec<f64>,
}

pub(crate) fn decoder_step(
    input_id: TokenId,
    prev: &LstmState,
    prev_attentional: &[f64],
    memory: &Matrix,
    params: &ModelParams,
) -> Result<DecoderStep> {
    let h = params.hidden_dim();
    let i = params.check_id(input_id)?;
    let mut x = params.embedding.value.row(i).to_vec();
    x.extend_from_slice(prev_attentional);
    let (state, cell) = lstm_cell_forward(&x, prev, &params.decoder)?;
    let (context, attention) = if memory.rows() == 0 {
        (vec![0.0; h], Vec::new())
    } else {
        attention_step(&state.h, memory)?
    };
    let mut combined_input = context;
    combined_input.extend_from_slice(&state.h);
    let mut attentional = params.combine_b.value.as_slice().to_vec();
    params.combine_w.value.matvec_acc(&combined_input, &mut attentional);
    for v in &mut attentional {
        *v = v.tanh();
    }
    let mut logits = params.output_b.value.as_slice().to_vec();
    params.output_w.value.matvec_acc(&attentional, &mut logits);
    Ok(DecoderStep {
        input_id: i,
        cell,
        state,
        attention,
        combined_input,
        attentional,
        logits,
    })
}

#[derive(Debug, Clone)]
struct ExampleTrace {
    encoder: EncoderTrace,
    steps: Vec<DecoderStep>,
    /// First row of this example in the stacked logits.
    row_offset: usize,
}

/// Result of a teacher-forced forward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// Weighted mean cross-entropy per target token.
    pub loss: f64,
    /// Sum of target weights (the number of scored tokens).
    pub total_weight: f64,
    /// Logits of every computed decoder step, stacked example by example.
    pub logits: Matrix,
    dlogits: Matrix,
    examples: Vec<ExampleTrace>,
}

/// Teacher-forced forward pass. Decoder steps after an example's last
/// weighted position are not computed; they would carry zero weight.
pub fn forward_batch(batch: &Batch, params: &ModelParams, config: &ModelConfig) -> Result<BatchForward> {
    let (src_len, tgt_len) = config
        .buckets
        .get(batch.bucket_index)
        .ok_or_else(|| ModelError::Shape(format!("bucket {} not configured", batch.bucket_index)))?;
    if batch.source_len != src_len || batch.target_len != tgt_len {
        return Err(ModelError::Shape(format!(
            "batch shaped {}x{} for bucket {:?}",
            batch.source_len,
            batch.target_len,
            (src_len, tgt_len)
        )));
    }
    batch.validate()?;
    let h = params.hidden_dim();
    let mut examples = Vec::with_capacity(batch.batch_size());
    let mut logit_rows = Vec::new();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    for b in 0..batch.batch_size() {
        let enc = encode(&batch.encoder_ids[b], params)?;
        let dec_ids = &batch.decoder_ids[b];
        let w = &batch.target_weights[b];
        let steps_needed = w.iter().rposition(|&x| x != 0.0).map_or(0, |p| p + 1);
        let mut state = enc.final_state.clone();
        let mut attentional = vec![0.0; h];
        let mut steps = Vec::with_capacity(steps_needed);
        let row_offset = logit_rows.len();
        for t in 0..steps_needed {
            let step = decoder_step(dec_ids[t], &state, &attentional, &enc.memory, params)?;
            state = step.state.clone();
            attentional = step.attentional.clone();
            logit_rows.push(step.logits.clone());
            targets.push(dec_ids.get(t + 1).copied().unwrap_or(PAD_ID) as usize);
            weights.push(w[t]);
            steps.push(step);
        }
        examples.push(ExampleTrace {
            encoder: enc,
            steps,
            row_offset,
        });
    }
    let logits = Matrix::from_rows(&logit_rows)?;
    let (loss, dlogits) = cross_entropy(&logits, &targets, &weights)?;
    Ok(BatchForward {
        loss,
        total_weight: weights.iter().sum(),
        logits,
        dlogits,
        examples,
    })
}

/// Backpropagation through time for a forward pass, accumulating into the
/// gradient fields of `params`.
pub fn backward_batch(fwd: &BatchForward, params: &mut ModelParams) {
    let h = params.hidden_dim();
    let d = params.embed_dim();
    for ex in &fwd.examples {
        let n_mem = ex.encoder.memory.rows();
        let mut dmemory = Matrix::zeros(n_mem, h);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dattentional_carry = vec![0.0; h];
        for (t, step) in ex.steps.iter().enumerate().rev() {
            let dlogits = fwd.dlogits.row(ex.row_offset + t);
            params.output_w.grad.add_outer(dlogits, &step.attentional);
            params.output_b.grad.add_to_column(dlogits);
            let mut dattentional = dattentional_carry;
            params.output_w.value.matvec_t_acc(dlogits, &mut dattentional);
            let dpre: Vec<f64> = dattentional
                .iter()
                .zip(&step.attentional)
                .map(|(g, a)| g * (1.0 - a * a))
                .collect();
            params.combine_w.grad.add_outer(&dpre, &step.combined_input);
            params.combine_b.grad.add_to_column(&dpre);
            let mut dcombined = vec![0.0; 2 * h];
            params.combine_w.value.matvec_t_acc(&dpre, &mut dcombined);
            let (dcontext, dh_combine) = dcombined.split_at(h);

            let mut dh: Vec<f64> = dh_combine.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            if n_mem > 0 {
                let (dquery, dmem) = attention_backward(&step.state.h, &ex.encoder.memory, &step.attention, dcontext);
                for (a, b) in dh.iter_mut().zip(&dquery) {
                    *a += b;
                }
                for (a, b) in dmemory.as_mut_slice().iter_mut().zip(dmem.as_slice()) {
                    *a += b;
                }
            }
            let (dx, dh_prev, dc_prev) = lstm_cell_backward(&step.cell, &mut params.decoder, &dh, &dc_next);
            for (g, v) in params.embedding.grad.row_mut(step.input_id).iter_mut().zip(&dx[..d]) {
                *g += v;
            }
            dattentional_carry = dx[d..].to_vec();
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        // dh_next/dc_next now hold the gradient of the encoder's final state.
        let mut dh = dh_next;
        let mut dc = dc_next;
        for k in (0..n_mem).rev() {
            for (a, b) in dh.iter_mut().zip(dmemory.row(k)) {
                *a += b;
            }
            let (dx, dh_prev, dc_prev) = lstm_cell_backward(&ex.encoder.caches[k], &mut params.encoder, &dh, &dc);
            for (g, v) in params.embedding.grad.row_mut(ex.encoder.ids[k]).iter_mut().zip(&dx) {
                *g += v;
            }
            dh = dh_prev;
            dc = dc_prev;
        }
    }
}

/// Forward pass, BPTT, global-norm clipping and one SGD update. Returns the
/// loss measured before the update.
pub fn train_step(batch: &Batch, params: &mut ModelParams, config: &ModelConfig, lr: f64) -> Result<f64> {
    params.zero_grads();
    let fwd = forward_batch(batch, params, config)?;
    if !fwd.loss.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    backward_batch(&fwd, params);
    let mut tensors = params.tensors_mut();
    clip_global_norm(&mut tensors, config.max_grad_norm);
    sgd_step(&mut tensors, lr);
    Ok(fwd.loss)
}
