use crate::corpus::clean_text;
use crate::textproc::{encoder_column, tokenize, TokenId, Vocabulary, EOS_ID, GO_ID};

use super::model::{decoder_step, encode};
use super::{ModelConfig, ModelError, ModelParams, Result};

/// Index of the largest logit; ties go to the lowest id.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding. The source picks its bucket by length alone, and the
/// output holds at most `target_len - 2` tokens of that bucket. `_GO` and
/// `_EOS` are not included.
pub fn greedy_decode(source: &[TokenId], params: &ModelParams, config: &ModelConfig) -> Result<Vec<TokenId>> {
    let (bucket, _) = config.buckets.assign(source.len(), 0);
    let (src_len, tgt_len) = config.buckets.buckets()[bucket];
    let enc = encode(&encoder_column(source, src_len), params)?;
    let max_tokens = tgt_len - 2;
    let mut state = enc.final_state.clone();
    let mut attentional = vec![0.0; params.hidden_dim()];
    let mut input = GO_ID;
    let mut out = Vec::with_capacity(max_tokens);
    while out.len() < max_tokens {
        let step = decoder_step(input, &state, &attentional, &enc.memory, params)?;
        let next = argmax(&step.logits) as TokenId;
        if next == EOS_ID {
            break;
        }
        out.push(next);
        state = step.state;
        attentional = step.attentional;
        input = next;
    }
    Ok(out)
}

/// Raw article text to summary text: clean, tokenize, truncate to the
/// largest bucket, encode, decode greedily and join with spaces.
pub fn summarize_text(raw: &str, vocab: &Vocabulary, params: &ModelParams, config: &ModelConfig) -> Result<String> {
    let mut tokens = tokenize(&clean_text(raw));
    if tokens.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    tokens.truncate(config.buckets.largest().0);
    let ids = vocab.encode(&tokens);
    let out = greedy_decode(&ids, params, config)?;
    Ok(vocab.decode(&out)?.join(" "))
}
