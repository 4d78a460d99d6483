//! Abstractive news summarization with an attention-based LSTM
//! encoder-decoder: corpus preparation, vocabulary and bucketing, hand-written
//! numeric kernels, training with greedy decoding, and ROUGE/BLEU scoring.

pub mod cli;
pub mod corpus;
pub mod kv;
pub mod metrics;
pub mod nnkernel;
pub mod seq2seq;
pub mod textproc;
