//! Tokenization, the frequency-ranked vocabulary, bucketing and batch
//! assembly for the encoder-decoder.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

pub type TokenId = u32;

pub const PAD: &str = "_PAD";
pub const GO: &str = "_GO";
pub const EOS: &str = "_EOS";
pub const UNK: &str = "_UNK";
pub const SPECIAL_TOKENS: [&str; 4] = [PAD, GO, EOS, UNK];

pub const PAD_ID: TokenId = 0;
pub const GO_ID: TokenId = 1;
pub const EOS_ID: TokenId = 2;
pub const UNK_ID: TokenId = 3;

pub const DEFAULT_VOCAB_SIZE: usize = 40_000;

/// Source/target bucket shapes used unless configured otherwise.
pub const DEFAULT_BUCKETS: [(usize, usize); 5] = [(10, 5), (20, 8), (30, 12), (40, 16), (50, 20)];

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("vocabulary size {0} is too small (minimum 5)")]
    VocabTooSmall(usize),
    #[error("token id {0} is out of range")]
    IdOutOfRange(TokenId),
    #[error("invalid vocabulary file: {0}")]
    InvalidVocabFile(String),
    #[error("invalid bucket specification: {0}")]
    InvalidBuckets(String),
    #[error("bucket pool is empty")]
    EmptyPool,
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("bucket index {0} out of range")]
    BadBucketIndex(usize),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TextError>;

fn is_detached_punct(c: char) -> bool {
    matches!(
        c,
        '।' | ',' | '.' | '!' | '?' | ';' | ':' | '"' | '\'' | '(' | ')' | '-' | '—'
    )
}

/// Splits cleaned text on whitespace and detaches punctuation marks
/// (danda and common ASCII marks) into standalone tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_detached_punct(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Token/id mapping. Ids 0..3 are always the special tokens; the rest are
/// ordered by descending frequency with ties broken by first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds one vocabulary from a token stream. `max_size` includes the
    /// four special tokens.
    pub fn build<I, S>(tokens: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 5 {
            return Err(TextError::VocabTooSmall(max_size));
        }
        // token -> (count, first position)
        let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
        for (pos, tok) in tokens.into_iter().enumerate() {
            let tok = tok.as_ref();
            if SPECIAL_TOKENS.contains(&tok) {
                continue;
            }
            match counts.get_mut(tok) {
                Some(entry) => entry.0 += 1,
                None => {
                    counts.insert(tok.to_owned(), (1, pos));
                }
            }
        }
        let mut ranked: Vec<(String, u64, usize)> = counts.into_iter().map(|(t, (c, p))| (t, c, p)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(max_size - SPECIAL_TOKENS.len());

        let id_to_token = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _, _)| t))
            .collect();
        Ok(Self::from_tokens_unchecked(id_to_token))
    }

    fn from_tokens_unchecked(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self {
            id_to_token,
            token_to_id,
        }
    }

    /// Rebuilds a vocabulary from an explicit id-ordered token list.
    pub fn from_tokens(id_to_token: Vec<String>) -> Result<Self> {
        if id_to_token.len() < SPECIAL_TOKENS.len() || id_to_token[..4].iter().zip(SPECIAL_TOKENS).any(|(a, b)| a != b)
        {
            return Err(TextError::InvalidVocabFile(
                "first four entries must be _PAD, _GO, _EOS, _UNK".into(),
            ));
        }
        let vocab = Self::from_tokens_unchecked(id_to_token);
        if vocab.token_to_id.len() != vocab.id_to_token.len() {
            return Err(TextError::InvalidVocabFile("duplicate token".into()));
        }
        if let Some(bad) = vocab
            .id_to_token
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(TextError::InvalidVocabFile(format!(
                "token {bad:?} is empty or contains whitespace"
            )));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Maps tokens to ids; anything out of vocabulary becomes `_UNK`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK_ID)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&id| self.token(id).map(str::to_owned).ok_or(TextError::IdOutOfRange(id)))
            .collect()
    }

    /// Writes one token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| TextError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        for token in &self.id_to_token {
            writeln!(w, "{token}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let io = |source| TextError::Io {
            path: path.display().to_string(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let tokens = reader.lines().collect::<std::io::Result<Vec<_>>>().map_err(io)?;
        Self::from_tokens(tokens)
    }
}

/// Ordered `(source_len, target_len)` shapes, strictly increasing in both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSpec {
    buckets: Vec<(usize, usize)>,
}

impl Default for BucketSpec {
    fn default() -> Self {
        Self {
            buckets: DEFAULT_BUCKETS.to_vec(),
        }
    }
}

impl BucketSpec {
    pub fn new(buckets: Vec<(usize, usize)>) -> Result<Self> {
        if buckets.len() != 5 {
            return Err(TextError::InvalidBuckets(format!(
                "expected 5 buckets, got {}",
                buckets.len()
            )));
        }
        if buckets.last() != Some(&(50, 20)) {
            return Err(TextError::InvalidBuckets("largest bucket must be (50, 20)".into()));
        }
        for w in buckets.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(TextError::InvalidBuckets(
                    "buckets must strictly increase in both lengths".into(),
                ));
            }
        }
        if buckets.iter().any(|&(s, t)| s == 0 || t < 2) {
            return Err(TextError::InvalidBuckets(
                "source lengths must be positive and target lengths at least 2".into(),
            ));
        }
        Ok(Self { buckets })
    }

    pub fn buckets(&self) -> &[(usize, usize)] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<(usize, usize)> {
        self.buckets.get(index).copied()
    }

    pub fn largest(&self) -> (usize, usize) {
        *self.buckets.last().expect("bucket spec is never empty")
    }

    /// Smallest bucket holding `src_len` source tokens and `tgt_len` target
    /// tokens plus `_GO`/`_EOS`. Falls back to the largest bucket with the
    /// truncation flag set.
    pub fn assign(&self, src_len: usize, tgt_len: usize) -> (usize, bool) {
        self.buckets
            .iter()
            .position(|&(s, t)| src_len <= s && tgt_len + 2 <= t)
            .map_or((self.buckets.len() - 1, true), |i| (i, false))
    }
}

/// An encoded (source, target) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Bucket-shaped ids for one training batch. Arrays are stored one column
/// per example: `encoder_ids[b]` has `source_len` entries,
/// `decoder_ids[b]` and `target_weights[b]` have `target_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub bucket_index: usize,
    pub source_len: usize,
    pub target_len: usize,
    pub encoder_ids: Vec<Vec<TokenId>>,
    pub decoder_ids: Vec<Vec<TokenId>>,
    pub target_weights: Vec<Vec<f64>>,
}

/// Right-pads `source` (truncated to `len`) with `_PAD` and reverses it,
/// so padding forms a prefix and the first source word comes last.
pub fn encoder_column(source: &[TokenId], len: usize) -> Vec<TokenId> {
    let mut col: Vec<TokenId> = source.iter().take(len).copied().collect();
    col.resize(len, PAD_ID);
    col.reverse();
    col
}

/// `[_GO, t1..tk, _EOS, _PAD..]` with the target truncated to `len - 2`.
pub fn decoder_column(target: &[TokenId], len: usize) -> Vec<TokenId> {
    let mut col = Vec::with_capacity(len);
    col.push(GO_ID);
    col.extend(target.iter().take(len.saturating_sub(2)));
    col.push(EOS_ID);
    col.resize(len, PAD_ID);
    col
}

/// Weight 1 wherever the next-step target is not `_PAD`.
pub fn target_weights(decoder: &[TokenId]) -> Vec<f64> {
    (0..decoder.len())
        .map(|j| {
            let next = decoder.get(j + 1).copied().unwrap_or(PAD_ID);
            if next == PAD_ID {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

impl Batch {
    /// Builds a batch from the given pairs in order, truncating to the
    /// bucket's shape.
    pub fn from_pairs<'a, I>(pairs: I, bucket_index: usize, spec: &BucketSpec) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EncodedPair>,
    {
        let (source_len, target_len) = spec.get(bucket_index).ok_or(TextError::BadBucketIndex(bucket_index))?;
        let mut batch = Batch {
            bucket_index,
            source_len,
            target_len,
            encoder_ids: Vec::new(),
            decoder_ids: Vec::new(),
            target_weights: Vec::new(),
        };
        for pair in pairs {
            let dec = decoder_column(&pair.target, target_len);
            batch.target_weights.push(target_weights(&dec));
            batch.decoder_ids.push(dec);
            batch.encoder_ids.push(encoder_column(&pair.source, source_len));
        }
        if batch.encoder_ids.is_empty() {
            return Err(TextError::EmptyPool);
        }
        Ok(batch)
    }

    pub fn batch_size(&self) -> usize {
        self.encoder_ids.len()
    }

    /// Re-checks every structural invariant of a batch.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TextError::InvalidBatch(m));
        let n = self.encoder_ids.len();
        if n == 0 || self.decoder_ids.len() != n || self.target_weights.len() != n {
            return fail("column counts differ or are zero".into());
        }
        if self.target_len < 2 {
            return fail("target_len below 2".into());
        }
        for b in 0..n {
            let enc = &self.encoder_ids[b];
            let dec = &self.decoder_ids[b];
            let w = &self.target_weights[b];
            if enc.len() != self.source_len || dec.len() != self.target_len || w.len() != self.target_len {
                return fail(format!("column {b} has the wrong length"));
            }
            let pads = enc.iter().take_while(|&&id| id == PAD_ID).count();
            if enc[pads..].contains(&PAD_ID) {
                return fail(format!("column {b}: encoder padding is not a prefix"));
            }
            if dec[0] != GO_ID {
                return fail(format!("column {b}: decoder does not start with _GO"));
            }
            let eos = match dec.iter().position(|&id| id == EOS_ID) {
                Some(p) => p,
                None => return fail(format!("column {b}: decoder has no _EOS")),
            };
            if dec[1..eos].iter().any(|&id| id == PAD_ID || id == GO_ID) {
                return fail(format!("column {b}: special id inside the target"));
            }
            if dec[eos + 1..].iter().any(|&id| id != PAD_ID) {
                return fail(format!("column {b}: non-pad after _EOS"));
            }
            if *w != target_weights(dec) {
                return fail(format!("column {b}: weights disagree with the decoder ids"));
            }
        }
        Ok(())
    }
}

/// Samples `batch_size` pairs uniformly (with replacement) from `pool` and
/// shapes them for `bucket_index`.
pub fn assemble_batch<R: Rng + ?Sized>(
    pool: &[EncodedPair],
    bucket_index: usize,
    spec: &BucketSpec,
    batch_size: usize,
    rng: &mut R,
) -> Result<Batch> {
    if pool.is_empty() {
        return Err(TextError::EmptyPool);
    }
    if batch_size == 0 {
        return Err(TextError::ZeroBatchSize);
    }
    let picks: Vec<&EncodedPair> = (0..batch_size).map(|_| &pool[rng.gen_range(0..pool.len())]).collect();
    Batch::from_pairs(picks, bucket_index, spec)
}
