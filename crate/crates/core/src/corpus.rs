//! Corpus preparation: cleaning raw article/summary dumps, filtering them into
//! a dataset, computing dataset statistics and producing seeded splits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Minimum number of whitespace-delimited words in a retained article.
pub const MIN_ARTICLE_WORDS: usize = 5;
/// Minimum number of whitespace-delimited words in a retained summary.
pub const MIN_SUMMARY_WORDS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("split produces empty partition")]
    EmptyPartition,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// A crawled record before cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub article_text: String,
    pub summary_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
}

/// A cleaned article together with its reference summary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArticleSummaryPair {
    pub article: String,
    pub summary: String,
}

impl ArticleSummaryPair {
    pub fn new(article: impl Into<String>, summary: impl Into<String>) -> Self {
        Self {
            article: article.into(),
            summary: summary.into(),
        }
    }

    /// Checks every invariant a filtered pair must satisfy.
    pub fn is_valid(&self) -> bool {
        word_count(&self.article) >= MIN_ARTICLE_WORDS
            && word_count(&self.summary) >= MIN_SUMMARY_WORDS
            && is_clean(&self.article)
            && is_clean(&self.summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub total_pairs: usize,
    pub max_article_words: usize,
    pub min_article_words: usize,
    pub max_summary_words: usize,
    pub min_summary_words: usize,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows = [
            ("Total no of articles", self.total_pairs),
            ("Total no of summaries", self.total_pairs),
            ("Maximum no of words in an article", self.max_article_words),
            ("Maximum no of words in a summary", self.max_summary_words),
            ("Minimum no of words in an article", self.min_article_words),
            ("Minimum no of words in a summary", self.min_summary_words),
        ];
        let width = rows.iter().map(|(label, _)| label.len()).max().unwrap_or(0);
        for (label, value) in rows {
            writeln!(f, "{label:<width$}  {value:>8}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_ratio: 0.7,
            val_ratio: 0.2,
            test_ratio: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("train_ratio", self.train_ratio),
            ("val_ratio", self.val_ratio),
            ("test_ratio", self.test_ratio),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(CorpusError::InvalidSplit(format!("{name} = {r} is outside (0, 1)")));
            }
        }
        let sum = self.train_ratio + self.val_ratio + self.test_ratio;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CorpusError::InvalidSplit(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Partition sizes for `n` items: floor of each ratio for train and
    /// validation, the remainder for test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 0.7 * 10 landing
        // a hair below 7.
        let cut = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = cut(self.train_ratio).min(n);
        let val = cut(self.val_ratio).min(n - train);
        (train, val, n - train - val)
    }
}

fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
}

fn is_url_token(token: &str) -> bool {
    let lower = token.get(..8).unwrap_or(token).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Normalizes raw crawled text: NFC, URL tokens dropped, Latin letters and
/// control characters removed, whitespace collapsed and trimmed.
pub fn clean_text(raw: &str) -> String {
    let normalized: String = raw.nfc().collect();
    let mut out = String::with_capacity(normalized.len());
    for token in normalized.split_whitespace() {
        if is_url_token(token) {
            continue;
        }
        let kept: String = token
            .chars()
            .filter(|&c| !is_latin_letter(c) && !c.is_control())
            .collect();
        if kept.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&kept);
    }
    // Deleting characters can leave a sequence that composes further.
    out.nfc().collect()
}

fn is_clean(text: &str) -> bool {
    !text.is_empty()
        && text.trim() == text
        && !text.contains("  ")
        && !text
            .chars()
            .any(|c| is_latin_letter(c) || c.is_control() || (c.is_whitespace() && c != ' '))
        && !text.split(' ').any(is_url_token)
}

/// Number of whitespace-delimited words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Cleans every record, drops pairs below the word-count minima and drops
/// exact duplicates (first occurrence wins). Input order is preserved.
pub fn filter_pairs<'a, I>(records: I) -> Vec<ArticleSummaryPair>
where
    I: IntoIterator<Item = &'a RawRecord>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in records {
        let pair = ArticleSummaryPair {
            article: clean_text(&record.article_text),
            summary: clean_text(&record.summary_text),
        };
        if word_count(&pair.article) < MIN_ARTICLE_WORDS || word_count(&pair.summary) < MIN_SUMMARY_WORDS {
            continue;
        }
        if seen.insert(pair.clone()) {
            out.push(pair);
        }
    }
    out
}

pub fn dataset_stats(pairs: &[ArticleSummaryPair]) -> Result<DatasetStats> {
    let first = pairs.first().ok_or(CorpusError::EmptyDataset)?;
    let a0 = word_count(&first.article);
    let s0 = word_count(&first.summary);
    let mut stats = DatasetStats {
        total_pairs: pairs.len(),
        max_article_words: a0,
        min_article_words: a0,
        max_summary_words: s0,
        min_summary_words: s0,
    };
    for pair in &pairs[1..] {
        let a = word_count(&pair.article);
        let s = word_count(&pair.summary);
        stats.max_article_words = stats.max_article_words.max(a);
        stats.min_article_words = stats.min_article_words.min(a);
        stats.max_summary_words = stats.max_summary_words.max(s);
        stats.min_summary_words = stats.min_summary_words.min(s);
    }
    Ok(stats)
}

/// Train, validation and test partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles with a permutation seeded by `spec.seed`, then cuts the
/// shuffled sequence according to [`SplitSpec::sizes`].
pub fn split_dataset<T: Clone>(pairs: &[T], spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    if pairs.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let (n_train, n_val, n_test) = spec.sizes(pairs.len());
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(CorpusError::EmptyPartition);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let take = |range: std::ops::Range<usize>| -> Vec<T> { order[range].iter().map(|&i| pairs[i].clone()).collect() };
    Ok(Split {
        train: take(0..n_train),
        val: take(n_train..n_train + n_val),
        test: take(n_train + n_val..pairs.len()),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a line-delimited JSON file. Every non-final line must parse.
fn read_jsonl<T, F>(path: &Path, required: &[&'static str], mut on_record: F) -> Result<()>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(T),
{
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let line = std::str::from_utf8(&buf).map_err(|_| CorpusError::InvalidUtf8 { line: line_no })?;
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let object = value.as_object().ok_or_else(|| CorpusError::Malformed {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        if let Some(field) = required.iter().find(|f| !object.contains_key(**f)) {
            return Err(CorpusError::MissingField { line: line_no, field });
        }
        let record = serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        on_record(record);
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize to JSON");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Loads a dataset file: one `{"article": .., "summary": ..}` object per line.
pub fn load_dataset(path: &Path) -> Result<Vec<ArticleSummaryPair>> {
    let mut out = Vec::new();
    read_jsonl(path, &["article", "summary"], |p| out.push(p))?;
    Ok(out)
}

pub fn save_dataset(pairs: &[ArticleSummaryPair], path: &Path) -> Result<()> {
    write_jsonl(path, pairs)
}

/// Loads a raw dump: one `{"article_text", "summary_text", "source_id"?}`
/// object per line.
pub fn load_raw(path: &Path) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    read_jsonl(path, &["article_text", "summary_text"], |r| out.push(r))?;
    Ok(out)
}

pub fn save_raw(records: &[RawRecord], path: &Path) -> Result<()> {
    write_jsonl(path, records)
}
