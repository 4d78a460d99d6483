//! ROUGE-1, ROUGE-L and sentence-level BLEU over token sequences, plus
//! macro-averaged corpus reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{candidates} candidates but {references} references")]
    CountMismatch { candidates: usize, references: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }

    fn from_counts(matches: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |total: usize| {
            if total == 0 {
                0.0
            } else {
                matches as f64 / total as f64
            }
        };
        Self::new(ratio(candidate_total), ratio(reference_total))
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches plus the candidate/reference n-gram totals.
fn clipped_matches<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matches = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |len: usize| (len + 1).saturating_sub(n);
    (matches, total(candidate.len()), total(reference.len()))
}

pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> ScoreTriple {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let (m, c, r) = clipped_matches(candidate, reference, n);
    ScoreTriple::from_counts(m, c, r)
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> ScoreTriple {
    ScoreTriple::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

pub const DEFAULT_BLEU_ORDER: usize = 4;

/// Sentence BLEU against one reference. The order is capped at the
/// candidate length; precisions for n ≥ 2 use add-one smoothing, unigram
/// precision is unsmoothed.
pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T], max_n: usize) -> f64 {
    assert!(max_n >= 1, "bleu needs max_n >= 1");
    if candidate.is_empty() {
        return 0.0;
    }
    let order = max_n.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=order {
        let (m, total, _) = clipped_matches(candidate, reference, n);
        let p = if n == 1 {
            m as f64 / total as f64
        } else {
            (m as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    brevity_penalty(candidate.len(), reference.len()) * (log_sum / order as f64).exp()
}

pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len >= reference_len {
        1.0
    } else if candidate_len == 0 {
        0.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleScores {
    pub rouge1: ScoreTriple,
    pub rouge_l: ScoreTriple,
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_examples: usize,
    pub rouge1: ScoreTriple,
    pub rouge_l: ScoreTriple,
    pub bleu: f64,
    pub rows: Vec<ExampleScores>,
}

pub fn score_example<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> ExampleScores {
    ExampleScores {
        rouge1: rouge_n(candidate, reference, 1),
        rouge_l: rouge_l(candidate, reference),
        bleu: bleu(candidate, reference, DEFAULT_BLEU_ORDER),
    }
}

/// Scores every (candidate, reference) pair and macro-averages the results.
pub fn evaluate_corpus<T, C, R>(candidates: &[C], references: &[R]) -> Result<EvalReport, MetricsError>
where
    T: Eq + Hash,
    C: AsRef<[T]>,
    R: AsRef<[T]>,
{
    if candidates.len() != references.len() {
        return Err(MetricsError::CountMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let rows: Vec<ExampleScores> = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| score_example(c.as_ref(), r.as_ref()))
        .collect();
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&ExampleScores) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let triple = |f: &dyn Fn(&ExampleScores) -> ScoreTriple| ScoreTriple {
        precision: mean(&|r| f(r).precision),
        recall: mean(&|r| f(r).recall),
        f1: mean(&|r| f(r).f1),
    };
    Ok(EvalReport {
        n_examples: rows.len(),
        rouge1: triple(&|r| r.rouge1),
        rouge_l: triple(&|r| r.rouge_l),
        bleu: mean(&|r| r.bleu),
        rows,
    })
}

pub const REPORT_HEADER: &str = "index\trouge1_p\trouge1_r\trouge1_f1\trougeL_p\trougeL_r\trougeL_f1\tbleu";

impl EvalReport {
    /// Tab-separated report: a header, one row per example, then a `mean`
    /// row. Floats use the shortest round-trip representation.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, label: &str, r1: &ScoreTriple, rl: &ScoreTriple, b: f64| {
            writeln!(
                out,
                "{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r1.precision, r1.recall, r1.f1, rl.precision, rl.recall, rl.f1, b
            )
            .expect("writing to a String cannot fail");
        };
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            row(&mut out, &i.to_string(), &r.rouge1, &r.rouge_l, r.bleu);
        }
        row(&mut out, "mean", &self.rouge1, &self.rouge_l, self.bleu);
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_tsv()).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn summary_line(&self) -> String {
        format!(
            "n={} rouge1_f1={:.4} rougeL_f1={:.4} bleu={:.4}",
            self.n_examples, self.rouge1.f1, self.rouge_l.f1, self.bleu
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rouge1_examples() {
        let s = rouge_n(&["a", "b", "c"], &["a", "b", "d"], 1);
        assert_abs_diff_eq!(s.precision, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.recall, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.f1, 2.0 / 3.0, epsilon = 1e-15);

        let s = rouge_n(&["a", "a", "a"], &["a", "b"], 1);
        assert_abs_diff_eq!(s.precision, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.recall, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.f1, 0.4, epsilon = 1e-15);

        let x = ["x", "y", "z"];
        assert_eq!(rouge_n(&x, &x, 3), ScoreTriple::new(1.0, 1.0));
    }

    #[test]
    fn rouge_zero_length_sides() {
        let empty: [&str; 0] = [];
        assert_eq!(rouge_n(&empty, &["a"], 1), ScoreTriple::default());
        assert_eq!(rouge_n(&["a"], &["a"], 2), ScoreTriple::default());
        assert_eq!(rouge_l(&empty, &empty), ScoreTriple::default());
    }

    #[test]
    fn rouge_l_examples() {
        let s = rouge_l(&["a", "b", "c", "d"], &["a", "c", "b", "d"]);
        assert_eq!(s, ScoreTriple::new(0.75, 0.75));
        assert_abs_diff_eq!(s.f1, 0.75, epsilon = 1e-15);
        assert_eq!(rouge_l(&["p", "q"], &["p", "q"]).f1, 1.0);
        assert_eq!(rouge_l(&["p", "q"], &["r"]), ScoreTriple::default());
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu(&["a", "b", "c"], &["a", "b", "c"], 4), 1.0);
        assert_eq!(bleu(&["a", "b"], &["c", "d"], 4), 0.0);
        let empty: [&str; 0] = [];
        assert_eq!(bleu(&empty, &["a"], 4), 0.0);
        let s = bleu(&["a", "b"], &["a", "b", "c", "d"], 4);
        assert_abs_diff_eq!(s, (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn corpus_means() {
        let cands = vec![vec!["a", "b"], vec!["c"]];
        let refs = vec![vec!["a", "b"], vec!["d"]];
        let report = evaluate_corpus(&cands, &refs).unwrap();
        assert_eq!(report.n_examples, 2);
        assert_eq!(report.rouge1.f1, 0.5);
        assert_eq!(report.bleu, 0.5);

        let single = evaluate_corpus(&cands[..1], &refs[..1]).unwrap();
        assert_eq!(single.rouge1, single.rows[0].rouge1);
        assert_eq!(single.bleu, single.rows[0].bleu);

        assert!(matches!(
            evaluate_corpus(&cands, &refs[..1]),
            Err(MetricsError::CountMismatch { .. })
        ));
    }

    #[test]
    fn report_layout() {
        let report = evaluate_corpus(&[vec![1u32, 2]], &[vec![1u32, 3]]).unwrap();
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], REPORT_HEADER);
        assert!(lines[1].starts_with("0\t0.5\t0.5\t0.5\t"));
        assert!(lines[2].starts_with("mean\t"));
        assert_eq!(lines[2].split('\t').count(), 8);
    }
}
