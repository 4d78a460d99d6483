//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

use bansum::corpus::RawRecord;
use bansum::textproc::{EncodedPair, TokenId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: [&str; 48] = [
    "ঢাকা",
    "সরকার",
    "দেশ",
    "মানুষ",
    "বাংলাদেশ",
    "আজ",
    "নতুন",
    "বছর",
    "খবর",
    "শহর",
    "নদী",
    "বৃষ্টি",
    "মন্ত্রী",
    "নির্বাচন",
    "ভোট",
    "দল",
    "খেলা",
    "ক্রিকেট",
    "দাম",
    "বাজার",
    "চাল",
    "পুলিশ",
    "আদালত",
    "রায়",
    "শিক্ষা",
    "স্কুল",
    "ছাত্র",
    "পরীক্ষা",
    "ফল",
    "স্বাস্থ্য",
    "হাসপাতাল",
    "রোগী",
    "সড়ক",
    "দুর্ঘটনা",
    "নিহত",
    "আহত",
    "বন্যা",
    "কৃষক",
    "ধান",
    "উৎপাদন",
    "রপ্তানি",
    "ব্যাংক",
    "টাকা",
    "বিদ্যুৎ",
    "গ্যাস",
    "সংকট",
    "উদ্বোধন",
    "সেতু",
];

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> Vec<&'static str> {
    (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

/// `n` distinct valid records whose summaries lead their articles, followed
/// by records that cleaning or filtering must drop.
pub fn bengali_raw_dump(n: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while out.len() < n {
        let len = rng.gen_range(8..40);
        let article = sentence(&mut rng, len);
        let k = rng.gen_range(3..7);
        let summary = article[..k].join(" ");
        let mut text = article.join(" ");
        // a little crawl noise that cleaning strips without changing counts
        if out.len() % 7 == 0 {
            text = format!("{text} https://example.com/news/{} ।", out.len());
        }
        if out.len() % 11 == 0 {
            text = format!("Breaking {text}");
        }
        if seen.insert((text.clone(), summary.clone())) {
            out.push(RawRecord {
                source_id: Some(format!("doc-{}", out.len())),
                article_text: text,
                summary_text: summary,
            });
        }
    }
    let first = out[0].clone();
    out.push(first);
    out.push(RawRecord {
        source_id: None,
        article_text: "খুব ছোট খবর".into(),
        summary_text: "ছোট খবর আজ".into(),
    });
    out.push(RawRecord {
        source_id: None,
        article_text: "ঢাকা সরকার দেশ মানুষ আজ নতুন".into(),
        summary_text: "Latin only here".into(),
    });
    out.push(RawRecord {
        source_id: None,
        article_text: "www.example.com http://a.b/c English words only\u{7}".into(),
        summary_text: "ঢাকা সরকার দেশ".into(),
    });
    out
}

/// Random id pairs over `4..vocab` with source lengths in `src` and target
/// lengths in `tgt`.
pub fn random_pairs(
    n: usize,
    vocab: u32,
    src: std::ops::RangeInclusive<usize>,
    tgt: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<EncodedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = rng.gen_range(src.clone());
            let t = rng.gen_range(tgt.clone());
            let ids = |rng: &mut ChaCha8Rng, len| (0..len).map(|_| rng.gen_range(4..vocab)).collect::<Vec<TokenId>>();
            EncodedPair {
                source: ids(&mut rng, s),
                target: ids(&mut rng, t),
            }
        })
        .collect()
}

pub fn write_raw(records: &[RawRecord], path: &std::path::Path) {
    bansum::corpus::save_raw(records, path).unwrap();
}
