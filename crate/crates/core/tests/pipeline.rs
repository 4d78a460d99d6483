mod common;

use bansum::corpus::{self, SplitSpec};
use bansum::seq2seq::{greedy_decode, summarize_text, train_loop, Checkpoint, CheckpointError, ModelConfig};
use bansum::textproc::{tokenize, EncodedPair, Vocabulary};

fn encode(pairs: &[corpus::ArticleSummaryPair], vocab: &Vocabulary) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            source: vocab.encode(&tokenize(&p.article)),
            target: vocab.encode(&tokenize(&p.summary)),
        })
        .collect()
}

#[test]
fn library_pipeline_round_trips_through_a_checkpoint() {
    let records = common::bengali_raw_dump(50, 3);
    let pairs = corpus::filter_pairs(&records);
    assert_eq!(pairs.len(), 50);
    let split = corpus::split_dataset(&pairs, &SplitSpec::default()).unwrap();
    let tokens = split
        .train
        .iter()
        .flat_map(|p| tokenize(&p.article).into_iter().chain(tokenize(&p.summary)));
    let vocab = Vocabulary::build(tokens, 100).unwrap();
    let config = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 8,
        hidden_dim: 8,
        batch_size: 4,
        steps_per_checkpoint: 50,
        max_steps: 120,
        ..ModelConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (outcome, trainer) = train_loop(
        &encode(&split.train, &vocab),
        &encode(&split.val, &vocab),
        &config,
        Some(dir.path()),
    )
    .unwrap();
    assert_eq!(outcome.checkpoint_steps, [50, 100, 120]);

    let ckpt = Checkpoint::load(outcome.checkpoint_paths.last().unwrap()).unwrap();
    assert_eq!(ckpt.step, 120);
    assert_eq!(&ckpt.params, trainer.params());
    assert_eq!(ckpt.val_history.len(), 3);
    for pair in &encode(&split.test, &vocab) {
        assert_eq!(
            greedy_decode(&pair.source, &ckpt.params, &ckpt.config).unwrap(),
            greedy_decode(&pair.source, trainer.params(), &config).unwrap()
        );
    }
    let text = summarize_text(&split.test[0].article, &vocab, &ckpt.params, &ckpt.config).unwrap();
    assert!(text.split(' ').count() <= 18);
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let config = ModelConfig {
        vocab_size: 20,
        embed_dim: 4,
        hidden_dim: 4,
        batch_size: 2,
        steps_per_checkpoint: 5,
        max_steps: 5,
        ..ModelConfig::default()
    };
    let pairs = common::random_pairs(6, 20, 1..=8, 1..=3, 1);
    let dir = tempfile::tempdir().unwrap();
    let (outcome, _) = train_loop(&pairs, &pairs, &config, Some(dir.path())).unwrap();
    let bytes = std::fs::read(&outcome.checkpoint_paths[0]).unwrap();

    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(
        Checkpoint::from_bytes(&flipped),
        Err(CheckpointError::ChecksumMismatch)
    ));
    assert!(matches!(
        Checkpoint::from_bytes(&bytes[..bytes.len() - 20]),
        Err(CheckpointError::Truncated)
    ));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&magic), Err(CheckpointError::BadMagic)));
    assert!(!dir.path().join("checkpoint-00000005.bans.tmp").exists());
}
