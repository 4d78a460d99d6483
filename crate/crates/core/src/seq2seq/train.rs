use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::textproc::{assemble_batch, Batch, BucketSpec, EncodedPair};

use super::checkpoint::Checkpoint;
use super::model::{build_model, forward_batch, train_step};
use super::{ModelConfig, ModelError, ModelParams, Result};

/// Number of consecutive non-improving checkpoints that triggers decay.
pub const PATIENCE: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogEntry {
    pub step: u64,
    /// Learning rate in effect during the steps this entry covers.
    pub learning_rate: f64,
    /// Mean training loss since the previous entry.
    pub train_loss: f64,
    pub perplexity: f64,
    /// Validation loss per bucket; `None` for buckets without validation pairs.
    pub val_bucket_losses: Vec<Option<f64>>,
    /// Bucket losses averaged with weights equal to validation pair counts.
    pub val_loss: f64,
}

impl TrainLogEntry {
    pub const TSV_HEADER: &'static str = "step\tlearning_rate\ttrain_loss\tperplexity\tval_loss\tval_bucket_losses";

    pub fn to_tsv(&self) -> String {
        let buckets: Vec<String> = self
            .val_bucket_losses
            .iter()
            .map(|l| l.map_or_else(|| "-".to_owned(), |v| v.to_string()))
            .collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.step,
            self.learning_rate,
            self.train_loss,
            self.perplexity,
            self.val_loss,
            buckets.join(",")
        )
    }
}

/// Decays the learning rate after `PATIENCE` consecutive checkpoints whose
/// validation loss fails to beat the best seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    best: f64,
    stale: u32,
    decay: f64,
}

impl LrSchedule {
    pub fn new(decay: f64) -> Self {
        Self {
            best: f64::INFINITY,
            stale: 0,
            decay,
        }
    }

    /// Rebuilds the schedule state from a validation history.
    pub fn replay(decay: f64, history: &[f64]) -> Self {
        let mut s = Self::new(decay);
        for &v in history {
            s.observe(v, 1.0);
        }
        s
    }

    /// Records one checkpoint's validation loss and returns the learning
    /// rate to use from now on.
    pub fn observe(&mut self, val_loss: f64, lr: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
            return lr;
        }
        self.stale += 1;
        if self.stale >= PATIENCE {
            self.stale = 0;
            lr * self.decay
        } else {
            lr
        }
    }
}

/// Training pairs grouped by bucket.
#[derive(Debug, Clone)]
pub struct BucketedData {
    pools: Vec<Vec<EncodedPair>>,
}

impl BucketedData {
    pub fn new(pairs: &[EncodedPair], spec: &BucketSpec) -> Self {
        let mut pools = vec![Vec::new(); spec.len()];
        for p in pairs {
            let (b, _) = spec.assign(p.source.len(), p.target.len());
            pools[b].push(p.clone());
        }
        Self { pools }
    }

    pub fn pools(&self) -> &[Vec<EncodedPair>] {
        &self.pools
    }

    pub fn len(&self) -> usize {
        self.pools.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bucket index drawn with probability proportional to pool size.
    pub fn sample_bucket<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut pick = rng.gen_range(0..self.len());
        for (i, pool) in self.pools.iter().enumerate() {
            if pick < pool.len() {
                return i;
            }
            pick -= pool.len();
        }
        unreachable!("pick is below the total pool size")
    }
}

/// Teacher-forced validation loss per bucket and the pair-count weighted
/// mean across buckets.
pub fn validation_loss(
    val: &BucketedData,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(Vec<Option<f64>>, f64)> {
    let mut per_bucket = Vec::with_capacity(val.pools.len());
    let mut weighted = 0.0;
    let mut pairs = 0usize;
    for (b, pool) in val.pools.iter().enumerate() {
        if pool.is_empty() {
            per_bucket.push(None);
            continue;
        }
        let mut loss_sum = 0.0;
        let mut weight_sum = 0.0;
        for chunk in pool.chunks(config.batch_size) {
            let batch = Batch::from_pairs(chunk, b, &config.buckets)?;
            let fwd = forward_batch(&batch, params, config)?;
            loss_sum += fwd.loss * fwd.total_weight;
            weight_sum += fwd.total_weight;
        }
        let loss = loss_sum / weight_sum;
        per_bucket.push(Some(loss));
        weighted += loss * pool.len() as f64;
        pairs += pool.len();
    }
    Ok((per_bucket, weighted / pairs as f64))
}

/// File name of the checkpoint written at `step`.
pub fn checkpoint_file_name(step: u64) -> String {
    format!("checkpoint-{step:08}.bans")
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<TrainLogEntry>,
    /// Steps at which checkpoints were taken.
    pub checkpoint_steps: Vec<u64>,
    /// Files written, when a checkpoint directory was given.
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Owns the parameters and training state of one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: ModelConfig,
    params: ModelParams,
    step: u64,
    learning_rate: f64,
    val_history: Vec<f64>,
    schedule: LrSchedule,
}

impl Trainer {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = build_model(&config, config.seed)?;
        Ok(Self {
            learning_rate: config.learning_rate,
            schedule: LrSchedule::new(config.lr_decay_factor),
            config,
            params,
            step: 0,
            val_history: Vec::new(),
        })
    }

    /// Resumes from a checkpoint. `max_steps` may be raised to train further.
    pub fn from_checkpoint(ckpt: Checkpoint, max_steps: Option<u64>) -> Result<Self> {
        let mut config = ckpt.config;
        if let Some(m) = max_steps {
            config.max_steps = m;
        }
        config.validate()?;
        Ok(Self {
            schedule: LrSchedule::replay(config.lr_decay_factor, &ckpt.val_history),
            config,
            params: ckpt.params,
            step: ckpt.step,
            learning_rate: ckpt.learning_rate,
            val_history: ckpt.val_history,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.step,
            self.config.clone(),
            self.params.clone(),
            self.learning_rate,
            self.val_history.clone(),
        )
    }

    /// Generator for one step. Each step gets its own ChaCha stream keyed by
    /// the step number, so a resumed run draws exactly what an
    /// uninterrupted run would.
    fn step_rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(step);
        rng
    }

    /// Trains until `config.max_steps`. Checkpoints every
    /// `steps_per_checkpoint` steps and once more at `max_steps` if it is
    /// not a multiple.
    pub fn run(
        &mut self,
        train: &[EncodedPair],
        val: &[EncodedPair],
        checkpoint_dir: Option<&Path>,
    ) -> Result<TrainOutcome> {
        if train.is_empty() || val.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let train = BucketedData::new(train, &self.config.buckets);
        let val = BucketedData::new(val, &self.config.buckets);
        if let Some(dir) = checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|source| ModelError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
        let mut outcome = TrainOutcome {
            log: Vec::new(),
            checkpoint_steps: Vec::new(),
            checkpoint_paths: Vec::new(),
        };
        let mut loss_sum = 0.0;
        let mut loss_steps = 0u64;
        while self.step < self.config.max_steps {
            let step = self.step + 1;
            let mut rng = self.step_rng(step);
            let bucket = train.sample_bucket(&mut rng);
            let batch = assemble_batch(
                &train.pools[bucket],
                bucket,
                &self.config.buckets,
                self.config.batch_size,
                &mut rng,
            )?;
            loss_sum += train_step(&batch, &mut self.params, &self.config, self.learning_rate)?;
            loss_steps += 1;
            self.step = step;

            if step.is_multiple_of(self.config.steps_per_checkpoint) || step == self.config.max_steps {
                let (val_bucket_losses, val_loss) = validation_loss(&val, &self.params, &self.config)?;
                let train_loss = loss_sum / loss_steps as f64;
                outcome.log.push(TrainLogEntry {
                    step,
                    learning_rate: self.learning_rate,
                    train_loss,
                    perplexity: train_loss.exp(),
                    val_bucket_losses,
                    val_loss,
                });
                loss_sum = 0.0;
                loss_steps = 0;
                self.val_history.push(val_loss);
                self.learning_rate = self.schedule.observe(val_loss, self.learning_rate);
                if let Some(dir) = checkpoint_dir {
                    let path = dir.join(checkpoint_file_name(step));
                    self.checkpoint().save(&path)?;
                    outcome.checkpoint_paths.push(path);
                }
                outcome.checkpoint_steps.push(step);
            }
        }
        Ok(outcome)
    }
}

/// Trains a freshly initialized model. Returns the log and the trainer
/// holding the final parameters.
pub fn train_loop(
    train: &[EncodedPair],
    val: &[EncodedPair],
    config: &ModelConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(TrainOutcome, Trainer)> {
    let mut trainer = Trainer::new(config.clone())?;
    let outcome = trainer.run(train, val, checkpoint_dir)?;
    Ok((outcome, trainer))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_after_three_stale_checkpoints() {
        let mut s = LrSchedule::new(0.99);
        let mut lr = 0.5;
        lr = s.observe(2.0, lr);
        assert_eq!(lr, 0.5);
        for _ in 0..2 {
            lr = s.observe(2.5, lr);
            assert_eq!(lr, 0.5);
        }
        lr = s.observe(2.0, lr);
        assert_eq!(lr, 0.495);
        // counter resets after a decay
        lr = s.observe(3.0, lr);
        assert_eq!(lr, 0.495);
        lr = s.observe(1.0, lr);
        assert_eq!(lr, 0.495);
    }

    #[test]
    fn replay_reconstructs_schedule_state() {
        let history = [3.0, 2.0, 2.5, 2.2];
        let mut live = LrSchedule::new(0.9);
        for &v in &history {
            live.observe(v, 1.0);
        }
        assert_eq!(LrSchedule::replay(0.9, &history), live);
    }

    #[test]
    fn bucket_sampling_is_proportional() {
        let spec = BucketSpec::default();
        let mut pairs = Vec::new();
        for _ in 0..30 {
            pairs.push(EncodedPair {
                source: vec![4; 3],
                target: vec![5; 2],
            });
        }
        for _ in 0..10 {
            pairs.push(EncodedPair {
                source: vec![4; 45],
                target: vec![5; 10],
            });
        }
        let data = BucketedData::new(&pairs, &spec);
        assert_eq!(data.pools()[0].len(), 30);
        assert_eq!(data.pools()[4].len(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let hits = (0..n).filter(|_| data.sample_bucket(&mut rng) == 0).count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }

    #[test]
    fn checkpoints_at_every_interval() {
        let config = ModelConfig {
            vocab_size: 10,
            embed_dim: 2,
            hidden_dim: 3,
            batch_size: 2,
            steps_per_checkpoint: 3,
            max_steps: 7,
            ..ModelConfig::default()
        };
        let pairs = vec![
            EncodedPair {
                source: vec![4, 5],
                target: vec![6],
            },
            EncodedPair {
                source: vec![7, 8, 9],
                target: vec![5, 6],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let (outcome, trainer) = train_loop(&pairs, &pairs, &config, Some(dir.path())).unwrap();
        assert_eq!(outcome.checkpoint_steps, vec![3, 6, 7]);
        assert_eq!(outcome.log.len(), 3);
        assert_eq!(trainer.step(), 7);
        for e in &outcome.log {
            assert!((e.perplexity - e.train_loss.exp()).abs() <= 1e-12 * e.perplexity);
        }
        let mut files: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        files.sort();
        assert_eq!(
            files,
            vec![
                "checkpoint-00000003.bans",
                "checkpoint-00000006.bans",
                "checkpoint-00000007.bans"
            ]
        );
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let config = ModelConfig {
            vocab_size: 10,
            embed_dim: 2,
            hidden_dim: 3,
            ..ModelConfig::default()
        };
        assert!(matches!(
            train_loop(&[], &[], &config, None),
            Err(ModelError::EmptyDataset)
        ));
    }
}
