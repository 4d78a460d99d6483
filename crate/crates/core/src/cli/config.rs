use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::corpus::SplitSpec;
use crate::seq2seq::{ModelConfig, CONFIG_KEYS};

/// Every setting a subcommand may read. Loaded from a flat `key = value`
/// file, then overridden by `--set key=value` flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub model: ModelConfig,
    pub split: SplitSpec,
    pub raw_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub train_path: Option<PathBuf>,
    pub val_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Specific checkpoint to summarize/evaluate with, or to resume from.
    pub checkpoint_path: Option<PathBuf>,
    pub train_log_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub input_path: Option<PathBuf>,
    pub eval_samples: usize,
    pub eval_full: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            split: SplitSpec::default(),
            raw_path: None,
            dataset_path: None,
            train_path: None,
            val_path: None,
            test_path: None,
            vocab_path: None,
            checkpoint_dir: None,
            checkpoint_path: None,
            train_log_path: None,
            report_path: None,
            input_path: None,
            eval_samples: 100,
            eval_full: false,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("invalid config: `{key}` expects true/false, got {value:?}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .ok()
        .with_context(|| format!("invalid config: cannot parse `{key}` = {value:?}"))
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "raw_path" => self.raw_path = path(),
            "dataset_path" => self.dataset_path = path(),
            "train_path" => self.train_path = path(),
            "val_path" => self.val_path = path(),
            "test_path" => self.test_path = path(),
            "vocab_path" => self.vocab_path = path(),
            "checkpoint_dir" => self.checkpoint_dir = path(),
            "checkpoint_path" => self.checkpoint_path = path(),
            "train_log_path" => self.train_log_path = path(),
            "report_path" => self.report_path = path(),
            "input_path" => self.input_path = path(),
            "train_ratio" => self.split.train_ratio = parse_num(key, value)?,
            "val_ratio" => self.split.val_ratio = parse_num(key, value)?,
            "test_ratio" => self.split.test_ratio = parse_num(key, value)?,
            "split_seed" => self.split.seed = parse_num(key, value)?,
            "eval_samples" => self.eval_samples = parse_num(key, value)?,
            "eval_full" => self.eval_full = parse_bool(key, value)?,
            k if CONFIG_KEYS.contains(&k) => self.model.set(k, value).map_err(anyhow::Error::new)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Reads the config file (if any), applies overrides and validates.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut config = Self::default();
        if let Some(file) = file {
            let text =
                std::fs::read_to_string(file).with_context(|| format!("missing config file {}", file.display()))?;
            let pairs =
                crate::kv::parse(&text).map_err(|e| anyhow::anyhow!("invalid config file {}: {e}", file.display()))?;
            for (k, v) in pairs {
                config.set(&k, &v)?;
            }
        }
        for item in overrides {
            let (k, v) = item
                .split_once('=')
                .with_context(|| format!("invalid override {item:?}: expected key=value"))?;
            config.set(k.trim(), v.trim())?;
        }
        config.model.validate().map_err(anyhow::Error::new)?;
        config
            .split
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        Ok(config)
    }

    /// A configured input path that must already exist.
    pub fn input(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let path = self.output(key, value)?;
        if !path.exists() {
            bail!("missing input file: `{key}` = {}", path.display());
        }
        Ok(path)
    }

    /// A configured path that the command will write.
    pub fn output(&self, key: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        value
            .clone()
            .with_context(|| format!("missing path: `{key}` is not configured"))
    }
}
