use std::fmt::Write as _;

use crate::textproc::{BucketSpec, DEFAULT_VOCAB_SIZE};

use super::{ModelError, Result};

/// Hyperparameters of the model and its training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub buckets: BucketSpec,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub max_grad_norm: f64,
    pub steps_per_checkpoint: u64,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: DEFAULT_VOCAB_SIZE,
            embed_dim: 512,
            hidden_dim: 512,
            num_layers: 1,
            buckets: BucketSpec::default(),
            batch_size: 64,
            learning_rate: 0.5,
            lr_decay_factor: 0.99,
            max_grad_norm: 5.0,
            steps_per_checkpoint: 350,
            max_steps: 35_000,
            seed: 0,
        }
    }
}

pub(crate) const CONFIG_KEYS: [&str; 12] = [
    "vocab_size",
    "embed_dim",
    "hidden_dim",
    "num_layers",
    "buckets",
    "batch_size",
    "learning_rate",
    "lr_decay_factor",
    "max_grad_norm",
    "steps_per_checkpoint",
    "max_steps",
    "seed",
];

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(field, format!("cannot parse {value:?}")))
}

/// `10x5,20x8,...`
pub fn format_buckets(spec: &BucketSpec) -> String {
    spec.buckets()
        .iter()
        .map(|(s, t)| format!("{s}x{t}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_buckets(value: &str) -> Result<BucketSpec> {
    let buckets = value
        .split(',')
        .map(|b| {
            let (s, t) = b
                .trim()
                .split_once('x')
                .ok_or_else(|| invalid("buckets", format!("bad bucket {b:?}")))?;
            Ok((parse_num("buckets", s.trim())?, parse_num("buckets", t.trim())?))
        })
        .collect::<Result<Vec<_>>>()?;
    BucketSpec::new(buckets).map_err(|e| invalid("buckets", e.to_string()))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 5 {
            return Err(invalid("vocab_size", "must be at least 5"));
        }
        if self.embed_dim < 1 {
            return Err(invalid("embed_dim", "must be at least 1"));
        }
        if self.hidden_dim < 1 {
            return Err(invalid("hidden_dim", "must be at least 1"));
        }
        if self.num_layers != 1 {
            return Err(invalid("num_layers", "only single-layer models are supported"));
        }
        if self.batch_size < 1 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(invalid("lr_decay_factor", "must be in (0, 1]"));
        }
        if !(self.max_grad_norm > 0.0 && self.max_grad_norm.is_finite()) {
            return Err(invalid("max_grad_norm", "must be positive"));
        }
        if self.steps_per_checkpoint < 1 {
            return Err(invalid("steps_per_checkpoint", "must be at least 1"));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "vocab_size" => self.vocab_size = parse_num("vocab_size", value)?,
            "embed_dim" => self.embed_dim = parse_num("embed_dim", value)?,
            "hidden_dim" => self.hidden_dim = parse_num("hidden_dim", value)?,
            "num_layers" => self.num_layers = parse_num("num_layers", value)?,
            "buckets" => self.buckets = parse_buckets(value)?,
            "batch_size" => self.batch_size = parse_num("batch_size", value)?,
            "learning_rate" => self.learning_rate = parse_num("learning_rate", value)?,
            "lr_decay_factor" => self.lr_decay_factor = parse_num("lr_decay_factor", value)?,
            "max_grad_norm" => self.max_grad_norm = parse_num("max_grad_norm", value)?,
            "steps_per_checkpoint" => self.steps_per_checkpoint = parse_num("steps_per_checkpoint", value)?,
            "max_steps" => self.max_steps = parse_num("max_steps", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            other => return Err(ModelError::UnknownConfigKey(other.to_owned())),
        }
        Ok(())
    }

    /// `key = value` lines. Floats print in shortest round-trip form, so
    /// `from_kv_text(to_kv_text())` is exact.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("writing to a String cannot fail");
        };
        put("vocab_size", self.vocab_size.to_string());
        put("embed_dim", self.embed_dim.to_string());
        put("hidden_dim", self.hidden_dim.to_string());
        put("num_layers", self.num_layers.to_string());
        put("buckets", format_buckets(&self.buckets));
        put("batch_size", self.batch_size.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("lr_decay_factor", self.lr_decay_factor.to_string());
        put("max_grad_norm", self.max_grad_norm.to_string());
        put("steps_per_checkpoint", self.steps_per_checkpoint.to_string());
        put("max_steps", self.max_steps.to_string());
        put("seed", self.seed.to_string());
        s
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let pairs = crate::kv::parse(text).map_err(|e| invalid("config", e.to_string()))?;
        let mut config = Self::default();
        for (k, v) in &pairs {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_setup() {
        let c = ModelConfig::default();
        assert_eq!(c.vocab_size, 40_000);
        assert_eq!(c.hidden_dim, 512);
        assert_eq!(c.learning_rate, 0.5);
        assert_eq!(c.steps_per_checkpoint, 350);
        assert_eq!(c.buckets.largest(), (50, 20));
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip_is_exact() {
        let c = ModelConfig {
            learning_rate: 0.1 + 0.2,
            lr_decay_factor: 0.99,
            seed: u64::MAX,
            ..ModelConfig::default()
        };
        assert_eq!(ModelConfig::from_kv_text(&c.to_kv_text()).unwrap(), c);
    }

    #[test]
    fn validation_names_the_field() {
        let bad = ModelConfig {
            vocab_size: 4,
            ..ModelConfig::default()
        };
        match bad.validate() {
            Err(ModelError::InvalidConfig { field, .. }) => assert_eq!(field, "vocab_size"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = ModelConfig::default();
        assert!(matches!(c.set("bogus", "1"), Err(ModelError::UnknownConfigKey(_))));
        assert!(c.set("buckets", "10x5,20x8").is_err());
        c.set("buckets", "8x4, 16x6, 24x10, 32x14, 50x20").unwrap();
        assert_eq!(c.buckets.get(0), Some((8, 4)));
    }
}
