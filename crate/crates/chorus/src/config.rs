//! Run configuration: a flat key-value TOML file with a typed schema.
//!
//! Every hyperparameter of the model and trainer lives here, together with
//! the ablation switches. Unknown keys are rejected, and `key=value`
//! command-line overrides are validated against the same schema, so a run is
//! fully described by its echoed config plus the seed. Environment variables
//! are never consulted.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    // ----- data -----
    /// Cap on non-special vocabulary entries.
    pub vocab_cap: usize,
    pub max_title_len: usize,
    pub max_body_len: usize,
    pub max_comment_len: usize,

    // ----- model dimensions -----
    /// Embedding width, shared between encoder and decoder.
    pub embed_dim: usize,
    /// Hidden size per direction of the content/title BiLSTM encoders.
    pub enc_hidden: usize,
    pub enc_layers: usize,
    /// Decoder LSTM hidden size (equals 2 * enc_hidden by default).
    pub dec_hidden: usize,
    pub dec_layers: usize,
    /// Latent width of the comment posterior and topic means.
    pub latent_dim: usize,
    /// Number of reader-aware topics K.
    pub n_topics: usize,
    /// Hidden width of the BoW comment encoder MLP.
    pub vgc_hidden: usize,
    /// Hidden width of the topic classifier MLP (z -> K).
    pub classifier_hidden: usize,
    /// Hidden width of the saliency gate MLP.
    pub gate_hidden: usize,
    /// Hidden width of the article topic selector MLP (h^e -> K).
    pub selector_hidden: usize,

    // ----- loss weights -----
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,

    // ----- training -----
    pub learning_rate: f64,
    /// Elementwise gradient clamp bound applied before the Adam update.
    pub grad_clamp: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Early stop after this many epochs without dev-loss improvement.
    pub patience: usize,
    /// Fraction of the training data held out for the dev-loss plateau check.
    pub dev_fraction: f64,
    pub dropout: f64,
    pub seed: u64,

    // ----- ablation switches -----
    pub use_topic: bool,
    pub use_saliency: bool,
    /// Detach the clustering posterior q(c|z) in the alignment loss so only
    /// the article-side selector learns from it; `false` lets gradients flow
    /// both ways.
    pub ltop_detach_q: bool,
    /// Feed the attention gate from the "drop" class of the Gumbel pair
    /// instead of the "select" class.
    pub gate_class_flip: bool,

    // ----- Gumbel temperature schedule -----
    pub tau_start: f64,
    pub tau_end: f64,
    /// Fraction of total training steps over which tau anneals before
    /// holding at `tau_end`.
    pub tau_anneal_frac: f64,

    // ----- inference -----
    pub beam_size: usize,
    pub n_diverse: usize,

    // ----- metrics -----
    /// Use the length-penalized, count-clipped CIDEr-D variant.
    pub cider_d: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            vocab_cap: 30_000,
            max_title_len: 30,
            max_body_len: 600,
            max_comment_len: 50,
            embed_dim: 256,
            enc_hidden: 128,
            enc_layers: 2,
            dec_hidden: 256,
            dec_layers: 2,
            latent_dim: 64,
            n_topics: 100,
            vgc_hidden: 256,
            classifier_hidden: 64,
            gate_hidden: 128,
            selector_hidden: 128,
            lambda1: 1.0,
            lambda2: 0.5e-3,
            lambda3: 1.0,
            lambda4: 0.2,
            learning_rate: 5e-4,
            grad_clamp: 8.0,
            batch_size: 128,
            epochs: 20,
            patience: 3,
            dev_fraction: 0.1,
            dropout: 0.1,
            seed: 42,
            use_topic: true,
            use_saliency: true,
            ltop_detach_q: true,
            gate_class_flip: false,
            tau_start: 1.0,
            tau_end: 0.1,
            tau_anneal_frac: 2.0 / 3.0,
            beam_size: 5,
            n_diverse: 5,
            cider_d: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, validating each key against the schema.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for ov in overrides {
            let (key, value) = ov.split_once('=').ok_or_else(|| {
                Error::Config(format!("override `{ov}` is not of the form key=value"))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        // Round-trip through TOML so each override reuses the schema's type
        // checking and unknown keys are rejected uniformly.
        let mut doc: toml::Table = toml::Table::try_from(self.clone())
            .map_err(|e| Error::Config(e.to_string()))?;
        let existing = doc
            .get(key)
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        let parsed: toml::Value = match existing {
            toml::Value::String(_) => toml::Value::String(value.to_string()),
            _ => {
                // A bare value is not a TOML document; wrap it in one.
                let wrapped: toml::Table = format!("v = {value}")
                    .parse()
                    .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
                wrapped.into_iter().next().expect("one entry").1
            }
        };
        doc.insert(key.to_string(), parsed);
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("`{key}`: {e}")))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.vocab_cap >= 1, "vocab_cap must be >= 1")?;
        check(
            self.max_title_len >= 1 && self.max_body_len >= 1 && self.max_comment_len >= 1,
            "length caps must be >= 1",
        )?;
        check(
            self.embed_dim >= 1
                && self.enc_hidden >= 1
                && self.dec_hidden >= 1
                && self.latent_dim >= 1,
            "model widths must be >= 1",
        )?;
        check(self.enc_layers >= 1 && self.dec_layers >= 1, "layer counts must be >= 1")?;
        check(self.n_topics >= 2, "n_topics must be >= 2")?;
        check(
            self.lambda1 >= 0.0
                && self.lambda2 >= 0.0
                && self.lambda3 >= 0.0
                && self.lambda4 >= 0.0,
            "loss weights must be nonnegative",
        )?;
        check(self.learning_rate > 0.0, "learning_rate must be positive")?;
        check(self.grad_clamp > 0.0, "grad_clamp must be positive")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(
            (0.0..1.0).contains(&self.dev_fraction),
            "dev_fraction must be in [0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&self.dropout),
            "dropout must be in [0, 1)",
        )?;
        check(
            self.tau_start > 0.0 && self.tau_end > 0.0 && self.tau_end <= self.tau_start,
            "tau schedule must satisfy 0 < tau_end <= tau_start",
        )?;
        check(
            (0.0..=1.0).contains(&self.tau_anneal_frac),
            "tau_anneal_frac must be in [0, 1]",
        )?;
        check(self.beam_size >= 1, "beam_size must be >= 1")?;
        check(
            self.n_diverse >= 1 && self.n_diverse <= self.n_topics,
            "n_diverse must be in [1, n_topics]",
        )?;
        Ok(())
    }
}
