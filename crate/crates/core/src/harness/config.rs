//! TOML run configuration. Every key has a default; unknown keys are
//! rejected by name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::protocol::{BEAM_SIZE, MATCH_THRESHOLD, WEIGHT_DECAY};
use crate::scorer::ScorerTraining;
use crate::tensor::LrSchedule;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Labelled split for fine-tuning (titles and captions).
    pub train: Option<PathBuf>,
    /// Title-only split for pre-training; falls back to `train`.
    pub pretrain: Option<PathBuf>,
    /// Split used to pick the best fine-tuning epoch by text-to-video R@1.
    pub valid: Option<PathBuf>,
    /// Word list for metric segmentation.
    pub lexicon: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub variant: Variant,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            variant: Variant::Full,
            batch_size: 8,
            pretrain_epochs: 30,
            finetune_epochs: 30,
            weight_decay: WEIGHT_DECAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub beam: usize,
    /// Generated tokens before EOS is forced; capped by `model.max_text_len`.
    pub max_decode_len: usize,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            beam: BEAM_SIZE,
            max_decode_len: 32,
            threshold: MATCH_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub schedule: LrSchedule,
    pub eval: EvalConfig,
    /// Two-stream filter scorer; `epochs = 0` skips it.
    pub scorer: ScorerTraining,
}

/// Pulls the offending key out of a serde message such as
/// ``unknown field `foo`, expected one of ...``.
fn key_of(message: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(start) = message.find(marker) {
            let rest = &message[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<document>".into()
}

/// Parses TOML into `T`, turning serde failures into key-naming errors.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        Error::Config {
            key: key_of(&msg),
            reason: e.to_string().trim().to_string(),
        }
    })
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_toml(&text)
}

impl RunConfig {
    /// Loads a config and resolves relative data paths against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = load_toml(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.train.batch_size == 0 {
            return bad("train.batch_size", "must be positive");
        }
        if !(self.train.weight_decay >= 0.0) {
            return bad("train.weight_decay", "must be non-negative");
        }
        if self.eval.beam == 0 {
            return bad("eval.beam", "must be positive");
        }
        if self.eval.max_decode_len == 0 {
            return bad("eval.max_decode_len", "must be positive");
        }
        if !(-1.0..=1.0).contains(&self.eval.threshold) {
            return bad("eval.threshold", "must lie in [-1, 1]");
        }
        self.schedule.validate().map_err(|e| Error::Config {
            key: "schedule".into(),
            reason: e.to_string(),
        })
    }
}

impl DataConfig {
    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.train, &mut self.pretrain, &mut self.valid, &mut self.lexicon]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
