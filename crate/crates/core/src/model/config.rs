use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::TAU_INIT;

/// Model dimensions and structural switches.
///
/// The desk-scale defaults shrink the full-size reference (hidden 768,
/// shared space 512, six encoder layers) while keeping `d_s <= d_h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_v: usize,
    pub d_h: usize,
    pub d_s: usize,
    pub d_ff: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub vocab_size: usize,
    pub max_text_len: usize,
    pub max_frames: usize,
    pub max_tags: usize,
    pub tau_init: f64,
    /// Feed tag embeddings to the cross-encoder.
    pub use_tags: bool,
    /// Skip the pre-training stage in the training harness.
    pub skip_pretrain: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_v: 16,
            d_h: 32,
            d_s: 16,
            d_ff: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            vocab_size: 256,
            max_text_len: 32,
            max_frames: 16,
            max_tags: 8,
            tau_init: TAU_INIT,
            use_tags: true,
            skip_pretrain: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let nonzero = [
            ("d_v", self.d_v),
            ("d_h", self.d_h),
            ("d_s", self.d_s),
            ("d_ff", self.d_ff),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("heads", self.heads),
            ("max_text_len", self.max_text_len),
            ("max_frames", self.max_frames),
        ];
        for (key, v) in nonzero {
            if v == 0 {
                return Err(Error::Config {
                    key: key.into(),
                    reason: "must be positive".into(),
                });
            }
        }
        if self.d_s > self.d_h {
            return Err(Error::Config {
                key: "d_s".into(),
                reason: format!("d_s ({}) exceeds d_h ({})", self.d_s, self.d_h),
            });
        }
        if !self.d_h.is_multiple_of(self.heads) {
            return Err(Error::Config {
                key: "heads".into(),
                reason: format!("{} heads do not divide d_h = {}", self.heads, self.d_h),
            });
        }
        if self.vocab_size <= crate::text::EOS as usize {
            return Err(Error::Config {
                key: "vocab_size".into(),
                reason: "vocabulary must hold PAD, BOS and EOS".into(),
            });
        }
        if !(self.tau_init > 0.0) {
            return Err(Error::Config {
                key: "tau_init".into(),
                reason: "temperature must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Ablation rows: the full model, without tags, with a shallow freshly
/// initialised decoder, and without the pre-training stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    NoTag,
    NoGpt,
    NoPretrain,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_tag" => Ok(Variant::NoTag),
            "no_gpt" => Ok(Variant::NoGpt),
            "no_pretrain" => Ok(Variant::NoPretrain),
            other => Err(Error::Argument(format!(
                "unknown variant `{other}` (expected full, no_tag, no_gpt, no_pretrain)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NoTag => "no_tag",
            Variant::NoGpt => "no_gpt",
            Variant::NoPretrain => "no_pretrain",
        })
    }
}

pub fn ablate(config: &ModelConfig, variant: Variant) -> ModelConfig {
    let mut c = config.clone();
    match variant {
        Variant::Full => {}
        Variant::NoTag => c.use_tags = false,
        Variant::NoGpt => c.decoder_layers = 1,
        Variant::NoPretrain => c.skip_pretrain = true,
    }
    c
}
