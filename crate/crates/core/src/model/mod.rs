//! Tag-driven cross-encoder, text encoder, similarity head and soft-prompt
//! decoder.

pub(crate) mod alwig;
mod beam;
mod config;
pub(crate) mod layers;
mod types;

pub use alwig::{align_loss_from_projections, total_loss, Alwig, DecoderScorer};
pub use beam::{beam_search, greedy_decode, rank_order, BeamConfig, Hypothesis, StepScorer};
pub use config::{ablate, ModelConfig, Variant};
pub use types::{FusionEmbeddings, TagEmbeddingSequence, Task, TextEmbeddings, VideoClipFeatures};
