//! Evaluation and training protocol constants echoed at the top of every
//! report.

use serde::{Deserialize, Serialize};

use crate::metrics::BLEU_ORDER;
use crate::tensor::LrSchedule;

pub const MATCH_THRESHOLD: f64 = 0.3;
pub const BEAM_SIZE: usize = 3;
pub const WEIGHT_DECAY: f64 = 0.02;
pub const BATCH_SIZE: usize = 32;
pub const TAU_INIT: f64 = 0.07;
pub const TAU_MIN: f64 = 1e-3;
pub const SCORER_FRAMES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolHeader {
    pub match_threshold: f64,
    pub beam_size: usize,
    pub ngram_order: usize,
    pub weight_decay: f64,
    pub schedule: LrSchedule,
    pub meteor: String,
}

impl Default for ProtocolHeader {
    fn default() -> Self {
        ProtocolHeader {
            match_threshold: MATCH_THRESHOLD,
            beam_size: BEAM_SIZE,
            ngram_order: BLEU_ORDER,
            weight_decay: WEIGHT_DECAY,
            schedule: LrSchedule::default(),
            meteor: "absent".into(),
        }
    }
}

impl ProtocolHeader {
    pub fn to_kv(&self) -> String {
        let s = &self.schedule;
        format!(
            "# protocol\n\
             protocol.match_threshold = {}\n\
             protocol.beam_size = {}\n\
             protocol.ngram_order = {}\n\
             protocol.weight_decay = {}\n\
             protocol.lr_schedule = linear warmup 0 -> {:e} over {} epochs, cosine -> {:e} at epoch {}\n\
             protocol.meteor = {}\n",
            self.match_threshold,
            self.beam_size,
            self.ngram_order,
            self.weight_decay,
            s.peak_lr,
            s.warmup_epochs,
            s.final_lr,
            s.total_epochs,
            self.meteor,
        )
    }
}
