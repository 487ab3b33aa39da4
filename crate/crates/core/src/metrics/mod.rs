//! Generation metrics over segmented words (BLEU-4, CIDEr-D, Rouge-L) and
//! Recall@K for text-to-video and video-to-text retrieval.
//!
//! Every generation metric works on word lists produced by
//! [`crate::text::metric_words`], so hypothesis and references share one
//! segmentation. Meteor is deliberately not provided.

mod bleu;
mod cider;
mod report;
mod retrieval;
mod rouge;

pub use bleu::{bleu4, BLEU_ORDER};
pub use cider::{cider, CiderScores, CIDER_SIGMA};
pub use report::{evaluate_split, EvalReport, GenerationOutputs, GenerationScores, GoldReferences, RecallTriple};
pub use retrieval::{recall_at_k, Direction, SimilarityMatrix};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

use crate::error::{Error, Result};

/// Per-item reference word lists; every item carries at least one.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSet {
    items: Vec<Vec<Vec<String>>>,
}

impl ReferenceSet {
    pub fn new(items: Vec<Vec<Vec<String>>>) -> Result<Self> {
        if let Some(i) = items.iter().position(Vec::is_empty) {
            return Err(Error::Input(format!("item {i} has no references")));
        }
        Ok(ReferenceSet { items })
    }

    pub fn items(&self) -> &[Vec<Vec<String>>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn require_refs(refs: &[Vec<String>]) -> Result<()> {
    if refs.is_empty() {
        return Err(Error::Input("no references".into()));
    }
    Ok(())
}
