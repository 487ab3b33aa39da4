use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bleu4, cider, recall_at_k, rouge_l, Direction, ReferenceSet, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::protocol::ProtocolHeader;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallTriple {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl RecallTriple {
    fn compute(sim: &SimilarityMatrix, dir: Direction) -> Result<Self> {
        Ok(RecallTriple {
            r1: recall_at_k(sim, 1, dir)?,
            r5: recall_at_k(sim, 5, dir)?,
            r10: recall_at_k(sim, 10, dir)?,
        })
    }
}

/// Corpus-level generation scores; BLEU-4 and Rouge-L are item means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationScores {
    pub cider: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
}

impl GenerationScores {
    pub fn compute(hyps: &[Vec<String>], refs: &ReferenceSet) -> Result<Self> {
        if hyps.is_empty() {
            return Err(Error::Input("empty hypothesis set".into()));
        }
        if hyps.len() != refs.len() {
            return Err(Error::Input(format!(
                "{} hypotheses for {} reference items",
                hyps.len(),
                refs.len()
            )));
        }
        let n = hyps.len() as f64;
        let mut bleu = 0.0;
        let mut rouge = 0.0;
        for (h, r) in hyps.iter().zip(refs.items()) {
            bleu += bleu4(h, r)?;
            rouge += rouge_l(h, r)?;
        }
        Ok(GenerationScores {
            cider: cider(hyps, refs)?.corpus,
            bleu4: bleu / n,
            rouge_l: rouge / n,
        })
    }
}

/// Decoded, segmented outputs per video.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationOutputs {
    pub titles: Vec<Vec<String>>,
    pub captions: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldReferences {
    pub titles: ReferenceSet,
    pub captions: Option<ReferenceSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: ProtocolHeader,
    pub videos: usize,
    pub texts: usize,
    pub t2v: RecallTriple,
    pub v2t: RecallTriple,
    /// Ground-truth scores tied with other candidates; rankings then depend
    /// on index order.
    pub retrieval_ties: bool,
    pub title: GenerationScores,
    pub caption: Option<GenerationScores>,
}

/// Assembles the retrieval, titling and captioning report for one split.
pub fn evaluate_split(
    outputs: &GenerationOutputs,
    gold: &GoldReferences,
    sim: &SimilarityMatrix,
    protocol: ProtocolHeader,
) -> Result<EvalReport> {
    if outputs.titles.is_empty() {
        return Err(Error::Input("empty hypothesis set".into()));
    }
    let videos = sim.videos();
    if outputs.titles.len() != videos || gold.titles.len() != videos {
        return Err(Error::Input(format!(
            "item count mismatch: {} title outputs, {} title references, {} videos",
            outputs.titles.len(),
            gold.titles.len(),
            videos
        )));
    }
    let caption = match (&outputs.captions, &gold.captions) {
        (Some(h), Some(r)) => {
            if h.len() != videos || r.len() != videos {
                return Err(Error::Input("caption count mismatch".into()));
            }
            Some(GenerationScores::compute(h, r)?)
        }
        (None, None) => None,
        _ => return Err(Error::Input("captions present on only one side".into())),
    };
    Ok(EvalReport {
        protocol,
        videos,
        texts: sim.texts(),
        t2v: RecallTriple::compute(sim, Direction::TextToVideo)?,
        v2t: RecallTriple::compute(sim, Direction::VideoToText)?,
        retrieval_ties: sim.has_ties(),
        title: GenerationScores::compute(&outputs.titles, &gold.titles)?,
        caption,
    })
}

impl EvalReport {
    /// Key-value text at table precision: recalls and metrics to one
    /// decimal, generation metrics both raw and x100.
    pub fn to_kv(&self) -> String {
        let mut s = self.protocol.to_kv();
        let _ = writeln!(s, "# retrieval");
        let _ = writeln!(s, "videos = {}", self.videos);
        let _ = writeln!(s, "texts = {}", self.texts);
        for (name, r) in [("t2v", &self.t2v), ("v2t", &self.v2t)] {
            let _ = writeln!(s, "{name}.recall@1 = {:.1}", r.r1);
            let _ = writeln!(s, "{name}.recall@5 = {:.1}", r.r5);
            let _ = writeln!(s, "{name}.recall@10 = {:.1}", r.r10);
        }
        let _ = writeln!(s, "retrieval.degenerate_ties = {}", self.retrieval_ties);
        let mut task = |name: &str, g: &GenerationScores| {
            let _ = writeln!(s, "# {name}");
            for (metric, v) in [("cider", g.cider), ("bleu4", g.bleu4), ("rouge_l", g.rouge_l)] {
                let _ = writeln!(s, "{name}.{metric} = {v:.1}");
                let _ = writeln!(s, "{name}.{metric}_x100 = {:.1}", v * 100.0);
            }
        };
        task("title", &self.title);
        if let Some(c) = &self.caption {
            task("caption", c);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("report: {e}")))
    }
}
