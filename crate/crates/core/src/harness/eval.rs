//! Retrieval plus beam-decoded titling and captioning over one split.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{similarity_matrix, PreparedItem};
use crate::error::Result;
use crate::metrics::{evaluate_split, EvalReport, GenerationOutputs, GoldReferences, ReferenceSet};
use crate::model::{beam_search, Alwig, BeamConfig, Hypothesis, Task};
use crate::protocol::ProtocolHeader;
use crate::tensor::LrSchedule;
use crate::text::{metric_words, Lexicon, Vocabulary, BOS, CLS, PAD, SEP};

/// Tokens the decoder may never emit.
pub const DECODE_BANNED: [u32; 4] = [PAD, BOS, CLS, SEP];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedItem {
    pub video_id: String,
    pub title: String,
    /// Length-normalised log-probability of the title.
    pub title_score: f64,
    pub caption: Option<String>,
    pub caption_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub decoded: Vec<DecodedItem>,
}

/// Beam decoding settings; `max_len` counts generated tokens before EOS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeSettings {
    pub beam: usize,
    pub max_len: usize,
}

pub fn decode(model: &Alwig, item: &PreparedItem, task: Task, s: DecodeSettings) -> Result<Hypothesis> {
    let fusion = model.fusion(&item.frames, &item.tag_ids)?;
    let scorer = model.scorer(fusion, task);
    let cfg = BeamConfig::new(s.beam, s.max_len + 1).banning(&DECODE_BANNED);
    beam_search(&scorer, &cfg)
}

/// Header values as actually used by a run.
pub fn protocol_for(beam: usize, threshold: f64, weight_decay: f64, schedule: LrSchedule) -> ProtocolHeader {
    ProtocolHeader {
        match_threshold: threshold,
        beam_size: beam,
        weight_decay,
        schedule,
        ..ProtocolHeader::default()
    }
}

/// Scores retrieval over all titles and captions, decodes a title for
/// every item and a caption when every item has reference captions.
pub fn evaluate_items(
    model: &Alwig,
    vocab: &Vocabulary,
    items: &[PreparedItem],
    lexicon: &Lexicon,
    settings: DecodeSettings,
    protocol: ProtocolHeader,
) -> Result<EvalOutput> {
    let sim = similarity_matrix(model, items)?;
    let with_captions = items.iter().all(|it| !it.captions.is_empty());
    let words = |ids: &[u32]| metric_words(&vocab.detokenize(ids), lexicon);

    let decoded = items
        .par_iter()
        .map(|it| {
            let t = decode(model, it, Task::Title, settings)?;
            let c = if with_captions {
                Some(decode(model, it, Task::Caption, settings)?)
            } else {
                None
            };
            Ok((t, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let outputs = GenerationOutputs {
        titles: decoded.iter().map(|(t, _)| words(t.content())).collect(),
        captions: with_captions.then(|| {
            decoded
                .iter()
                .map(|(_, c)| words(c.as_ref().expect("decoded").content()))
                .collect()
        }),
    };
    let gold = GoldReferences {
        titles: ReferenceSet::new(items.iter().map(|it| vec![words(it.title.ids())]).collect())?,
        captions: if with_captions {
            Some(ReferenceSet::new(
                items
                    .iter()
                    .map(|it| it.captions.iter().map(|c| words(c.ids())).collect())
                    .collect(),
            )?)
        } else {
            None
        },
    };
    let report = evaluate_split(&outputs, &gold, &sim, protocol)?;
    let decoded = items
        .iter()
        .zip(decoded)
        .map(|(it, (t, c))| DecodedItem {
            video_id: it.video_id.clone(),
            title: vocab.detokenize(t.content()),
            title_score: t.score(),
            caption: c.as_ref().map(|h| vocab.detokenize(h.content())),
            caption_score: c.as_ref().map(Hypothesis::score),
        })
        .collect();
    Ok(EvalOutput { report, decoded })
}
