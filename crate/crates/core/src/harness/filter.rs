//! Score-and-threshold curation of a dataset with the two-stream scorer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{records_to_jsonl, Dataset, DatasetRecord};
use crate::error::{Error, Result};
use crate::protocol::ProtocolHeader;
use crate::scorer::{check_threshold, filter_dataset, FilterOutcome, MatchPair, TwoStreamModel};
use crate::text::Vocabulary;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub protocol: ProtocolHeader,
    pub threshold: f64,
    pub total: usize,
    pub kept: usize,
    pub removed: usize,
    pub kept_fraction: f64,
    /// Counts over twenty equal bins spanning `[-1, 1]`.
    pub histogram: Vec<usize>,
}

impl FilterSummary {
    pub fn from_outcome(out: &FilterOutcome, protocol: ProtocolHeader) -> Self {
        let kept = out.kept().len();
        FilterSummary {
            protocol,
            threshold: out.threshold,
            total: out.scored.len(),
            kept,
            removed: out.scored.len() - kept,
            kept_fraction: out.kept_fraction(),
            histogram: out.histogram(HISTOGRAM_BINS),
        }
    }

    pub fn to_kv(&self) -> String {
        let mut s = self.protocol.to_kv();
        let _ = writeln!(s, "# filter");
        let _ = writeln!(s, "filter.threshold = {}", self.threshold);
        let _ = writeln!(s, "filter.total = {}", self.total);
        let _ = writeln!(s, "filter.kept = {}", self.kept);
        let _ = writeln!(s, "filter.removed = {}", self.removed);
        let _ = writeln!(s, "filter.kept_fraction = {:.4}", self.kept_fraction);
        let width = 2.0 / HISTOGRAM_BINS as f64;
        for (i, c) in self.histogram.iter().enumerate() {
            let lo = -1.0 + i as f64 * width;
            let _ = writeln!(s, "filter.histogram[{lo:+.1},{:+.1}) = {c}", lo + width);
        }
        s
    }
}

/// Scores every record's title against its frames.
pub fn score_dataset(
    ds: &Dataset,
    vocab: &Vocabulary,
    scorer: &TwoStreamModel,
    threshold: f64,
) -> Result<FilterOutcome> {
    check_threshold(threshold)?;
    let max = scorer.config().max_text_len;
    let pairs = ds
        .records
        .iter()
        .map(|r| {
            let mut tokens = vocab.tokenize(&r.title);
            tokens.0.truncate(max);
            if tokens.is_empty() {
                return Err(Error::Input(format!("`{}` has an empty title", r.video_id)));
            }
            Ok(MatchPair {
                video_id: r.video_id.clone(),
                title: r.title.clone(),
                frames: ds.load_features(r)?,
                tokens,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    filter_dataset(&pairs, scorer, threshold)
}

/// One `{"video_id", "score", "kept"}` object per line, score to six
/// decimals.
pub fn scored_jsonl(out: &FilterOutcome) -> String {
    let mut s = String::new();
    for p in &out.scored {
        let id = serde_json::to_string(&p.video_id).expect("string serializes");
        let _ = writeln!(s, "{{\"video_id\":{id},\"score\":{:.6},\"kept\":{}}}", p.score, p.kept);
    }
    s
}

/// Writes `scored.jsonl`, `kept.jsonl`, `removed.jsonl` and the summary
/// pair. Split files hold the original records with absolute feature
/// paths so they load from anywhere.
pub fn write_filter_outputs(
    out: &FilterOutcome,
    ds: &Dataset,
    protocol: ProtocolHeader,
    dir: &Path,
) -> Result<FilterSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    let absolute = |r: &DatasetRecord| -> Result<DatasetRecord> {
        let fp = ds.feature_path(r);
        let fp = fs::canonicalize(&fp).map_err(|e| Error::io(&fp, e))?;
        Ok(DatasetRecord {
            feature_file: fp,
            ..r.clone()
        })
    };
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (r, p) in ds.records.iter().zip(&out.scored) {
        if p.kept {
            kept.push(absolute(r)?);
        } else {
            removed.push(absolute(r)?);
        }
    }
    write("scored.jsonl", scored_jsonl(out))?;
    write("kept.jsonl", records_to_jsonl(&kept))?;
    write("removed.jsonl", records_to_jsonl(&removed))?;
    let summary = FilterSummary::from_outcome(out, protocol);
    write("filter_summary.txt", summary.to_kv())?;
    write(
        "filter_summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}
