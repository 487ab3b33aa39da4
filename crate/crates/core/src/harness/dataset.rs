//! JSONL datasets: one record per line, feature paths relative to the
//! dataset file's directory.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::read_features;
use crate::error::{Error, Result};
use crate::model::VideoClipFeatures;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub video_id: String,
    pub feature_file: PathBuf,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub tags: Vec<String>,
    pub title: String,
    #[serde(default)]
    pub captions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Directory that relative feature paths resolve against.
    pub root: PathBuf,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn feature_path(&self, record: &DatasetRecord) -> PathBuf {
        self.root.join(&record.feature_file)
    }

    pub fn load_features(&self, record: &DatasetRecord) -> Result<VideoClipFeatures> {
        read_features(&self.feature_path(record))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parses JSONL text. Blank lines are skipped; `origin` only labels errors.
pub fn parse_records(text: &str, origin: &Path) -> Result<Vec<DatasetRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Record {
            path: origin.to_path_buf(),
            line: i + 1,
            reason,
        };
        let rec: DatasetRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if rec.video_id.is_empty() {
            return Err(err("empty video_id".into()));
        }
        if rec.feature_file.as_os_str().is_empty() {
            return Err(err("empty feature_file".into()));
        }
        if !seen.insert(rec.video_id.clone()) {
            return Err(err(format!("duplicate video_id `{}`", rec.video_id)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads and validates a dataset, checking that every feature file exists.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: format!("not UTF-8: {e}"),
    })?;
    let records = parse_records(&text, path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let ds = Dataset { root, records };
    for rec in &ds.records {
        let fp = ds.feature_path(rec);
        if !fp.is_file() {
            return Err(Error::Format {
                path: fp,
                reason: format!("feature file of `{}` not found", rec.video_id),
            });
        }
    }
    Ok(ds)
}

pub fn records_to_jsonl(records: &[DatasetRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}", serde_json::to_string(r).expect("record serializes"));
    }
    s
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    fs::write(path, records_to_jsonl(records)).map_err(|e| Error::io(path, e))
}
