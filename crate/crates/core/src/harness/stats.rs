//! Annotation-length, tag-count and vocabulary-overlap statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::text::{metric_words, Lexicon};

/// Value-to-count histogram with its mean.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub histogram: BTreeMap<usize, usize>,
    pub count: usize,
    pub mean: f64,
}

impl Distribution {
    pub fn of(values: impl IntoIterator<Item = usize>) -> Self {
        let mut histogram = BTreeMap::new();
        let (mut count, mut sum) = (0usize, 0usize);
        for v in values {
            *histogram.entry(v).or_insert(0) += 1;
            count += 1;
            sum += v;
        }
        let mean = if count == 0 { 0.0 } else { sum as f64 / count as f64 };
        Distribution { histogram, count, mean }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub name: String,
    pub items: usize,
    /// Title lengths in segmented words, one per item.
    pub title_length: Distribution,
    /// Caption lengths in segmented words, one per caption.
    pub caption_length: Distribution,
    pub tag_count: Distribution,
    pub unique_words: usize,
    #[serde(skip)]
    words: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub shared_words: usize,
    /// Share of the first corpus's unique words found in the second.
    pub first_covered_pct: f64,
    /// Share of the second corpus's unique words found in the first.
    pub second_covered_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub corpora: Vec<CorpusStats>,
    pub overlap: Option<Overlap>,
}

pub fn corpus_stats(name: &str, records: &[DatasetRecord], lex: &Lexicon) -> CorpusStats {
    let mut words = BTreeSet::new();
    let mut seg = |s: &str| {
        let w = metric_words(s, lex);
        let n = w.len();
        words.extend(w);
        n
    };
    let title_length = Distribution::of(records.iter().map(|r| seg(&r.title)).collect::<Vec<_>>());
    let caption_length = Distribution::of(
        records
            .iter()
            .flat_map(|r| r.captions.iter())
            .map(|c| seg(c))
            .collect::<Vec<_>>(),
    );
    CorpusStats {
        name: name.into(),
        items: records.len(),
        title_length,
        caption_length,
        tag_count: Distribution::of(records.iter().map(|r| r.tags.len())),
        unique_words: words.len(),
        words,
    }
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Statistics for one corpus, or two plus their unique-word overlap.
pub fn stats_report(corpora: &[(&str, &[DatasetRecord])], lex: &Lexicon) -> Result<StatsReport> {
    if corpora.is_empty() || corpora.len() > 2 {
        return Err(Error::Argument(format!(
            "stats takes one or two datasets, got {}",
            corpora.len()
        )));
    }
    let stats: Vec<CorpusStats> = corpora.iter().map(|(n, r)| corpus_stats(n, r, lex)).collect();
    let overlap = match &stats[..] {
        [a, b] => {
            let shared = a.words.intersection(&b.words).count();
            Some(Overlap {
                shared_words: shared,
                first_covered_pct: pct(shared, a.unique_words),
                second_covered_pct: pct(shared, b.unique_words),
            })
        }
        _ => None,
    };
    Ok(StatsReport {
        corpora: stats,
        overlap,
    })
}

impl StatsReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for c in &self.corpora {
            let _ = writeln!(s, "# {}", c.name);
            let _ = writeln!(s, "{}.items = {}", c.name, c.items);
            for (label, d) in [
                ("title_length", &c.title_length),
                ("caption_length", &c.caption_length),
                ("tag_count", &c.tag_count),
            ] {
                let _ = writeln!(s, "{}.{label}.mean = {:.2}", c.name, d.mean);
                for (v, n) in &d.histogram {
                    let _ = writeln!(s, "{}.{label}[{v}] = {n}", c.name);
                }
            }
            let _ = writeln!(s, "{}.unique_words = {}", c.name, c.unique_words);
        }
        if let Some(o) = &self.overlap {
            let _ = writeln!(s, "# overlap");
            let _ = writeln!(s, "overlap.shared_words = {}", o.shared_words);
            let _ = writeln!(s, "overlap.first_covered_pct = {:.2}", o.first_covered_pct);
            let _ = writeln!(s, "overlap.second_covered_pct = {:.2}", o.second_covered_pct);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
