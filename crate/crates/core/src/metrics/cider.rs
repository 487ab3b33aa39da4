use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ReferenceSet, BLEU_ORDER};
use crate::error::{Error, Result};
use crate::text::ngrams;

/// Standard deviation of the CIDEr-D length penalty.
pub const CIDER_SIGMA: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiderScores {
    pub corpus: f64,
    pub per_item: Vec<f64>,
}

type NgramVec<'a> = HashMap<&'a [String], f64>;

/// TF-IDF vectors for orders 1..=4 plus their norms.
fn tfidf<'a>(words: &'a [String], df: &[HashMap<&[String], usize>], log_items: f64) -> (Vec<NgramVec<'a>>, Vec<f64>) {
    let mut vecs = Vec::with_capacity(BLEU_ORDER);
    let mut norms = Vec::with_capacity(BLEU_ORDER);
    for n in 1..=BLEU_ORDER {
        let mut v = HashMap::new();
        let mut sq = 0.0;
        for (g, tf) in ngrams(words, n) {
            let d = df[n - 1].get(g).copied().unwrap_or(0).max(1) as f64;
            let weight = tf as f64 * (log_items - d.ln());
            sq += weight * weight;
            v.insert(g, weight);
        }
        vecs.push(v);
        norms.push(sq.sqrt());
    }
    (vecs, norms)
}

/// CIDEr-D: per n-gram order, clipped TF-IDF cosine between hypothesis and
/// each reference, damped by `exp(-(len_h - len_r)^2 / (2 sigma^2))`;
/// averaged over orders and references and scaled by 10. Document
/// frequencies come from the references of `refs`, counted once per item.
pub fn cider(hyps: &[Vec<String>], refs: &ReferenceSet) -> Result<CiderScores> {
    if refs.is_empty() {
        return Err(Error::Input("empty reference corpus".into()));
    }
    if hyps.len() != refs.len() {
        return Err(Error::Input(format!(
            "{} hypotheses for {} reference items",
            hyps.len(),
            refs.len()
        )));
    }

    let mut df: Vec<HashMap<&[String], usize>> = vec![HashMap::new(); BLEU_ORDER];
    for item in refs.items() {
        for (n, table) in df.iter_mut().enumerate() {
            let mut seen: HashMap<&[String], ()> = HashMap::new();
            for r in item {
                for g in ngrams(r, n + 1).into_keys() {
                    seen.insert(g, ());
                }
            }
            for g in seen.into_keys() {
                *table.entry(g).or_insert(0) += 1;
            }
        }
    }
    let log_items = (refs.len() as f64).ln();

    let mut per_item = Vec::with_capacity(hyps.len());
    for (hyp, item) in hyps.iter().zip(refs.items()) {
        let (hv, hn) = tfidf(hyp, &df, log_items);
        let mut total = 0.0;
        for r in item {
            let (rv, rn) = tfidf(r, &df, log_items);
            let delta = hyp.len() as f64 - r.len() as f64;
            let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
            let mut per_order = 0.0;
            for n in 0..BLEU_ORDER {
                if hn[n] == 0.0 || rn[n] == 0.0 {
                    continue;
                }
                let dot: f64 = hv[n]
                    .iter()
                    .filter_map(|(g, &h)| rv[n].get(g).map(|&r| h.min(r) * r))
                    .sum();
                per_order += dot / (hn[n] * rn[n]) * penalty;
            }
            total += per_order / BLEU_ORDER as f64;
        }
        per_item.push(10.0 * total / item.len() as f64);
    }
    let corpus = per_item.iter().sum::<f64>() / per_item.len() as f64;
    Ok(CiderScores { corpus, per_item })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_hypothesis_scores_ten() {
        let refs = ReferenceSet::new(vec![vec![w("a b c d e")], vec![w("p q r s t")]]).unwrap();
        let got = cider(&[w("a b c d e"), w("x")], &refs).unwrap();
        assert!((got.per_item[0] - 10.0).abs() < 1e-12);
        assert_eq!(got.per_item[1], 0.0);
    }

    #[test]
    fn degenerate_single_item_corpus() {
        let refs = ReferenceSet::new(vec![vec![w("a b c d e")]]).unwrap();
        assert_eq!(cider(&[w("a b c d e")], &refs).unwrap().corpus, 0.0);
    }

    #[test]
    fn errors() {
        let refs = ReferenceSet::new(vec![]).unwrap();
        assert!(cider(&[], &refs).is_err());
        let refs = ReferenceSet::new(vec![vec![w("a")]]).unwrap();
        assert!(cider(&[w("a"), w("b")], &refs).is_err());
    }
}
