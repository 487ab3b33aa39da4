use std::collections::HashMap;

use super::require_refs;
use crate::error::Result;
use crate::text::ngrams;

/// Four continuous words form a 4-gram; BLEU uses orders 1 through 4.
pub const BLEU_ORDER: usize = 4;

/// Single-segment BLEU-4 with multi-reference clipping and the
/// closest-reference brevity penalty (ties go to the shorter reference).
///
/// No smoothing: any order without a clipped match yields 0. An empty
/// hypothesis scores 0.
pub fn bleu4(hyp: &[String], refs: &[Vec<String>]) -> Result<f64> {
    require_refs(refs)?;
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_ORDER {
        let hyp_counts = ngrams(hyp, n);
        let total: usize = hyp_counts.values().sum();
        if total == 0 {
            return Ok(0.0);
        }
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngrams(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let c = hyp.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("refs non-empty");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(bp * (log_sum / BLEU_ORDER as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn perfect_and_disjoint() {
        assert_eq!(bleu4(&w("a b c d e"), &[w("x y"), w("a b c d e")]).unwrap(), 1.0);
        assert_eq!(bleu4(&w("p q r s"), &[w("a b c d")]).unwrap(), 0.0);
        assert_eq!(bleu4(&[], &[w("a b c d")]).unwrap(), 0.0);
        assert!(bleu4(&w("a"), &[]).is_err());
    }

    #[test]
    fn hand_evaluated_precisions() {
        // p1..p4 = 4/5, 3/4, 2/3, 1/2 and BP = 1
        let got = bleu4(&w("a b c d e"), &[w("a b c d f")]).unwrap();
        let want = (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert!((got - want).abs() < 1e-15);
        assert!((want - 0.668_740_304_976_422).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_picks_closest_shorter_on_tie() {
        // c = 4; refs of length 3 and 5 are equally close, 3 wins -> BP = 1
        let hyp = w("a b c d");
        let refs = [w("a b c d e"), w("a b c")];
        let with_tie = bleu4(&hyp, &refs).unwrap();
        assert_eq!(with_tie, 1.0);
        let longer_only = bleu4(&hyp, &[w("a b c d e")]).unwrap();
        assert!((longer_only - (1.0 - 5.0 / 4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn clipping_against_max_over_references() {
        let hyp = w("a a a a");
        let got = bleu4(&hyp, &[w("a a b c"), w("a b a a")]).unwrap();
        // unigram clip 3/4, bigram "a a" clip 1/3 -> trigram "a a a" unmatched
        assert_eq!(got, 0.0);
    }
}
