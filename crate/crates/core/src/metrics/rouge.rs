use super::require_refs;
use crate::error::Result;

/// Recall weight of the LCS F-measure.
pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Rouge-L: best LCS F-measure over the references.
pub fn rouge_l(hyp: &[String], refs: &[Vec<String>]) -> Result<f64> {
    require_refs(refs)?;
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok(refs
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| {
            let lcs = lcs_len(hyp, r) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let p = lcs / hyp.len() as f64;
            let rec = lcs / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max))
}
