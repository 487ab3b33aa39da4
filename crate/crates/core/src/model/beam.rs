//! Length-normalised beam search over any next-token scorer.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Next-token log-probabilities after a generated prefix (BOS implied).
pub trait StepScorer {
    fn vocab_size(&self) -> usize;

    /// Longest prefix the scorer accepts; bounds the decode length.
    fn max_prefix(&self) -> usize {
        usize::MAX
    }

    fn log_probs(&self, prefix: &[u32]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam: usize,
    pub max_len: usize,
    pub eos: u32,
    /// Tokens never emitted.
    pub banned: Vec<u32>,
}

impl BeamConfig {
    pub fn new(beam: usize, max_len: usize) -> Self {
        BeamConfig {
            beam,
            max_len,
            eos: crate::text::EOS,
            banned: Vec::new(),
        }
    }

    pub fn banning(mut self, tokens: &[u32]) -> Self {
        self.banned = tokens.to_vec();
        self
    }
}

/// A decoded sequence. `tokens` includes the final EOS when `finished`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Hypothesis {
    /// Sum of log-probs over emitted length (EOS counts).
    pub fn score(&self) -> f64 {
        self.log_prob / self.tokens.len() as f64
    }

    /// Tokens without the trailing EOS.
    pub fn content(&self) -> &[u32] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

/// Higher score first; equal scores fall back to the lexicographically
/// smaller token sequence, so the lower token id wins.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score()
        .partial_cmp(&a.score())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

fn checked_log_probs<S: StepScorer>(scorer: &S, prefix: &[u32]) -> Result<Vec<f64>> {
    let lp = scorer.log_probs(prefix)?;
    if lp.len() != scorer.vocab_size() {
        return Err(Error::shape("log_probs", &[scorer.vocab_size()], &[lp.len()]));
    }
    if lp.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("NaN log-probability during decoding".into()));
    }
    Ok(lp)
}

/// Tokens allowed at step `step` (0-based): EOS is forced on the last step
/// unless it is banned.
fn step_tokens(allowed: &[u32], cfg: &BeamConfig, step: usize, max_len: usize) -> Vec<u32> {
    if step + 1 == max_len && allowed.contains(&cfg.eos) {
        vec![cfg.eos]
    } else {
        allowed.to_vec()
    }
}

/// Each step expands every live hypothesis by every allowed token and ranks
/// all candidates. EOS candidates ranked within the top `beam` are
/// finalised; the best `beam` non-EOS candidates stay live. The last of
/// `max_len` steps only offers EOS. Decoding stops early once `beam`
/// hypotheses are finished and the best of them outranks every live one.
/// Returns the best finished hypothesis, else (EOS banned) the best live
/// one.
pub fn beam_search<S: StepScorer>(scorer: &S, cfg: &BeamConfig) -> Result<Hypothesis> {
    if cfg.beam == 0 || cfg.max_len == 0 {
        return Err(Error::Argument("beam and max_len must be at least 1".into()));
    }
    let v = scorer.vocab_size();
    let max_len = cfg.max_len.min(scorer.max_prefix().saturating_add(1));
    let allowed: Vec<u32> = (0..v as u32).filter(|t| !cfg.banned.contains(t)).collect();
    if allowed.is_empty() {
        return Err(Error::Argument("every token is banned".into()));
    }
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len {
        let tokens_now = step_tokens(&allowed, cfg, step, max_len);
        let mut cands = Vec::with_capacity(live.len() * tokens_now.len());
        for h in &live {
            let lp = checked_log_probs(scorer, &h.tokens)?;
            for &t in &tokens_now {
                let mut tokens = h.tokens.clone();
                tokens.push(t);
                cands.push(Hypothesis {
                    tokens,
                    log_prob: h.log_prob + lp[t as usize],
                    finished: t == cfg.eos,
                });
            }
        }
        cands.sort_by(rank_order);
        let mut next = Vec::with_capacity(cfg.beam);
        for (rank, c) in cands.into_iter().enumerate() {
            if c.finished {
                if rank < cfg.beam {
                    finished.push(c);
                }
            } else if next.len() < cfg.beam {
                next.push(c);
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
        if finished.len() >= cfg.beam {
            let best = finished.iter().min_by(|a, b| rank_order(a, b)).expect("non-empty");
            if live.iter().all(|h| rank_order(best, h).is_lt()) {
                break;
            }
        }
    }
    let pool = if finished.is_empty() { live } else { finished };
    pool.into_iter()
        .min_by(rank_order)
        .ok_or_else(|| Error::Argument("decoding produced no hypothesis".into()))
}

/// Argmax decoding under the same step rules; ties go to the lower token
/// id.
pub fn greedy_decode<S: StepScorer>(scorer: &S, cfg: &BeamConfig) -> Result<Hypothesis> {
    if cfg.max_len == 0 {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    let max_len = cfg.max_len.min(scorer.max_prefix().saturating_add(1));
    let mut h = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        finished: false,
    };
    let allowed: Vec<u32> = (0..scorer.vocab_size() as u32)
        .filter(|t| !cfg.banned.contains(t))
        .collect();
    for step in 0..max_len {
        let lp = checked_log_probs(scorer, &h.tokens)?;
        let mut best: Option<u32> = None;
        for t in step_tokens(&allowed, cfg, step, max_len) {
            if best.is_none_or(|b| lp[t as usize] > lp[b as usize]) {
                best = Some(t);
            }
        }
        let t = best.ok_or_else(|| Error::Argument("every token is banned".into()))?;
        h.tokens.push(t);
        h.log_prob += lp[t as usize];
        if t == cfg.eos {
            h.finished = true;
            break;
        }
    }
    Ok(h)
}
