//! Two-stream video-title matching scorer and the threshold filter used to
//! curate weakly labelled pre-training data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::alwig::{init_text_tower, text_tower};
use crate::model::layers::{init_linear, linear};
use crate::model::{align_loss_from_projections, ModelConfig, VideoClipFeatures};
use crate::protocol::{SCORER_FRAMES, TAU_MIN, WEIGHT_DECAY};
use crate::tensor::{adamw_step, Graph, OptimizerState, ParamStore, Tensor, Var};
use crate::text::TokenSequence;

/// Per-frame MLP with temporal average pooling on the video side; the
/// shared text encoder on the title side; one projection per tower.
#[derive(Clone, Debug)]
pub struct TwoStreamModel {
    config: ModelConfig,
    params: ParamStore,
}

fn init_params(c: &ModelConfig, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamStore::new();
    init_linear(&mut p, &mut rng, "video.frame.up", c.d_v, c.d_h);
    init_linear(&mut p, &mut rng, "video.frame.down", c.d_h, c.d_h);
    init_linear(&mut p, &mut rng, "video.proj", c.d_h, c.d_s);
    init_text_tower(&mut p, &mut rng, c);
    init_linear(&mut p, &mut rng, "text.proj", c.d_h, c.d_s);
    p.insert("tau", Tensor::scalar(c.tau_init));
    p
}

impl TwoStreamModel {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, seed);
        Ok(TwoStreamModel { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let reference = init_params(&config, 0);
        let same = reference.len() == params.len()
            && reference
                .iter()
                .all(|(n, t)| params.get(n).is_some_and(|p| p.shape() == t.shape()));
        if !same {
            return Err(Error::Format {
                path: "checkpoint".into(),
                reason: "parameters do not match the scorer configuration".into(),
            });
        }
        Ok(TwoStreamModel { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn video_node(&self, g: &mut Graph, video: &VideoClipFeatures) -> Result<Var> {
        if video.dim() != self.config.d_v {
            return Err(Error::shape(
                "encode_video",
                &[video.len(), self.config.d_v],
                video.frames().shape(),
            ));
        }
        let frames = video.subsample(SCORER_FRAMES);
        let n = frames.len();
        let x = g.constant(frames.frames().clone());
        let h = linear(g, &self.params, "video.frame.up", x)?;
        let h = g.gelu(h);
        let h = linear(g, &self.params, "video.frame.down", h)?;
        let avg = g.constant(Tensor::full(&[1, n], 1.0 / n as f64));
        let pooled = g.matmul(avg, h)?;
        let y = linear(g, &self.params, "video.proj", pooled)?;
        g.l2_normalize_rows(y)
    }

    fn title_node(&self, g: &mut Graph, tokens: &TokenSequence) -> Result<Var> {
        let w = text_tower(g, &self.params, &self.config, tokens)?;
        let cls = w.text_cls(g)?;
        let y = linear(g, &self.params, "text.proj", cls)?;
        g.l2_normalize_rows(y)
    }

    /// Unit vector for a clip, pooled over at most eight uniformly strided
    /// frames.
    pub fn encode_video(&self, video: &VideoClipFeatures) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let v = self.video_node(&mut g, video)?;
        Ok(g.value(v).data().to_vec())
    }

    pub fn encode_title(&self, tokens: &TokenSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let t = self.title_node(&mut g, tokens)?;
        Ok(g.value(t).data().to_vec())
    }

    /// Symmetric infoNCE over an index-aligned batch of pairs.
    pub fn batch_loss(&self, g: &mut Graph, pairs: &[&MatchPair]) -> Result<Var> {
        let vs = pairs
            .iter()
            .map(|p| self.video_node(g, &p.frames))
            .collect::<Result<Vec<_>>>()?;
        let ts = pairs
            .iter()
            .map(|p| self.title_node(g, &p.tokens))
            .collect::<Result<Vec<_>>>()?;
        let v = g.concat_rows(&vs)?;
        let t = g.concat_rows(&ts)?;
        let tau = g.bind(&self.params, "tau")?;
        align_loss_from_projections(g, v, t, tau)
    }

    fn clamp_tau(&mut self) {
        if let Some(t) = self.params.get_mut("tau") {
            let v = &mut t.data_mut()[0];
            if !(*v >= TAU_MIN) {
                *v = TAU_MIN;
            }
        }
    }
}

/// Cosine of two unit vectors, clamped against rounding to `[-1, 1]`.
pub fn match_score(v: &[f64], t: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(t).map(|(a, b)| a * b).sum();
    s.clamp(-1.0, 1.0)
}

/// One video-title pair to score.
#[derive(Clone, Debug)]
pub struct MatchPair {
    pub video_id: String,
    pub title: String,
    pub frames: VideoClipFeatures,
    pub tokens: TokenSequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub video_id: String,
    pub title: String,
    pub score: f64,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub threshold: f64,
    /// One record per input, in input order.
    pub scored: Vec<ScoredPair>,
}

impl FilterOutcome {
    pub fn kept(&self) -> Vec<&ScoredPair> {
        self.scored.iter().filter(|p| p.kept).collect()
    }

    pub fn removed(&self) -> Vec<&ScoredPair> {
        self.scored.iter().filter(|p| !p.kept).collect()
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.scored.is_empty() {
            return 0.0;
        }
        self.kept().len() as f64 / self.scored.len() as f64
    }

    /// Counts over `bins` equal-width bins covering `[-1, 1]`.
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        score_histogram(self.scored.iter().map(|p| p.score), bins)
    }
}

pub fn score_histogram(scores: impl Iterator<Item = f64>, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for s in scores {
        let i = (((s + 1.0) / 2.0 * bins as f64).floor() as isize).clamp(0, bins as isize - 1);
        h[i as usize] += 1;
    }
    h
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::Argument(format!("threshold {threshold} outside [-1, 1]")));
    }
    Ok(())
}

/// Marks every score `>= threshold` as kept; only strictly lower scores
/// are removed.
pub fn apply_threshold(scores: Vec<(String, String, f64)>, threshold: f64) -> Result<FilterOutcome> {
    check_threshold(threshold)?;
    let scored = scores
        .into_iter()
        .map(|(video_id, title, score)| ScoredPair {
            video_id,
            title,
            score,
            kept: score >= threshold,
        })
        .collect();
    Ok(FilterOutcome { threshold, scored })
}

/// Scores every pair with the two-stream model and applies the threshold.
pub fn filter_dataset(pairs: &[MatchPair], model: &TwoStreamModel, threshold: f64) -> Result<FilterOutcome> {
    check_threshold(threshold)?;
    let scores = pairs
        .par_iter()
        .map(|p| {
            let v = model.encode_video(&p.frames)?;
            let t = model.encode_title(&p.tokens)?;
            Ok((p.video_id.clone(), p.title.clone(), match_score(&v, &t)))
        })
        .collect::<Result<Vec<_>>>()?;
    apply_threshold(scores, threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for ScorerTraining {
    fn default() -> Self {
        ScorerTraining {
            epochs: 20,
            batch_size: 16,
            lr: 3e-3,
            weight_decay: WEIGHT_DECAY,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedScorer {
    pub model: TwoStreamModel,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minimises in-batch infoNCE over the pairs with AdamW.
pub fn train_two_stream(pairs: &[MatchPair], config: &ModelConfig, opts: &ScorerTraining) -> Result<TrainedScorer> {
    if pairs.len() < 2 {
        return Err(Error::Training(format!(
            "contrastive training needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if opts.batch_size < 2 {
        return Err(Error::Config {
            key: "batch_size".into(),
            reason: "needs at least 2 pairs per batch".into(),
        });
    }
    let mut model = TwoStreamModel::init(config.clone(), opts.seed)?;
    let mut state = OptimizerState::new(opts.weight_decay);
    state.no_decay.insert("tau".into());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(opts.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<&MatchPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let mut g = Graph::new();
            let loss = model.batch_loss(&mut g, &batch)?;
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(Error::Numeric(format!("scorer loss {value} at epoch {epoch}")));
            }
            let grads = g.backward(loss)?.params();
            adamw_step(&mut model.params, &grads, &mut state, opts.lr)?;
            model.clamp_tau();
            total += value;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainedScorer { model, epoch_losses })
}
