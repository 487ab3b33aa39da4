//! Two-stage training: titles-only pre-training, then fine-tuning on
//! titles and captions, both minimising alignment plus generation loss.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::dataset::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{recall_at_k, Direction, SimilarityMatrix};
use crate::model::{ablate, total_loss, Alwig, ModelConfig, Task, VideoClipFeatures};
use crate::scorer::{train_two_stream, MatchPair, ScorerTraining, TwoStreamModel};
use crate::tensor::{adamw_step, load_checkpoint, save_checkpoint, Graph, OptimizerState, Var};
use crate::text::{TokenSequence, Vocabulary};

/// A dataset record resolved against a vocabulary and model limits.
#[derive(Clone, Debug)]
pub struct PreparedItem {
    pub video_id: String,
    pub frames: VideoClipFeatures,
    pub tag_ids: Vec<u32>,
    pub title: TokenSequence,
    pub captions: Vec<TokenSequence>,
}

impl PreparedItem {
    /// Title first, then captions.
    pub fn texts(&self) -> impl Iterator<Item = (&TokenSequence, Task)> {
        std::iter::once((&self.title, Task::Title)).chain(self.captions.iter().map(|c| (c, Task::Caption)))
    }
}

fn clipped(vocab: &Vocabulary, text: &str, max_len: usize) -> TokenSequence {
    let mut t = vocab.tokenize(text);
    t.0.truncate(max_len);
    t
}

/// Tokenizes texts (truncated to `max_text_len`), maps tags (truncated to
/// `max_tags`) and loads frames (strided down to `max_frames`).
pub fn prepare_items(ds: &Dataset, vocab: &Vocabulary, c: &ModelConfig) -> Result<Vec<PreparedItem>> {
    ds.records
        .par_iter()
        .map(|r| {
            let frames = ds.load_features(r)?;
            if frames.dim() != c.d_v {
                return Err(Error::Format {
                    path: ds.feature_path(r),
                    reason: format!("feature dim {} but the model expects {}", frames.dim(), c.d_v),
                });
            }
            let title = clipped(vocab, &r.title, c.max_text_len);
            if title.is_empty() {
                return Err(Error::Input(format!("`{}` has an empty title", r.video_id)));
            }
            Ok(PreparedItem {
                video_id: r.video_id.clone(),
                frames: frames.subsample(c.max_frames),
                tag_ids: r.tags.iter().take(c.max_tags).map(|t| vocab.tag_id(t)).collect(),
                title,
                captions: r
                    .captions
                    .iter()
                    .map(|s| clipped(vocab, s, c.max_text_len))
                    .filter(|t| !t.is_empty())
                    .collect(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Pretrain,
    Finetune,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Pretrain => "pretrain",
            Stage::Finetune => "finetune",
        })
    }
}

/// Epoch means of the loss terms; `epoch` counts from 1 within its stage.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRow {
    pub stage: Stage,
    pub epoch: usize,
    pub align: f64,
    pub gen: f64,
    pub total: f64,
    pub lr: f64,
    pub valid_r1: Option<f64>,
}

pub fn losses_tsv(rows: &[LossRow]) -> String {
    let mut s = String::from("stage\tepoch\talign\tgen\ttotal\tlr\tvalid_t2v_r1\n");
    for r in rows {
        let valid = r.valid_r1.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.3e}\t{valid}",
            r.stage, r.epoch, r.align, r.gen, r.total, r.lr
        );
    }
    s
}

/// Align and mean generation loss for a batch of `(item, text, task)`.
pub fn batch_losses(
    g: &mut Graph,
    model: &Alwig,
    batch: &[(&PreparedItem, &TokenSequence, Task)],
) -> Result<(Var, Var)> {
    let mut fs = Vec::with_capacity(batch.len());
    let mut ws = Vec::with_capacity(batch.len());
    let mut gen: Option<Var> = None;
    for &(item, text, task) in batch {
        let tags = model.embed_tags(g, &item.tag_ids)?;
        let f = model.cross_encode(g, &tags, &item.frames)?;
        let l = model.gen_loss(g, &f, &text.framed(), task)?;
        gen = Some(match gen {
            None => l,
            Some(acc) => g.add(acc, l)?,
        });
        ws.push(model.text_encode(g, text)?);
        fs.push(f);
    }
    let gen = gen.ok_or_else(|| Error::Input("empty batch".into()))?;
    let gen = g.scale(gen, 1.0 / batch.len() as f64);
    let align = model.align_loss(g, &fs, &ws)?;
    Ok((align, gen))
}

/// Text-by-video similarity over every title and caption of `items`.
pub fn similarity_matrix(model: &Alwig, items: &[PreparedItem]) -> Result<SimilarityMatrix> {
    let videos = items
        .par_iter()
        .map(|it| model.video_embedding(&it.frames, &it.tag_ids))
        .collect::<Result<Vec<_>>>()?;
    let queries: Vec<(usize, &TokenSequence)> = items
        .iter()
        .enumerate()
        .flat_map(|(i, it)| it.texts().map(move |(t, _)| (i, t)))
        .collect();
    let texts = queries
        .par_iter()
        .map(|(_, t)| model.text_embedding(t))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::with_capacity(texts.len() * videos.len());
    for t in &texts {
        for v in &videos {
            scores.push(t.iter().zip(v).map(|(a, b)| a * b).sum());
        }
    }
    SimilarityMatrix::new(scores, videos.len(), queries.iter().map(|(i, _)| *i).collect())
}

pub fn t2v_r1(model: &Alwig, items: &[PreparedItem]) -> Result<f64> {
    recall_at_k(&similarity_matrix(model, items)?, 1, Direction::TextToVideo)
}

/// Knobs shared by both stages.
#[derive(Clone, Debug)]
pub struct StageSpec<'a> {
    pub stage: Stage,
    pub epochs: usize,
    pub config: &'a RunConfig,
    /// Items scored after every epoch; the best epoch's weights are kept.
    pub valid: Option<&'a [PreparedItem]>,
}

/// Runs one stage in place and returns its loss rows.
pub fn fit_stage(model: &mut Alwig, items: &[PreparedItem], spec: &StageSpec<'_>) -> Result<Vec<LossRow>> {
    let cfg = spec.config;
    if spec.epochs == 0 {
        return Ok(Vec::new());
    }
    if items.is_empty() {
        return Err(Error::Training(format!("{} stage has no items", spec.stage)));
    }
    let stage_salt = match spec.stage {
        Stage::Pretrain => 0x5052,
        Stage::Finetune => 0x4654,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ stage_salt);
    let mut state = OptimizerState::new(cfg.train.weight_decay);
    state.no_decay.insert("tau".into());
    let batch = cfg.train.batch_size;
    let steps = items.len().div_ceil(batch);
    let total_steps = (spec.epochs * steps) as f64;
    let sched_total = cfg.schedule.total_epochs as f64;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rows = Vec::with_capacity(spec.epochs);
    let mut best: Option<(f64, crate::tensor::ParamStore)> = None;

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let (mut sa, mut sg, mut lr) = (0.0, 0.0, 0.0);
        for (step, chunk) in order.chunks(batch).enumerate() {
            let picks: Vec<(&PreparedItem, &TokenSequence, Task)> = chunk
                .iter()
                .map(|&i| {
                    let it = &items[i];
                    match spec.stage {
                        Stage::Pretrain => (it, &it.title, Task::Title),
                        Stage::Finetune => {
                            let k = rng.random_range(0..=it.captions.len());
                            let (t, task) = it.texts().nth(k).expect("index in range");
                            (it, t, task)
                        }
                    }
                })
                .collect();
            let mut g = Graph::new();
            let (align, gen) = batch_losses(&mut g, model, &picks)?;
            let loss = total_loss(&mut g, align, gen)?;
            let (va, vg) = (g.scalar(align), g.scalar(gen));
            if !(va + vg).is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss (align {va}, gen {vg}) in {} epoch {} step {}",
                    spec.stage,
                    epoch + 1,
                    step + 1
                )));
            }
            let progress = (epoch * steps + step + 1) as f64 / total_steps;
            lr = cfg.schedule.lr_at(progress * sched_total)?;
            let grads = g.backward(loss)?.params();
            adamw_step(model.params_mut(), &grads, &mut state, lr)?;
            model.clamp_tau();
            sa += va;
            sg += vg;
        }
        let n = steps as f64;
        let valid_r1 = match spec.valid {
            Some(v) if !v.is_empty() => Some(t2v_r1(model, v)?),
            _ => None,
        };
        if let Some(r) = valid_r1 {
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, model.params().clone()));
            }
        }
        rows.push(LossRow {
            stage: spec.stage,
            epoch: epoch + 1,
            align: sa / n,
            gen: sg / n,
            total: (sa + sg) / n,
            lr,
            valid_r1,
        });
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok(rows)
}

/// Everything a finished run writes to disk.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    /// Effective config: variant applied, vocabulary size filled in.
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub model: Alwig,
    pub scorer: Option<TwoStreamModel>,
    pub log: Vec<LossRow>,
}

fn require<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config {
        key: key.into(),
        reason: "required".into(),
    })
}

/// Builds the vocabulary from the training splits, then trains.
pub fn train_run(cfg: &RunConfig) -> Result<TrainedRun> {
    cfg.validate()?;
    let train_ds = load_dataset(require(&cfg.data.train, "data.train")?)?;
    let pretrain_ds = match &cfg.data.pretrain {
        Some(p) => load_dataset(p)?,
        None => train_ds.clone(),
    };
    let valid_ds = cfg.data.valid.as_deref().map(load_dataset).transpose()?;

    let texts = pretrain_ds.records.iter().map(|r| r.title.as_str()).chain(
        train_ds
            .records
            .iter()
            .flat_map(|r| std::iter::once(r.title.as_str()).chain(r.captions.iter().map(String::as_str))),
    );
    let tags = pretrain_ds
        .records
        .iter()
        .chain(&train_ds.records)
        .flat_map(|r| r.tags.iter().map(String::as_str));
    let vocab = Vocabulary::build(texts, tags);

    let mut effective = cfg.clone();
    effective.model = ablate(&cfg.model, cfg.train.variant);
    effective.model.vocab_size = vocab.len();
    let mc = &effective.model;

    let train_items = prepare_items(&train_ds, &vocab, mc)?;
    let pretrain_items = if cfg.data.pretrain.is_some() {
        prepare_items(&pretrain_ds, &vocab, mc)?
    } else {
        train_items.clone()
    };
    let valid_items = valid_ds.map(|d| prepare_items(&d, &vocab, mc)).transpose()?;

    let mut model = Alwig::init(mc.clone(), cfg.train.seed)?;
    let mut log = Vec::new();
    if !mc.skip_pretrain {
        let spec = StageSpec {
            stage: Stage::Pretrain,
            epochs: cfg.train.pretrain_epochs,
            config: &effective,
            valid: None,
        };
        log.extend(fit_stage(&mut model, &pretrain_items, &spec)?);
    }
    let spec = StageSpec {
        stage: Stage::Finetune,
        epochs: cfg.train.finetune_epochs,
        config: &effective,
        valid: valid_items.as_deref(),
    };
    log.extend(fit_stage(&mut model, &train_items, &spec)?);

    let scorer = if cfg.scorer.epochs > 0 {
        let pairs: Vec<MatchPair> = train_items
            .iter()
            .map(|it| MatchPair {
                video_id: it.video_id.clone(),
                title: String::new(),
                frames: it.frames.clone(),
                tokens: it.title.clone(),
            })
            .collect();
        let opts = ScorerTraining {
            seed: cfg.train.seed,
            ..cfg.scorer.clone()
        };
        Some(train_two_stream(&pairs, mc, &opts)?.model)
    } else {
        None
    };
    Ok(TrainedRun {
        config: effective,
        vocab,
        model,
        scorer,
        log,
    })
}

pub const RUN_CONFIG: &str = "config.toml";
pub const RUN_VOCAB: &str = "vocab.txt";
pub const RUN_CHECKPOINT: &str = "checkpoint.bin";
pub const RUN_SCORER: &str = "scorer.bin";
pub const RUN_LOSSES: &str = "losses.tsv";

impl TrainedRun {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write(RUN_CONFIG, self.config.to_toml())?;
        write(RUN_LOSSES, losses_tsv(&self.log))?;
        self.vocab.save(&dir.join(RUN_VOCAB))?;
        save_checkpoint(self.model.params(), &dir.join(RUN_CHECKPOINT))?;
        if let Some(s) = &self.scorer {
            save_checkpoint(s.params(), &dir.join(RUN_SCORER))?;
        }
        Ok(())
    }
}

/// A saved run, ready for evaluation, decoding or filtering.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub model: Alwig,
    pub scorer: Option<TwoStreamModel>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let config: RunConfig = super::config::load_toml(&dir.join(RUN_CONFIG))?;
    let vocab_path = dir.join(RUN_VOCAB);
    let vocab = Vocabulary::load(&vocab_path)?;
    if vocab.len() != config.model.vocab_size {
        return Err(Error::Format {
            path: vocab_path,
            reason: format!(
                "vocabulary has {} tokens but the checkpoint config expects {}",
                vocab.len(),
                config.model.vocab_size
            ),
        });
    }
    let ck = dir.join(RUN_CHECKPOINT);
    let model = Alwig::from_params(config.model.clone(), load_checkpoint(&ck)?).map_err(|e| relabel(e, &ck))?;
    let sp = dir.join(RUN_SCORER);
    let scorer = if sp.is_file() {
        Some(TwoStreamModel::from_params(config.model.clone(), load_checkpoint(&sp)?).map_err(|e| relabel(e, &sp))?)
    } else {
        None
    };
    Ok(LoadedRun {
        config,
        vocab,
        model,
        scorer,
    })
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { reason, .. } => Error::Format {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    }
}
