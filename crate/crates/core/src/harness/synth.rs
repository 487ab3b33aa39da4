//! Synthetic tagged clips whose alignment signal is known by construction.
//!
//! Every tag owns a unit direction in feature space (the directions are
//! mutually orthogonal) and a two-character word. A clip's frames are the
//! unit-norm sum of its tags' directions plus Gaussian noise with
//! per-coordinate standard deviation `noise * sqrt(feature_dim)`; its
//! title and captions spell its tag words between filler words.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{write_dataset, DatasetRecord};
use super::features::write_features;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TAG_CHARS: &str = "猫狗鱼鸟马牛羊虎龙蛇兔鹿熊狼鸭鹅花草树叶山河湖海雪雨风云星月车船桥塔灯书琴画茶酒饭面";
const FILLER_CHARS: &str = "真好看超级快来一起今天我们这个可以太美了的呀啦吧哦最新视频分享日常记录生活精彩瞬间";
const COMBO_TRIES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Items in the labelled training split.
    pub items: usize,
    /// Items in the held-out split.
    pub holdout_items: usize,
    /// Title-only items for the pre-training split.
    pub pretrain_items: usize,
    pub tag_universe: usize,
    pub tags_per_item: usize,
    pub frames: usize,
    pub feature_dim: usize,
    /// Filler-word vocabulary size.
    pub filler_words: usize,
    pub captions_per_item: usize,
    /// Noise level in `[0, 1]`. At 0.2 the expected noise norm of a frame
    /// is 3.2 times its signal norm in 16 dimensions.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            items: 200,
            holdout_items: 50,
            pretrain_items: 600,
            tag_universe: 12,
            tags_per_item: 3,
            frames: 8,
            feature_dim: 16,
            filler_words: 16,
            captions_per_item: 2,
            noise: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(Error::Config {
                key: key.into(),
                reason,
            })
        };
        if self.items == 0 {
            return bad("items", "must be positive".into());
        }
        if self.tags_per_item == 0 || self.tags_per_item > self.tag_universe {
            return bad(
                "tags_per_item",
                format!("must be in 1..={} (the tag universe)", self.tag_universe),
            );
        }
        if self.tag_universe > self.feature_dim {
            return bad(
                "tag_universe",
                format!(
                    "{} orthogonal directions do not fit in {} dims",
                    self.tag_universe, self.feature_dim
                ),
            );
        }
        if self.frames == 0 {
            return bad("frames", "must be positive".into());
        }
        if self.filler_words == 0 {
            return bad("filler_words", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise", format!("{} outside [0, 1]", self.noise));
        }
        Ok(())
    }
}

/// Generated splits, features keyed by relative path, and the word list.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub train: Vec<DatasetRecord>,
    pub holdout: Vec<DatasetRecord>,
    pub pretrain: Vec<DatasetRecord>,
    /// Frames keyed by each record's relative `feature_file`.
    pub features: BTreeMap<String, Tensor>,
    pub tag_words: Vec<String>,
    pub filler_words: Vec<String>,
    /// One unit row per tag.
    pub directions: Vec<Vec<f64>>,
}

impl SynthData {
    pub fn lexicon(&self) -> Vec<String> {
        self.tag_words.iter().chain(&self.filler_words).cloned().collect()
    }
}

fn pool_char(pool: &str, i: usize, fallback: u32) -> char {
    pool.chars()
        .nth(i)
        .unwrap_or_else(|| char::from_u32(fallback + i as u32).expect("CJK code point"))
}

fn words(pool: &str, fallback: u32, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            [pool_char(pool, 2 * i, fallback), pool_char(pool, 2 * i + 1, fallback)]
                .iter()
                .collect()
        })
        .collect()
}

/// Gram-Schmidt on Gaussian draws.
fn orthonormal(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    dirs: Vec<Vec<f64>>,
    tag_words: Vec<String>,
    fillers: Vec<String>,
    used: HashSet<Vec<usize>>,
    features: BTreeMap<String, Tensor>,
}

impl Generator<'_> {
    fn draw_combo(&mut self, split: &HashSet<Vec<usize>>) -> Vec<usize> {
        let mut fresh_in_split = None;
        for _ in 0..COMBO_TRIES * 4 {
            let mut c: Vec<usize> =
                rand::seq::index::sample(&mut self.rng, self.cfg.tag_universe, self.cfg.tags_per_item).into_vec();
            c.sort_unstable();
            if !self.used.contains(&c) {
                return c;
            }
            if fresh_in_split.is_none() && !split.contains(&c) {
                fresh_in_split = Some(c);
            }
        }
        fresh_in_split.unwrap_or_else(|| {
            let mut c =
                rand::seq::index::sample(&mut self.rng, self.cfg.tag_universe, self.cfg.tags_per_item).into_vec();
            c.sort_unstable();
            c
        })
    }

    fn frames(&mut self, combo: &[usize]) -> Tensor {
        let (d, k) = (self.cfg.feature_dim, combo.len() as f64);
        let sigma = self.cfg.noise * (d as f64).sqrt();
        let mut data = Vec::with_capacity(self.cfg.frames * d);
        for _ in 0..self.cfg.frames {
            for j in 0..d {
                let signal: f64 = combo.iter().map(|&t| self.dirs[t][j]).sum::<f64>() / k.sqrt();
                let z: f64 = self.rng.sample(StandardNormal);
                data.push(signal + sigma * z);
            }
        }
        Tensor::new(vec![self.cfg.frames, d], data).expect("frame block")
    }

    fn sentence(&mut self, combo: &[usize], fillers: usize) -> String {
        let mut parts: Vec<&str> = combo.iter().map(|&t| self.tag_words[t].as_str()).collect();
        for _ in 0..fillers {
            parts.push(self.fillers.choose(&mut self.rng).expect("non-empty fillers"));
        }
        parts.shuffle(&mut self.rng);
        parts.concat()
    }

    fn split(&mut self, prefix: &str, count: usize, captions: usize) -> Vec<DatasetRecord> {
        let mut seen = HashSet::new();
        (0..count)
            .map(|i| {
                let combo = self.draw_combo(&seen);
                seen.insert(combo.clone());
                self.used.insert(combo.clone());
                let video_id = format!("{prefix}{i:04}");
                let feature_file = format!("features/{video_id}.crtf");
                let frames = self.frames(&combo);
                self.features.insert(feature_file.clone(), frames);
                let title = self.sentence(&combo, 2);
                let captions = (0..captions).map(|_| self.sentence(&combo, 3)).collect();
                DatasetRecord {
                    video_id,
                    feature_file: feature_file.into(),
                    category: format!("category{}", combo[0] % 4),
                    tags: combo.iter().map(|&t| self.tag_words[t].clone()).collect(),
                    title,
                    captions,
                }
            })
            .collect()
    }
}

/// Deterministic in the config, seed included.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dirs = orthonormal(&mut rng, cfg.tag_universe, cfg.feature_dim);
    let mut g = Generator {
        cfg,
        rng,
        dirs,
        tag_words: words(TAG_CHARS, 0x5000, cfg.tag_universe),
        fillers: words(FILLER_CHARS, 0x8000, cfg.filler_words),
        used: HashSet::new(),
        features: BTreeMap::new(),
    };
    let train = g.split("s", cfg.items, cfg.captions_per_item);
    let holdout = g.split("h", cfg.holdout_items, cfg.captions_per_item);
    let pretrain = g.split("p", cfg.pretrain_items, 0);
    Ok(SynthData {
        train,
        holdout,
        pretrain,
        features: g.features,
        tag_words: g.tag_words,
        filler_words: g.fillers,
        directions: g.dirs,
    })
}

/// Writes `train.jsonl`, `holdout.jsonl`, `pretrain.jsonl` (non-empty
/// splits only), `lexicon.txt` and `features/*.crtf` under `dir`.
pub fn write_synth(data: &SynthData, dir: &Path) -> Result<()> {
    let features = dir.join("features");
    fs::create_dir_all(&features).map_err(|e| Error::io(&features, e))?;
    for (rel, t) in &data.features {
        write_features(&dir.join(rel), t)?;
    }
    for (name, split) in [
        ("train", &data.train),
        ("holdout", &data.holdout),
        ("pretrain", &data.pretrain),
    ] {
        if !split.is_empty() {
            write_dataset(&dir.join(format!("{name}.jsonl")), split)?;
        }
    }
    let lex = dir.join("lexicon.txt");
    let mut text = data.lexicon().join("\n");
    text.push('\n');
    fs::write(&lex, text).map_err(|e| Error::io(&lex, e))
}
