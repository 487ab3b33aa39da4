//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use alwig::tensor::{Graph, ParamStore, Tensor, Var};

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-4;
/// Gradients smaller than this in magnitude are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_FLOOR)
}

/// Compares reverse-mode gradients of a scalar-valued `build` against
/// central differences for every element of every input. Returns the
/// worst relative error.
pub fn grad_check<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out).unwrap();

    let eval = |inputs: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
        let out = build(&mut g, &vars);
        g.scalar(out)
    };

    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()));
        for i in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.data()[i], numeric));
        }
    }
    worst
}

/// Deterministic pseudo-random tensor in `[-1, 1)`.
pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Central-difference check of `loss(params)` against reverse-mode
/// gradients for every element of every parameter whose name starts with
/// one of `prefixes`. Returns the worst relative error and the number of
/// elements checked.
pub fn param_grad_check<F>(params: &ParamStore, prefixes: &[&str], loss: F) -> (f64, usize)
where
    F: Fn(&ParamStore, &mut Graph) -> Var,
{
    let mut g = Graph::new();
    let out = loss(params, &mut g);
    let grads = g.backward(out).unwrap().params();

    let eval = |p: &ParamStore| {
        let mut g = Graph::new();
        let out = loss(p, &mut g);
        g.scalar(out)
    };

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let names: Vec<String> = params
        .names()
        .filter(|n| prefixes.iter().any(|p| n.starts_with(p)))
        .cloned()
        .collect();
    for name in names {
        let t = params.get(&name).unwrap();
        let analytic = grads.get(&name).cloned().unwrap_or_else(|| Tensor::zeros(t.shape()));
        for i in 0..t.numel() {
            let mut plus = params.clone();
            plus.get_mut(&name).unwrap().data_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.get_mut(&name).unwrap().data_mut()[i] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            let e = rel_err(analytic.data()[i], numeric);
            if e > worst {
                worst = e;
            }
            checked += 1;
        }
    }
    (worst, checked)
}

// Plain-loop reference implementations of the transformer pieces.

pub type Rows = Vec<Vec<f64>>;

pub fn rows_of(t: &Tensor) -> Rows {
    let c = *t.shape().last().unwrap();
    t.data().chunks(c).map(<[f64]>::to_vec).collect()
}

pub fn affine(x: &Rows, w: &Tensor, b: &Tensor) -> Rows {
    let (din, dout) = (w.shape()[0], w.shape()[1]);
    x.iter()
        .map(|row| {
            (0..dout)
                .map(|j| b.data()[j] + (0..din).map(|i| row[i] * w.data()[i * dout + j]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn ln_rows(x: &Rows, gain: &Tensor, bias: &Tensor) -> Rows {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mu = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = (var + 1e-5).sqrt();
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mu) / sd * gain.data()[j] + bias.data()[j])
                .collect()
        })
        .collect()
}

pub fn gelu_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn add_rows(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// Multi-head attention; `visible(i, j)` says whether query `i` sees key `j`.
pub fn attention_oracle(
    x: &Rows,
    p: &ParamStore,
    prefix: &str,
    heads: usize,
    visible: &dyn Fn(usize, usize) -> bool,
) -> Rows {
    let get = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    let q = affine(x, get("q.w"), get("q.b"));
    let k = affine(x, get("k.w"), get("k.b"));
    let v = affine(x, get("v.w"), get("v.b"));
    let d = x[0].len();
    let dk = d / heads;
    let n = x.len();
    let mut out = vec![vec![0.0; d]; n];
    for h in 0..heads {
        let cols = h * dk..(h + 1) * dk;
        for i in 0..n {
            let scores: Vec<Option<f64>> = (0..n)
                .map(|j| {
                    visible(i, j).then(|| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dk as f64).sqrt())
                })
                .collect();
            let m = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - m).exp())).collect();
            let z: f64 = w.iter().sum();
            for c in cols.clone() {
                out[i][c] = (0..n).map(|j| w[j] / z * v[j][c]).sum();
            }
        }
    }
    affine(&out, get("o.w"), get("o.b"))
}

/// One pre-norm block: attention and GELU feed-forward, both residual.
pub fn block_oracle(
    x: &Rows,
    p: &ParamStore,
    prefix: &str,
    heads: usize,
    visible: &dyn Fn(usize, usize) -> bool,
) -> Rows {
    let get = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    let n1 = ln_rows(x, get("ln1.gain"), get("ln1.bias"));
    let a = attention_oracle(&n1, p, &format!("{prefix}.attn"), heads, visible);
    let h = add_rows(x, &a);
    let n2 = ln_rows(&h, get("ln2.gain"), get("ln2.bias"));
    let up: Rows = affine(&n2, get("ffn.up.w"), get("ffn.up.b"))
        .into_iter()
        .map(|r| r.into_iter().map(gelu_scalar).collect())
        .collect();
    let down = affine(&up, get("ffn.down.w"), get("ffn.down.b"));
    add_rows(&h, &down)
}

pub fn stack_oracle(
    x: &Rows,
    p: &ParamStore,
    prefix: &str,
    layers: usize,
    heads: usize,
    visible: &dyn Fn(usize, usize) -> bool,
) -> Rows {
    let mut h = x.clone();
    for i in 0..layers {
        h = block_oracle(&h, p, &format!("{prefix}.layers.{i}"), heads, visible);
    }
    let get = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    ln_rows(&h, get("ln_f.gain"), get("ln_f.bias"))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub mod oracles;

// ---- model fixtures ----

use alwig::model::{Alwig, ModelConfig, StepScorer};
use alwig::text::EOS;

/// Reference toy configuration for gradient and decoding checks.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        d_v: 3,
        d_h: 8,
        d_s: 4,
        d_ff: 8,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        vocab_size: 11,
        max_text_len: 6,
        max_frames: 4,
        max_tags: 4,
        ..ModelConfig::default()
    }
}

/// Best EOS-terminated sequence of length <= max_len under the length
/// normalised score, by brute-force enumeration.
pub fn exhaustive(scorer: &dyn StepScorer, max_len: usize) -> (Vec<u32>, f64) {
    let v = scorer.vocab_size() as u32;
    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut stack: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((prefix, lp)) = stack.pop() {
        let probs = scorer.log_probs(&prefix).unwrap();
        for t in 0..v {
            let mut s = prefix.clone();
            s.push(t);
            let total = lp + probs[t as usize];
            if t == EOS {
                let score = total / s.len() as f64;
                let better = match &best {
                    None => true,
                    Some((bs, bscore)) => score > *bscore || (score == *bscore && s < *bs),
                };
                if better {
                    best = Some((s, score));
                }
            } else if s.len() < max_len {
                stack.push((s, total));
            }
        }
    }
    best.unwrap()
}

pub fn tiny_decoder(vocab: usize, seed: u64) -> (Alwig, Tensor) {
    let mut c = toy_config();
    c.vocab_size = vocab;
    let m = Alwig::init(c, seed).unwrap();
    let fusion = rand_tensor(&[3, 8], seed + 1000);
    (m, fusion)
}

// ---- on-disk fixtures ----

use alwig::harness::{synth_generate, write_synth, RunConfig, SynthConfig, SynthData};
use alwig::tensor::LrSchedule;
use std::path::Path;

/// Generates `cfg` into a fresh temporary directory.
pub fn synth_fixture(cfg: &SynthConfig) -> (tempfile::TempDir, SynthData) {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_generate(cfg).unwrap();
    write_synth(&data, dir.path()).unwrap();
    (dir, data)
}

/// Small model and short schedule over a synth directory.
pub fn small_run_config(dir: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.data.train = Some(dir.join("train.jsonl"));
    c.data.lexicon = Some(dir.join("lexicon.txt"));
    c.model = ModelConfig {
        d_v: 16,
        d_h: 16,
        d_s: 8,
        d_ff: 32,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        max_text_len: 16,
        ..ModelConfig::default()
    };
    c.train.batch_size = 8;
    c.train.pretrain_epochs = 2;
    c.train.finetune_epochs = 2;
    c.schedule = LrSchedule {
        warmup_epochs: 1,
        peak_lr: 5e-3,
        final_lr: 5e-4,
        total_epochs: 10,
    };
    c.eval.max_decode_len = 8;
    c.scorer.epochs = 0;
    c
}

/// The desk configuration shipped in `configs/desk.toml`, pointed at `dir`.
pub fn desk_run_config(dir: &Path) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    let mut c = RunConfig::load(&path).unwrap();
    c.data.train = Some(dir.join("train.jsonl"));
    c.data.pretrain = Some(dir.join("pretrain.jsonl"));
    c.data.lexicon = Some(dir.join("lexicon.txt"));
    c.scorer.epochs = 0;
    c
}
