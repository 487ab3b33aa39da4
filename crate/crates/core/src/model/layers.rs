//! Pre-norm transformer building blocks over named parameters.
//!
//! A block at `prefix` owns:
//! `ln1.{gain,bias}`, `attn.{q,k,v,o}.{w,b}`, `ln2.{gain,bias}`,
//! `ffn.{up,down}.{w,b}`. It computes
//! `h = x + Attn(LN1(x))`, `y = h + Down(GELU(Up(LN2(h))))`.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Graph, ParamStore, Tensor, Var};

pub(crate) const LN_EPS: f64 = 1e-5;
/// Additive attention mask value for blocked positions.
pub(crate) const MASKED: f64 = -1e9;

pub(crate) fn init_linear<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, din: usize, dout: usize) {
    let std = 1.0 / (din as f64).sqrt();
    store.insert(format!("{name}.w"), Tensor::randn(&[din, dout], std, rng));
    store.insert(format!("{name}.b"), Tensor::zeros(&[dout]));
}

pub(crate) fn linear(g: &mut Graph, store: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let w = g.bind(store, &format!("{name}.w"))?;
    let b = g.bind(store, &format!("{name}.b"))?;
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

pub(crate) fn init_layer_norm(store: &mut ParamStore, name: &str, d: usize) {
    store.insert(format!("{name}.gain"), Tensor::full(&[d], 1.0));
    store.insert(format!("{name}.bias"), Tensor::zeros(&[d]));
}

pub(crate) fn layer_norm(g: &mut Graph, store: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let gain = g.bind(store, &format!("{name}.gain"))?;
    let bias = g.bind(store, &format!("{name}.bias"))?;
    g.layer_norm(x, gain, bias, LN_EPS)
}

pub(crate) fn init_block<R: Rng>(store: &mut ParamStore, rng: &mut R, prefix: &str, d: usize, d_ff: usize) {
    init_layer_norm(store, &format!("{prefix}.ln1"), d);
    for p in ["q", "k", "v", "o"] {
        init_linear(store, rng, &format!("{prefix}.attn.{p}"), d, d);
    }
    init_layer_norm(store, &format!("{prefix}.ln2"), d);
    init_linear(store, rng, &format!("{prefix}.ffn.up"), d, d_ff);
    init_linear(store, rng, &format!("{prefix}.ffn.down"), d_ff, d);
}

/// Multi-head scaled dot-product self-attention. `mask` is an additive
/// `T x T` constant (0 or [`MASKED`]).
pub(crate) fn self_attention(
    g: &mut Graph,
    store: &ParamStore,
    prefix: &str,
    x: Var,
    heads: usize,
    mask: Option<Var>,
) -> Result<Var> {
    let d = g.value(x).dims2()?.1;
    let dk = d / heads;
    let q = linear(g, store, &format!("{prefix}.q"), x)?;
    let k = linear(g, store, &format!("{prefix}.k"), x)?;
    let v = linear(g, store, &format!("{prefix}.v"), x)?;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dk, dk)?;
        let kh = g.slice_cols(k, h * dk, dk)?;
        let vh = g.slice_cols(v, h * dk, dk)?;
        let scores = g.matmul_nt(qh, kh)?;
        let mut scores = g.scale(scores, scale);
        if let Some(m) = mask {
            scores = g.add(scores, m)?;
        }
        let weights = g.softmax(scores, 1)?;
        outs.push(g.matmul(weights, vh)?);
    }
    let joined = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
    linear(g, store, &format!("{prefix}.o"), joined)
}

pub(crate) fn block(
    g: &mut Graph,
    store: &ParamStore,
    prefix: &str,
    x: Var,
    heads: usize,
    mask: Option<Var>,
) -> Result<Var> {
    let n1 = layer_norm(g, store, &format!("{prefix}.ln1"), x)?;
    let a = self_attention(g, store, &format!("{prefix}.attn"), n1, heads, mask)?;
    let h = g.add(x, a)?;
    let n2 = layer_norm(g, store, &format!("{prefix}.ln2"), h)?;
    let up = linear(g, store, &format!("{prefix}.ffn.up"), n2)?;
    let act = g.gelu(up);
    let down = linear(g, store, &format!("{prefix}.ffn.down"), act)?;
    g.add(h, down)
}

/// `layers` blocks at `{prefix}.layers.{i}` followed by `{prefix}.ln_f`.
pub(crate) fn init_stack<R: Rng>(
    store: &mut ParamStore,
    rng: &mut R,
    prefix: &str,
    layers: usize,
    d: usize,
    d_ff: usize,
) {
    for i in 0..layers {
        init_block(store, rng, &format!("{prefix}.layers.{i}"), d, d_ff);
    }
    init_layer_norm(store, &format!("{prefix}.ln_f"), d);
}

pub(crate) fn stack(
    g: &mut Graph,
    store: &ParamStore,
    prefix: &str,
    layers: usize,
    mut x: Var,
    heads: usize,
    mask: Option<Var>,
) -> Result<Var> {
    for i in 0..layers {
        x = block(g, store, &format!("{prefix}.layers.{i}"), x, heads, mask)?;
    }
    layer_norm(g, store, &format!("{prefix}.ln_f"), x)
}
