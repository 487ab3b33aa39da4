mod common;

use alwig::model::{
    ablate, align_loss_from_projections, beam_search, greedy_decode, total_loss, Alwig, BeamConfig, FusionEmbeddings,
    Hypothesis, ModelConfig, StepScorer, Task, TextEmbeddings, Variant, VideoClipFeatures,
};
use alwig::tensor::{adamw_step, Graph, OptimizerState, ParamStore, Tensor, Var};
use alwig::text::{TokenSequence, BOS, CLS, EOS, PAD};
use common::*;

fn toy() -> ModelConfig {
    toy_config()
}

fn clip(n: usize, d: usize, seed: u64) -> VideoClipFeatures {
    VideoClipFeatures::new(rand_tensor(&[n, d], seed)).unwrap()
}

fn seq(ids: &[u32]) -> TokenSequence {
    TokenSequence(ids.to_vec())
}

fn set(p: &mut ParamStore, name: &str, t: Tensor) {
    assert_eq!(p.get(name).unwrap().shape(), t.shape(), "{name}");
    p.insert(name, t);
}

fn eye(n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n, n]);
    for i in 0..n {
        t.data_mut()[i * n + i] = 1.0;
    }
    t
}

fn fusion_rows(m: &Alwig, tags: &[u32], video: &VideoClipFeatures) -> Rows {
    rows_of(&m.fusion(video, tags).unwrap())
}

/// Input rows of the cross-encoder, assembled by hand.
fn cross_input_oracle(m: &Alwig, tags: &[u32], video: &VideoClipFeatures) -> Rows {
    let p = m.params();
    let mut x = rows_of(p.get("cross.cls").unwrap());
    let table = rows_of(p.get("cross.tag_emb").unwrap());
    for &t in tags {
        x.push(table[t as usize].clone());
    }
    x.extend(rows_of(p.get("cross.sep").unwrap()));
    let proj = affine(
        &rows_of(video.frames()),
        p.get("cross.frame_proj.w").unwrap(),
        p.get("cross.frame_proj.b").unwrap(),
    );
    let pos = rows_of(p.get("cross.frame_pos").unwrap());
    for (i, row) in proj.iter().enumerate() {
        x.push(row.iter().zip(&pos[i]).map(|(a, b)| a + b).collect());
    }
    x
}

#[test]
fn cross_encode_lengths() {
    let m = Alwig::init(toy(), 1).unwrap();
    let mut g = Graph::new();
    let tags = m.embed_tags(&mut g, &[]).unwrap();
    let f = m.cross_encode(&mut g, &tags, &clip(3, 3, 2)).unwrap();
    assert_eq!(f.len, 5);
    assert_eq!(g.value(f.vectors).shape(), &[5, 8]);

    let mut c = toy();
    c.max_tags = 8;
    let m = Alwig::init(ablate(&c, Variant::NoTag), 1).unwrap();
    let mut g = Graph::new();
    let tags = m.embed_tags(&mut g, &[5, 6, 7, 8, 9, 10, 6]).unwrap();
    let f = m.cross_encode(&mut g, &tags, &clip(4, 3, 2)).unwrap();
    assert_eq!(f.len, 6);
    assert_eq!(g.value(f.vectors).shape()[0], 6);
}

#[test]
fn cross_encode_rejects_bad_video() {
    let m = Alwig::init(toy(), 1).unwrap();
    let mut g = Graph::new();
    let tags = m.embed_tags(&mut g, &[6]).unwrap();
    assert!(m.cross_encode(&mut g, &tags, &clip(5, 3, 1)).is_err());
    assert!(m.cross_encode(&mut g, &tags, &clip(2, 4, 1)).is_err());
    assert!(VideoClipFeatures::from_rows(&[vec![f64::INFINITY, 0.0, 0.0]]).is_err());
}

#[test]
fn fused_cls_ignores_tag_order() {
    let mut c = toy();
    c.encoder_layers = 2;
    let m = Alwig::init(c, 4).unwrap();
    let v = clip(4, 3, 9);
    let a = fusion_rows(&m, &[6, 7, 8], &v);
    let b = fusion_rows(&m, &[8, 6, 7], &v);
    assert!(max_abs_diff(&a[0], &b[0]) < 1e-9);
    // tag slot 1 moved, so that row differs
    assert!(max_abs_diff(&a[1], &b[1]) > 1e-6);
}

#[test]
fn cross_encoder_matches_attention_oracle() {
    let m = Alwig::init(toy(), 7).unwrap();
    let v = clip(3, 3, 11);
    let tags = [6, 9];
    let got = fusion_rows(&m, &tags, &v);
    let want = stack_oracle(
        &cross_input_oracle(&m, &tags, &v),
        m.params(),
        "cross",
        1,
        2,
        &|_, _| true,
    );
    for (a, b) in got.iter().zip(&want) {
        assert!(max_abs_diff(a, b) < 1e-9);
    }
}

#[test]
fn identity_projections_give_plain_attention_mixture() {
    let mut c = toy();
    c.heads = 1;
    let mut m = Alwig::init(c, 3).unwrap();
    let p = m.params_mut();
    for n in ["q", "k", "v", "o"] {
        set(p, &format!("cross.layers.0.attn.{n}.w"), eye(8));
        set(p, &format!("cross.layers.0.attn.{n}.b"), Tensor::zeros(&[8]));
    }
    set(p, "cross.layers.0.ffn.down.w", Tensor::zeros(&[8, 8]));
    set(p, "cross.layers.0.ffn.down.b", Tensor::zeros(&[8]));
    let v = clip(2, 3, 5);
    let tags = [7];
    let got = fusion_rows(&m, &tags, &v);

    // f_cls = LN_f(x0 + sum_j softmax_j(n0 . nj / sqrt d) nj) with n = LN(x)
    let x = cross_input_oracle(&m, &tags, &v);
    let ones = Tensor::full(&[8], 1.0);
    let zeros = Tensor::zeros(&[8]);
    let n = ln_rows(&x, &ones, &zeros);
    let logits: Vec<f64> = n
        .iter()
        .map(|r| r.iter().zip(&n[0]).map(|(a, b)| a * b).sum::<f64>() / 8f64.sqrt())
        .collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
    let mix: Vec<f64> = (0..8)
        .map(|c| {
            x[0][c]
                + n.iter()
                    .zip(&logits)
                    .map(|(r, l)| (l - mx).exp() / z * r[c])
                    .sum::<f64>()
        })
        .collect();
    let want = &ln_rows(&vec![mix], &ones, &zeros)[0];
    assert!(max_abs_diff(&got[0], want) < 1e-9);
}

#[test]
fn text_encoder_lengths_purity_and_oracle() {
    let m = Alwig::init(toy(), 5).unwrap();
    let mut g = Graph::new();
    let short = m.text_encode(&mut g, &seq(&[7])).unwrap();
    let long = m.text_encode(&mut g, &seq(&[6, 7, 8, 9, 10, 6])).unwrap();
    assert_eq!((short.len, long.len), (2, 7));
    assert!(m.text_encode(&mut g, &seq(&[])).is_err());
    assert!(m.text_encode(&mut g, &seq(&[6; 7])).is_err());

    let ids = [8, 6, 10];
    assert_eq!(
        m.text_embedding(&seq(&ids)).unwrap(),
        m.text_embedding(&seq(&ids)).unwrap()
    );

    let w = m.text_encode(&mut g, &seq(&ids)).unwrap();
    let got = rows_of(g.value(w.vectors));
    let p = m.params();
    let emb = rows_of(p.get("text.tok_emb").unwrap());
    let pos = rows_of(p.get("text.pos").unwrap());
    let x: Rows = std::iter::once(CLS)
        .chain(ids)
        .enumerate()
        .map(|(i, t)| emb[t as usize].iter().zip(&pos[i]).map(|(a, b)| a + b).collect())
        .collect();
    let want = stack_oracle(&x, p, "text", 1, 2, &|_, _| true);
    for (a, b) in got.iter().zip(&want) {
        assert!(max_abs_diff(a, b) < 1e-9);
    }
}

fn encode(m: &Alwig, g: &mut Graph, tags: &[u32], video: u64, text: &[u32]) -> (FusionEmbeddings, TextEmbeddings) {
    let t = m.embed_tags(g, tags).unwrap();
    let f = m.cross_encode(g, &t, &clip(3, 3, video)).unwrap();
    let w = m.text_encode(g, &seq(text)).unwrap();
    (f, w)
}

#[test]
fn similarity_cases() {
    let mut m = Alwig::init(toy(), 2).unwrap();
    let mut g = Graph::new();
    let (f, w) = encode(&m, &mut g, &[6], 1, &[7, 8]);
    let s = m.similarity(&mut g, &f, &w).unwrap();
    let value = g.value(s).item();

    // normalize-then-dot on the raw CLS rows
    let p = m.params();
    let fc = rows_of(g.value(f.vectors))[0].clone();
    let wc = rows_of(g.value(w.vectors))[0].clone();
    let a = &affine(&vec![fc], p.get("head.phi.w").unwrap(), p.get("head.phi.b").unwrap())[0];
    let b = &affine(&vec![wc], p.get("head.psi.w").unwrap(), p.get("head.psi.b").unwrap())[0];
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let want: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    assert!((value - want).abs() < 1e-12);

    let p = m.params_mut();
    set(p, "head.phi.w", Tensor::zeros(&[8, 4]));
    set(p, "head.psi.w", Tensor::zeros(&[8, 4]));
    set(p, "head.phi.b", Tensor::new(vec![4], vec![0.5, 1.0, 0.0, 0.0]).unwrap());
    set(p, "head.psi.b", Tensor::new(vec![4], vec![0.5, 1.0, 0.0, 0.0]).unwrap());
    let mut g = Graph::new();
    let (f, w) = encode(&m, &mut g, &[6], 1, &[7, 8]);
    let s = m.similarity(&mut g, &f, &w).unwrap();
    assert!((g.value(s).item() - 1.0).abs() < 1e-15);

    set(
        m.params_mut(),
        "head.psi.b",
        Tensor::new(vec![4], vec![0.0, 0.0, 3.0, 0.0]).unwrap(),
    );
    let mut g = Graph::new();
    let (f, w) = encode(&m, &mut g, &[6], 1, &[7, 8]);
    let s = m.similarity(&mut g, &f, &w).unwrap();
    assert_eq!(g.value(s).item(), 0.0);
}

#[test]
fn similarity_is_bounded() {
    for seed in 0..20 {
        let m = Alwig::init(toy(), seed).unwrap();
        let v = m.video_embedding(&clip(2, 3, seed + 100), &[6, 7]).unwrap();
        let t = m.text_embedding(&seq(&[9, 10])).unwrap();
        let s: f64 = v.iter().zip(&t).map(|(a, b)| a * b).sum();
        assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

fn align_of(v: &[&[f64]], t: &[&[f64]], tau: f64) -> f64 {
    let mut g = Graph::new();
    let rows = |r: &[&[f64]]| Tensor::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap();
    let vv = g.constant(rows(v));
    let tt = g.constant(rows(t));
    let tau = g.constant(Tensor::scalar(tau));
    let l = align_loss_from_projections(&mut g, vv, tt, tau).unwrap();
    g.scalar(l)
}

#[test]
fn align_loss_identities() {
    assert_eq!(align_of(&[&[0.6, 0.8]], &[&[1.0, 0.0]], 0.07), 0.0);

    let l = align_of(&[&[1.0, 0.0], &[-1.0, 0.0]], &[&[1.0, 0.0], &[-1.0, 0.0]], 1.0);
    let want = 2.0 * (1.0 + (-2.0f64).exp()).ln();
    assert!((l - want).abs() < 1e-12);

    for k in [2usize, 5, 8] {
        let r: Vec<&[f64]> = vec![&[0.6, 0.8]; k];
        let l = align_of(&r, &r, 0.07);
        assert!((l - 2.0 * (k as f64).ln()).abs() < 1e-9);
    }
}

#[test]
fn align_loss_through_model_is_permutation_equivariant() {
    let m = Alwig::init(toy(), 8).unwrap();
    let items: Vec<(Vec<u32>, u64, Vec<u32>)> = vec![
        (vec![6], 1, vec![7, 8]),
        (vec![7, 9], 2, vec![9]),
        (vec![10], 3, vec![6, 6, 10]),
        (vec![8, 6], 4, vec![8, 7]),
    ];
    let loss = |order: &[usize]| {
        let mut g = Graph::new();
        let (fs, ws): (Vec<_>, Vec<_>) = order
            .iter()
            .map(|&i| encode(&m, &mut g, &items[i].0, items[i].1, &items[i].2))
            .unzip();
        let l = m.align_loss(&mut g, &fs, &ws).unwrap();
        g.scalar(l)
    };
    let a = loss(&[0, 1, 2, 3]);
    let b = loss(&[2, 0, 3, 1]);
    assert!((a - b).abs() < 1e-9);
    assert!(loss(&[0]).abs() == 0.0);
    let mut g = Graph::new();
    assert!(m.align_loss(&mut g, &[], &[]).is_err());
}

#[test]
fn tau_gradient_matches_finite_differences() {
    let v = rand_tensor(&[4, 3], 21);
    let t = rand_tensor(&[4, 3], 22);
    let err = grad_check(&[Tensor::scalar(0.3)], |g, vars| {
        let a = g.constant(v.clone());
        let b = g.constant(t.clone());
        let a = g.l2_normalize_rows(a).unwrap();
        let b = g.l2_normalize_rows(b).unwrap();
        align_loss_from_projections(g, a, b, vars[0]).unwrap()
    });
    assert!(err <= FD_REL_TOL, "rel err {err}");
}

fn gen_loss_of(m: &Alwig, target: &[u32], task: Task) -> f64 {
    let mut g = Graph::new();
    let t = m.embed_tags(&mut g, &[6]).unwrap();
    let f = m.cross_encode(&mut g, &t, &clip(2, 3, 4)).unwrap();
    let l = m.gen_loss(&mut g, &f, &seq(target), task).unwrap();
    g.scalar(l)
}

#[test]
fn gen_loss_uniform_logits_is_ln_v() {
    let mut m = Alwig::init(toy(), 3).unwrap();
    set(m.params_mut(), "dec.out.w", Tensor::zeros(&[8, 11]));
    set(m.params_mut(), "dec.out.b", Tensor::zeros(&[11]));
    let l = gen_loss_of(&m, &[BOS, 6, 7, 8, EOS], Task::Title);
    assert!((l - 11f64.ln()).abs() < 1e-9);
}

#[test]
fn gen_loss_rigged_successor_decoder() {
    // residual stream = one-hot token; the output map sends token j to its
    // successor with a logit gap of 100
    let mut c = toy();
    c.d_h = 16;
    c.d_ff = 8;
    let mut m = Alwig::init(c, 3).unwrap();
    let p = m.params_mut();
    set(p, "dec.layers.0.attn.o.w", Tensor::zeros(&[16, 16]));
    set(p, "dec.layers.0.attn.o.b", Tensor::zeros(&[16]));
    set(p, "dec.layers.0.ffn.down.w", Tensor::zeros(&[8, 16]));
    set(p, "dec.layers.0.ffn.down.b", Tensor::zeros(&[16]));
    set(p, "dec.pos", Tensor::zeros(&[7, 16]));
    let mut emb = Tensor::zeros(&[11, 16]);
    for i in 0..11 {
        emb.data_mut()[i * 16 + i] = 1.0;
    }
    set(p, "dec.tok_emb", emb);
    // LN of a one-hot row: hot entry a, others b
    let (mu, var) = (1.0 / 16.0, 1.0 / 16.0 - 1.0 / 256.0);
    let sd = (var + 1e-5f64).sqrt();
    let gap = (1.0 - mu) / sd - (0.0 - mu) / sd;
    let target = [BOS, 5, 6, 7, EOS];
    let mut w = Tensor::zeros(&[16, 11]);
    for pair in target.windows(2) {
        w.data_mut()[pair[0] as usize * 11 + pair[1] as usize] = 100.0 / gap + 1e-3;
    }
    set(p, "dec.out.w", w);
    set(p, "dec.out.b", Tensor::zeros(&[11]));
    let l = gen_loss_of(&m, &target, Task::Title);
    assert!(l < 1e-6, "loss {l}");
}

#[test]
fn gen_loss_matches_incremental_decoding() {
    let mut c = toy();
    c.heads = 1;
    let m = Alwig::init(c, 12).unwrap();
    let target = [BOS, 6, 9, 7, 8, EOS];
    for task in [Task::Title, Task::Caption] {
        let full = gen_loss_of(&m, &target, task);
        let fusion = m.fusion(&clip(2, 3, 4), &[6]).unwrap();
        let scorer = m.scorer(fusion, task);
        let mut nll = 0.0;
        for t in 1..target.len() {
            let lp = scorer.log_probs(&target[1..t]).unwrap();
            nll -= lp[target[t] as usize];
        }
        let step = nll / (target.len() - 1) as f64;
        assert!((full - step).abs() < 1e-9, "{full} vs {step}");
    }
}

#[test]
fn gen_loss_ignores_trailing_pad() {
    let m = Alwig::init(toy(), 13).unwrap();
    let a = gen_loss_of(&m, &[BOS, 6, 7, EOS], Task::Caption);
    let b = gen_loss_of(&m, &[BOS, 6, 7, EOS, PAD, PAD], Task::Caption);
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn gen_loss_rejects_bad_targets() {
    let m = Alwig::init(toy(), 13).unwrap();
    let mut g = Graph::new();
    let t = m.embed_tags(&mut g, &[6]).unwrap();
    let f = m.cross_encode(&mut g, &t, &clip(2, 3, 4)).unwrap();
    for bad in [
        vec![6, 7, EOS],
        vec![BOS, 6, 7],
        vec![BOS, 6, 6, 6, 6, 6, 6, 6, EOS],
        vec![BOS, 6, EOS, 7],
        vec![BOS, 11, EOS],
    ] {
        assert!(m.gen_loss(&mut g, &f, &seq(&bad), Task::Title).is_err(), "{bad:?}");
    }
}

fn batch_loss(m_params: &ParamStore, cfg: &ModelConfig, g: &mut Graph) -> Var {
    let m = Alwig::from_params(cfg.clone(), m_params.clone()).unwrap();
    let items: [(&[u32], u64, &[u32]); 3] = [(&[6, 7], 31, &[8, 9]), (&[8], 32, &[10]), (&[9, 10], 33, &[6, 7, 8])];
    let mut fs = Vec::new();
    let mut ws = Vec::new();
    let mut gens = Vec::new();
    for (tags, v, text) in items {
        let (f, w) = encode(&m, g, tags, v, text);
        let target = seq(text).framed();
        gens.push(m.gen_loss(g, &f, &target, Task::Title).unwrap());
        fs.push(f);
        ws.push(w);
    }
    let align = m.align_loss(g, &fs, &ws).unwrap();
    let mut gen = gens[0];
    for &x in &gens[1..] {
        gen = g.add(gen, x).unwrap();
    }
    let gen = g.scale(gen, 1.0 / gens.len() as f64);
    total_loss(g, align, gen).unwrap()
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let cfg = toy();
    let m = Alwig::init(cfg.clone(), 17).unwrap();
    let (err, n) = param_grad_check(m.params(), &[""], |p, g| batch_loss(p, &cfg, g));
    assert!(n > 1000);
    assert!(err <= FD_REL_TOL, "rel err {err}");
}

#[test]
fn total_loss_is_a_plain_sum() {
    let mut g = Graph::new();
    let z = g.constant(Tensor::scalar(0.0));
    let s = total_loss(&mut g, z, z).unwrap();
    assert_eq!(g.scalar(s), 0.0);
    let a = g.constant(Tensor::scalar(1.5));
    let b = g.constant(Tensor::scalar(2.25));
    let s = total_loss(&mut g, a, b).unwrap();
    assert_eq!(g.scalar(s), 3.75);
}

#[test]
fn total_gradient_is_sum_of_term_gradients() {
    let m = Alwig::init(toy(), 19).unwrap();
    let build = |which: u8| {
        let mut g = Graph::new();
        let (f, w) = encode(&m, &mut g, &[6, 7], 3, &[8, 9]);
        let (f2, w2) = encode(&m, &mut g, &[9], 4, &[10]);
        let align = m.align_loss(&mut g, &[f, f2], &[w, w2]).unwrap();
        let gen = m.gen_loss(&mut g, &f, &seq(&[8, 9]).framed(), Task::Title).unwrap();
        let out = match which {
            0 => align,
            1 => gen,
            _ => total_loss(&mut g, align, gen).unwrap(),
        };
        g.backward(out).unwrap().params()
    };
    let (a, b, t) = (build(0), build(1), build(2));
    // the cross-encoder is shared by both terms
    let name = "cross.layers.0.attn.q.w";
    assert!(a.contains_key(name) && b.contains_key(name));
    for (k, total) in &t {
        let zero = Tensor::zeros(total.shape());
        let ga = a.get(k).unwrap_or(&zero);
        let gb = b.get(k).unwrap_or(&zero);
        for i in 0..total.numel() {
            let s = ga.data()[i] + gb.data()[i];
            assert!((total.data()[i] - s).abs() <= 1e-12 * (1.0 + s.abs()), "{k}");
        }
    }
}

#[test]
fn one_small_adamw_step_decreases_total_loss() {
    let cfg = toy();
    for seed in 0..5 {
        let mut m = Alwig::init(cfg.clone(), seed).unwrap();
        let mut g = Graph::new();
        let l0 = batch_loss(m.params(), &cfg, &mut g);
        let before = g.scalar(l0);
        let grads = g.backward(l0).unwrap().params();
        let mut state = OptimizerState::new(0.02);
        adamw_step(m.params_mut(), &grads, &mut state, 1e-3).unwrap();
        m.clamp_tau();
        let mut g = Graph::new();
        let l1 = batch_loss(m.params(), &cfg, &mut g);
        let after = g.scalar(l1);
        assert!(after < before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn no_gpt_decoder_is_smaller() {
    let full = Alwig::init(ModelConfig::default(), 0).unwrap();
    let shallow = Alwig::init(ablate(&ModelConfig::default(), Variant::NoGpt), 0).unwrap();
    let count = |m: &Alwig| -> usize {
        m.params()
            .iter()
            .filter(|(n, _)| n.starts_with("dec."))
            .map(|(_, t)| t.numel())
            .sum()
    };
    assert!(count(&shallow) < count(&full));
}

// ---- decoding ----

#[test]
fn beam_one_equals_greedy() {
    for seed in 0..20 {
        let (m, f) = tiny_decoder(11, seed);
        let s = m.scorer(f, Task::Title);
        let cfg = BeamConfig::new(1, 6);
        assert_eq!(
            beam_search(&s, &cfg).unwrap().tokens,
            greedy_decode(&s, &cfg).unwrap().tokens
        );
    }
}

struct TwoStep;

impl StepScorer for TwoStep {
    fn vocab_size(&self) -> usize {
        4
    }
    fn log_probs(&self, prefix: &[u32]) -> alwig::Result<Vec<f64>> {
        Ok(match prefix {
            [] => vec![-0.2, -10.0, -10.0, -0.7],
            [0] => vec![-10.0, -10.0, -2.8, -10.0],
            [3] => vec![-10.0, -10.0, -0.8, -10.0],
            _ => vec![-10.0, -10.0, -0.01, -10.0],
        })
    }
}

#[test]
fn beam_two_escapes_greedy_trap() {
    let cfg = BeamConfig::new(2, 2);
    let greedy = greedy_decode(&TwoStep, &cfg).unwrap();
    assert_eq!(greedy.tokens, vec![0, EOS]);
    assert!((greedy.log_prob + 3.0).abs() < 1e-12);
    let beam: Hypothesis = beam_search(&TwoStep, &cfg).unwrap();
    assert_eq!(beam.tokens, vec![3, EOS]);
    assert!((beam.log_prob + 1.5).abs() < 1e-12);
}

#[test]
fn wide_beam_equals_exhaustive_search() {
    for seed in 0..5 {
        let (m, f) = tiny_decoder(5, seed);
        let s = m.scorer(f, Task::Caption);
        let (tokens, score) = exhaustive(&s, 3);
        let h = beam_search(&s, &BeamConfig::new(125, 3)).unwrap();
        assert_eq!(h.tokens, tokens);
        assert!((h.score() - score).abs() < 1e-12);
    }
}

#[test]
fn beam_three_sits_between_greedy_and_exhaustive() {
    for seed in 0..20 {
        let (m, f) = tiny_decoder(5, seed);
        let s = m.scorer(f, Task::Title);
        let cfg = BeamConfig::new(3, 3);
        let (_, best) = exhaustive(&s, 3);
        let beam = beam_search(&s, &cfg).unwrap().score();
        let greedy = greedy_decode(&s, &cfg).unwrap().score();
        assert!(beam <= best + 1e-12, "seed {seed}");
        assert!(beam >= greedy - 1e-12, "seed {seed}");
    }
}

#[test]
fn decode_is_deterministic_and_respects_bans() {
    let (m, f) = tiny_decoder(11, 3);
    let s = m.scorer(f, Task::Title);
    let cfg = BeamConfig::new(3, 6).banning(&[PAD, BOS, CLS]);
    let a = beam_search(&s, &cfg).unwrap();
    assert_eq!(a, beam_search(&s, &cfg).unwrap());
    assert!(a.tokens.iter().all(|t| ![PAD, BOS, CLS].contains(t)));
}
