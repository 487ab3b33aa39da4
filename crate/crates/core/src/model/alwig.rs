use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::beam::StepScorer;
use super::config::ModelConfig;
use super::layers::{init_linear, init_stack, linear, stack, MASKED};
use super::types::{FusionEmbeddings, TagEmbeddingSequence, Task, TextEmbeddings, VideoClipFeatures};
use crate::error::{Error, Result};
use crate::protocol::TAU_MIN;
use crate::tensor::{Graph, ParamStore, Tensor, Var};
use crate::text::{TokenSequence, BOS, EOS, PAD};

const EMB_STD: f64 = 0.2;
const POS_STD: f64 = 0.02;

/// Cross-encoder, text encoder, similarity head and soft-prompt decoder
/// over one named parameter store.
#[derive(Clone, Debug)]
pub struct Alwig {
    config: ModelConfig,
    params: ParamStore,
}

fn init_params(c: &ModelConfig, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamStore::new();
    let (d, v) = (c.d_h, c.vocab_size);

    p.insert("cross.tag_emb", Tensor::randn(&[v, d], EMB_STD, &mut rng));
    p.insert("cross.cls", Tensor::randn(&[1, d], EMB_STD, &mut rng));
    p.insert("cross.sep", Tensor::randn(&[1, d], EMB_STD, &mut rng));
    init_linear(&mut p, &mut rng, "cross.frame_proj", c.d_v, d);
    p.insert("cross.frame_pos", Tensor::randn(&[c.max_frames, d], POS_STD, &mut rng));
    init_stack(&mut p, &mut rng, "cross", c.encoder_layers, d, c.d_ff);

    init_text_tower(&mut p, &mut rng, c);

    init_linear(&mut p, &mut rng, "head.phi", d, c.d_s);
    init_linear(&mut p, &mut rng, "head.psi", d, c.d_s);
    p.insert("tau", Tensor::scalar(c.tau_init));

    p.insert("dec.tok_emb", Tensor::randn(&[v, d], EMB_STD, &mut rng));
    p.insert("dec.pos", Tensor::randn(&[c.max_text_len + 1, d], POS_STD, &mut rng));
    p.insert("dec.task", Tensor::randn(&[2, d], EMB_STD, &mut rng));
    init_stack(&mut p, &mut rng, "dec", c.decoder_layers, d, c.d_ff);
    init_linear(&mut p, &mut rng, "dec.out", d, v);
    p
}

/// `text.tok_emb`, `text.pos` and the `text` block stack.
pub(crate) fn init_text_tower<R: rand::Rng>(p: &mut ParamStore, rng: &mut R, c: &ModelConfig) {
    p.insert("text.tok_emb", Tensor::randn(&[c.vocab_size, c.d_h], EMB_STD, rng));
    p.insert("text.pos", Tensor::randn(&[c.max_text_len + 1, c.d_h], POS_STD, rng));
    init_stack(p, rng, "text", c.encoder_layers, c.d_h, c.d_ff);
}

/// Bidirectional encoder over `[CLS] tokens`.
pub(crate) fn text_tower(
    g: &mut Graph,
    store: &ParamStore,
    c: &ModelConfig,
    tokens: &TokenSequence,
) -> Result<TextEmbeddings> {
    let l = tokens.len();
    if l == 0 {
        return Err(Error::Input("empty token sequence".into()));
    }
    if l > c.max_text_len {
        return Err(Error::Input(format!(
            "{l} tokens exceed the limit of {}",
            c.max_text_len
        )));
    }
    if let Some(&bad) = tokens.ids().iter().find(|&&t| t as usize >= c.vocab_size) {
        return Err(Error::Index {
            index: bad as usize,
            extent: c.vocab_size,
            context: "text token",
        });
    }
    let mut ids = Vec::with_capacity(l + 1);
    ids.push(crate::text::CLS as usize);
    ids.extend(ids_usize(tokens.ids()));
    let table = g.bind(store, "text.tok_emb")?;
    let emb = g.gather_rows(table, &ids)?;
    let pos = positions(g, store, "text.pos", l + 1)?;
    let x = g.add(emb, pos)?;
    let vectors = stack(g, store, "text", c.encoder_layers, x, c.heads, None)?;
    Ok(TextEmbeddings { vectors, len: l + 1 })
}

/// `gather_rows(table, 0..n)`.
fn positions(g: &mut Graph, store: &ParamStore, name: &str, n: usize) -> Result<Var> {
    let table = g.bind(store, name)?;
    let extent = g.value(table).shape()[0];
    if n > extent {
        return Err(Error::Input(format!(
            "sequence of {n} exceeds {extent} positions of `{name}`"
        )));
    }
    let ids: Vec<usize> = (0..n).collect();
    g.gather_rows(table, &ids)
}

/// Prefix-LM mask: the first `prompt` rows see only the prompt; text row
/// `j` sees the prompt and text rows `<= j`.
pub(crate) fn prefix_mask(prompt: usize, text: usize) -> Tensor {
    let n = prompt + text;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        let visible = if i < prompt { prompt } else { i + 1 };
        for j in visible..n {
            m[i * n + j] = MASKED;
        }
    }
    Tensor::new(vec![n, n], m).expect("square mask")
}

fn ids_usize(ids: &[u32]) -> Vec<usize> {
    ids.iter().map(|&i| i as usize).collect()
}

impl Alwig {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, seed);
        Ok(Alwig { config, params })
    }

    /// Wraps loaded parameters after checking every expected name and shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let reference = init_params(&config, 0);
        for (name, t) in reference.iter() {
            match params.get(name) {
                None => {
                    return Err(Error::Format {
                        path: "checkpoint".into(),
                        reason: format!("missing parameter `{name}`"),
                    })
                }
                Some(p) if p.shape() != t.shape() => {
                    return Err(Error::Format {
                        path: "checkpoint".into(),
                        reason: format!(
                            "parameter `{name}` has shape {:?}, config expects {:?}",
                            p.shape(),
                            t.shape()
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = params.names().find(|n| !reference.contains(n)) {
            return Err(Error::Format {
                path: "checkpoint".into(),
                reason: format!("unexpected parameter `{extra}`"),
            });
        }
        Ok(Alwig { config, params })
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

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn tau(&self) -> f64 {
        self.params.get("tau").map(Tensor::item).unwrap_or(self.config.tau_init)
    }

    /// Keeps the temperature at or above its floor after an update.
    pub fn clamp_tau(&mut self) {
        if let Some(t) = self.params.get_mut("tau") {
            let v = &mut t.data_mut()[0];
            if !(*v >= TAU_MIN) {
                *v = TAU_MIN;
            }
        }
    }

    /// CLS, tag rows, SEP. Tags are dropped when the config disables them.
    pub fn embed_tags(&self, g: &mut Graph, tag_ids: &[u32]) -> Result<TagEmbeddingSequence> {
        let tag_ids: Vec<u32> = if self.config.use_tags {
            tag_ids.to_vec()
        } else {
            Vec::new()
        };
        if tag_ids.len() > self.config.max_tags {
            return Err(Error::Input(format!(
                "{} tags exceed the limit of {}",
                tag_ids.len(),
                self.config.max_tags
            )));
        }
        let cls = g.bind(&self.params, "cross.cls")?;
        let sep = g.bind(&self.params, "cross.sep")?;
        let embeddings = if tag_ids.is_empty() {
            g.concat_rows(&[cls, sep])?
        } else {
            let table = g.bind(&self.params, "cross.tag_emb")?;
            let tags = g.gather_rows(table, &ids_usize(&tag_ids))?;
            g.concat_rows(&[cls, tags, sep])?
        };
        Ok(TagEmbeddingSequence { embeddings, tag_ids })
    }

    /// Full self-attention over tag slots (no positions) followed by
    /// projected frames (learned positions).
    pub fn cross_encode(
        &self,
        g: &mut Graph,
        tags: &TagEmbeddingSequence,
        video: &VideoClipFeatures,
    ) -> Result<FusionEmbeddings> {
        let c = &self.config;
        if video.dim() != c.d_v {
            return Err(Error::shape(
                "cross_encode",
                &[video.len(), c.d_v],
                video.frames().shape(),
            ));
        }
        if video.len() > c.max_frames {
            return Err(Error::Input(format!(
                "{} frames exceed the limit of {}",
                video.len(),
                c.max_frames
            )));
        }
        let frames = g.constant(video.frames().clone());
        let proj = linear(g, &self.params, "cross.frame_proj", frames)?;
        let pos = positions(g, &self.params, "cross.frame_pos", video.len())?;
        let frames = g.add(proj, pos)?;
        let x = g.concat_rows(&[tags.embeddings, frames])?;
        let vectors = stack(g, &self.params, "cross", c.encoder_layers, x, c.heads, None)?;
        Ok(FusionEmbeddings {
            vectors,
            len: tags.len() + video.len(),
        })
    }

    /// Bidirectional encoder over `[CLS] tokens`.
    pub fn text_encode(&self, g: &mut Graph, tokens: &TokenSequence) -> Result<TextEmbeddings> {
        text_tower(g, &self.params, &self.config, tokens)
    }

    /// `phi` applied to stacked CLS rows, unit-normalised.
    pub fn project_videos(&self, g: &mut Graph, fs: &[FusionEmbeddings]) -> Result<Var> {
        let rows = fs.iter().map(|f| f.fused_cls(g)).collect::<Result<Vec<_>>>()?;
        let x = g.concat_rows(&rows)?;
        let y = linear(g, &self.params, "head.phi", x)?;
        g.l2_normalize_rows(y)
    }

    /// `psi` applied to stacked CLS rows, unit-normalised.
    pub fn project_texts(&self, g: &mut Graph, ws: &[TextEmbeddings]) -> Result<Var> {
        let rows = ws.iter().map(|w| w.text_cls(g)).collect::<Result<Vec<_>>>()?;
        let x = g.concat_rows(&rows)?;
        let y = linear(g, &self.params, "head.psi", x)?;
        g.l2_normalize_rows(y)
    }

    /// `phi(f_cls) . psi(w_cls)` as a 1x1 node.
    pub fn similarity(&self, g: &mut Graph, f: &FusionEmbeddings, w: &TextEmbeddings) -> Result<Var> {
        let v = self.project_videos(g, std::slice::from_ref(f))?;
        let t = self.project_texts(g, std::slice::from_ref(w))?;
        g.matmul_nt(v, t)
    }

    /// Symmetric infoNCE over an index-aligned batch.
    pub fn align_loss(&self, g: &mut Graph, fs: &[FusionEmbeddings], ws: &[TextEmbeddings]) -> Result<Var> {
        if fs.is_empty() || fs.len() != ws.len() {
            return Err(Error::Input(format!(
                "alignment batch needs equal non-empty sides, got {} and {}",
                fs.len(),
                ws.len()
            )));
        }
        let v = self.project_videos(g, fs)?;
        let t = self.project_texts(g, ws)?;
        let tau = g.bind(&self.params, "tau")?;
        align_loss_from_projections(g, v, t, tau)
    }

    /// Decoder logits for every text position given a `P x d_h` prompt.
    pub fn decoder_logits(&self, g: &mut Graph, prompt: Var, task: Task, input: &[u32]) -> Result<Var> {
        let c = &self.config;
        if input.is_empty() {
            return Err(Error::Input("decoder input is empty".into()));
        }
        let p = g.value(prompt).dims2()?.0 + 1;
        let task_table = g.bind(&self.params, "dec.task")?;
        let task_row = g.gather_rows(task_table, &[task.index()])?;
        let table = g.bind(&self.params, "dec.tok_emb")?;
        let emb = g.gather_rows(table, &ids_usize(input))?;
        let pos = positions(g, &self.params, "dec.pos", input.len())?;
        let text = g.add(emb, pos)?;
        let x = g.concat_rows(&[prompt, task_row, text])?;
        let mask = g.constant(prefix_mask(p, input.len()));
        let h = stack(g, &self.params, "dec", c.decoder_layers, x, c.heads, Some(mask))?;
        let h = g.slice_rows(h, p, input.len())?;
        linear(g, &self.params, "dec.out", h)
    }

    /// Teacher-forced next-token loss with the fusion vectors as a soft
    /// prompt. `target` is `BOS ... EOS`, optionally followed by PAD.
    pub fn gen_loss(&self, g: &mut Graph, f: &FusionEmbeddings, target: &TokenSequence, task: Task) -> Result<Var> {
        let ids = target.ids();
        if ids.first() != Some(&BOS) {
            return Err(Error::Input("generation target must start with BOS".into()));
        }
        let eos = ids
            .iter()
            .position(|&t| t == EOS)
            .ok_or_else(|| Error::Input("generation target has no EOS".into()))?;
        if ids[eos + 1..].iter().any(|&t| t != PAD) {
            return Err(Error::Input("only PAD may follow EOS".into()));
        }
        if eos - 1 > self.config.max_text_len {
            return Err(Error::Input(format!(
                "target of {} tokens exceeds the limit of {}",
                eos - 1,
                self.config.max_text_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::Index {
                index: bad as usize,
                extent: self.config.vocab_size,
                context: "generation target",
            });
        }
        let logits = self.decoder_logits(g, f.vectors, task, &ids[..ids.len() - 1])?;
        g.cross_entropy(logits, &ids_usize(&ids[1..]), Some(PAD as usize))
    }

    /// Fusion vectors for one clip, as plain values.
    pub fn fusion(&self, video: &VideoClipFeatures, tag_ids: &[u32]) -> Result<Tensor> {
        let mut g = Graph::new();
        let tags = self.embed_tags(&mut g, tag_ids)?;
        let f = self.cross_encode(&mut g, &tags, video)?;
        Ok(g.value(f.vectors).clone())
    }

    /// Unit-norm video-side embedding `phi(f_cls)`.
    pub fn video_embedding(&self, video: &VideoClipFeatures, tag_ids: &[u32]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let tags = self.embed_tags(&mut g, tag_ids)?;
        let f = self.cross_encode(&mut g, &tags, video)?;
        let v = self.project_videos(&mut g, &[f])?;
        Ok(g.value(v).data().to_vec())
    }

    /// Unit-norm text-side embedding `psi(w_cls)`.
    pub fn text_embedding(&self, tokens: &TokenSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let w = self.text_encode(&mut g, tokens)?;
        let t = self.project_texts(&mut g, &[w])?;
        Ok(g.value(t).data().to_vec())
    }

    /// Next-token scorer conditioned on precomputed fusion vectors.
    pub fn scorer(&self, fusion: Tensor, task: Task) -> DecoderScorer<'_> {
        DecoderScorer {
            model: self,
            fusion,
            task,
        }
    }
}

/// `CE(S, diag) + CE(S^T, diag)` with `S = V T^T / tau`; each term is a
/// batch mean.
pub fn align_loss_from_projections(g: &mut Graph, v: Var, t: Var, tau: Var) -> Result<Var> {
    let k = g.value(v).dims2()?.0;
    let s = g.matmul_nt(v, t)?;
    let s = g.div_scalar(s, tau)?;
    let diag: Vec<usize> = (0..k).collect();
    let rows = g.cross_entropy(s, &diag, None)?;
    let st = g.transpose(s)?;
    let cols = g.cross_entropy(st, &diag, None)?;
    g.add(rows, cols)
}

/// Unweighted sum of the alignment and generation terms.
pub fn total_loss(g: &mut Graph, align: Var, gen: Var) -> Result<Var> {
    g.add(align, gen)
}

/// Runs the decoder over `BOS prefix` and returns next-token log-probs.
pub struct DecoderScorer<'a> {
    model: &'a Alwig,
    fusion: Tensor,
    task: Task,
}

impl DecoderScorer<'_> {
    /// Log-probabilities at every position of a teacher-forced input.
    pub fn all_log_probs(&self, input: &[u32]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let prompt = g.constant(self.fusion.clone());
        let logits = self.model.decoder_logits(&mut g, prompt, self.task, input)?;
        let t = g.value(logits);
        Ok((0..input.len()).map(|i| log_softmax(t.row(i))).collect())
    }
}

impl StepScorer for DecoderScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.model.config.vocab_size
    }

    fn max_prefix(&self) -> usize {
        self.model.config.max_text_len
    }

    fn log_probs(&self, prefix: &[u32]) -> Result<Vec<f64>> {
        let mut input = Vec::with_capacity(prefix.len() + 1);
        input.push(BOS);
        input.extend_from_slice(prefix);
        let mut rows = self.all_log_probs(&input)?;
        Ok(rows.pop().expect("non-empty input"))
    }
}

pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let lse = crate::tensor::kernels::log_sum_exp(row);
    row.iter().map(|x| x - lse).collect()
}
