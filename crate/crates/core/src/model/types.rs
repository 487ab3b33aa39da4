use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Per-frame feature vectors of one clip, one row per second of video.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClipFeatures {
    frames: Tensor,
}

impl VideoClipFeatures {
    pub fn new(frames: Tensor) -> Result<Self> {
        let (n, _) = frames.dims2()?;
        if frames.shape().len() != 2 || n == 0 {
            return Err(Error::Input("video needs at least one frame".into()));
        }
        if !frames.is_finite() {
            return Err(Error::Input("non-finite frame feature".into()));
        }
        Ok(VideoClipFeatures { frames })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("video needs at least one frame".into()));
        }
        Self::new(Tensor::from_rows(rows)?)
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.frames.shape()[1]
    }

    /// Frame indices kept when sampling at most `k` frames with uniform
    /// stride: `floor(i * n / k)` for `i < k`, or every frame when `n <= k`.
    pub fn sample_indices(n: usize, k: usize) -> Vec<usize> {
        if n <= k {
            (0..n).collect()
        } else {
            (0..k).map(|i| i * n / k).collect()
        }
    }

    pub fn subsample(&self, k: usize) -> VideoClipFeatures {
        let n = self.len();
        if n <= k {
            return self.clone();
        }
        let rows: Vec<Vec<f64>> = Self::sample_indices(n, k)
            .into_iter()
            .map(|i| self.frames.row(i).to_vec())
            .collect();
        VideoClipFeatures {
            frames: Tensor::from_rows(&rows).expect("rows share a width"),
        }
    }
}

/// CLS, one row per tag, SEP.
#[derive(Clone, Debug)]
pub struct TagEmbeddingSequence {
    pub embeddings: Var,
    pub tag_ids: Vec<u32>,
}

impl TagEmbeddingSequence {
    pub fn len(&self) -> usize {
        self.tag_ids.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Cross-encoder output over the tag slots followed by the frames.
#[derive(Clone, Copy, Debug)]
pub struct FusionEmbeddings {
    pub vectors: Var,
    pub len: usize,
}

impl FusionEmbeddings {
    pub fn fused_cls(&self, g: &mut Graph) -> Result<Var> {
        g.slice_rows(self.vectors, 0, 1)
    }
}

/// Text-encoder output; row 0 is the CLS summary.
#[derive(Clone, Copy, Debug)]
pub struct TextEmbeddings {
    pub vectors: Var,
    pub len: usize,
}

impl TextEmbeddings {
    pub fn text_cls(&self, g: &mut Graph) -> Result<Var> {
        g.slice_rows(self.vectors, 0, 1)
    }
}

/// Which soft-prompt task vector conditions the decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Title,
    Caption,
}

impl Task {
    pub fn index(self) -> usize {
        match self {
            Task::Title => 0,
            Task::Caption => 1,
        }
    }
}
