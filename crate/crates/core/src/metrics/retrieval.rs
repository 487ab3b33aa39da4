use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    TextToVideo,
    VideoToText,
}

/// Text-by-video scores with the ground-truth video of every text.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    scores: Vec<f64>,
    texts: usize,
    videos: usize,
    text_to_video: Vec<usize>,
}

impl SimilarityMatrix {
    /// `scores` is row-major `texts x videos`.
    pub fn new(scores: Vec<f64>, videos: usize, text_to_video: Vec<usize>) -> Result<Self> {
        let texts = text_to_video.len();
        if texts == 0 || videos == 0 {
            return Err(Error::Input("similarity matrix needs texts and videos".into()));
        }
        if scores.len() != texts * videos {
            return Err(Error::shape("similarity", &[texts, videos], &[scores.len()]));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite similarity".into()));
        }
        if let Some(&v) = text_to_video.iter().find(|&&v| v >= videos) {
            return Err(Error::Index {
                index: v,
                extent: videos,
                context: "ground-truth video",
            });
        }
        Ok(SimilarityMatrix {
            scores,
            texts,
            videos,
            text_to_video,
        })
    }

    pub fn texts(&self) -> usize {
        self.texts
    }

    pub fn videos(&self) -> usize {
        self.videos
    }

    pub fn get(&self, text: usize, video: usize) -> f64 {
        self.scores[text * self.videos + video]
    }

    pub fn ground_truth(&self) -> &[usize] {
        &self.text_to_video
    }

    /// Rank of the ground-truth video among a text's candidates; ties go to
    /// the lower index.
    fn text_rank(&self, t: usize) -> usize {
        let gt = self.text_to_video[t];
        let s = self.get(t, gt);
        (0..self.videos)
            .filter(|&v| {
                let o = self.get(t, v);
                o > s || (o == s && v < gt)
            })
            .count()
    }

    /// Rank of text `t` among all texts for its own video.
    fn video_rank(&self, t: usize) -> usize {
        let v = self.text_to_video[t];
        let s = self.get(t, v);
        (0..self.texts)
            .filter(|&o| {
                let x = self.get(o, v);
                x > s || (x == s && o < t)
            })
            .count()
    }

    /// True when some ground-truth score ties a competing candidate, so
    /// index order decided part of the ranking.
    pub fn has_ties(&self) -> bool {
        (0..self.texts).any(|t| {
            let gt = self.text_to_video[t];
            let s = self.get(t, gt);
            (0..self.videos).any(|v| v != gt && self.get(t, v) == s)
        })
    }
}

/// Recall@K as a percentage. Text-to-video: a text hits when its video is
/// in its top `k`. Video-to-text: a video hits when any of its texts is in
/// its top `k`; videos owning no text are not queries. `k` is clamped to
/// the candidate count.
pub fn recall_at_k(sim: &SimilarityMatrix, k: usize, direction: Direction) -> Result<f64> {
    if k == 0 {
        return Err(Error::Argument("recall k must be at least 1".into()));
    }
    match direction {
        Direction::TextToVideo => {
            let k = k.min(sim.videos);
            let hits = (0..sim.texts).filter(|&t| sim.text_rank(t) < k).count();
            Ok(100.0 * hits as f64 / sim.texts as f64)
        }
        Direction::VideoToText => {
            let k = k.min(sim.texts);
            let mut best = vec![usize::MAX; sim.videos];
            for t in 0..sim.texts {
                let v = sim.text_to_video[t];
                best[v] = best[v].min(sim.video_rank(t));
            }
            let queries: Vec<usize> = best.into_iter().filter(|&r| r != usize::MAX).collect();
            let hits = queries.iter().filter(|&&r| r < k).count();
            Ok(100.0 * hits as f64 / queries.len() as f64)
        }
    }
}
