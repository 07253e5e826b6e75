//! Retrieval scoring and ranking: fused audio-visual and caption cosines
//! averaged per video, descending rank with a deterministic tie break, and
//! recall@k evaluation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::EmbeddingVector;

/// One indexed video: its fused audio-visual embedding and its caption
/// embedding, both of the index dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEntry {
    pub video_id: String,
    pub av: EmbeddingVector,
    pub caption: EmbeddingVector,
}

/// The searchable corpus: unique video ids, uniform embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    dim: usize,
    entries: Vec<VideoEntry>,
}

impl RetrievalIndex {
    pub fn new(dim: usize, entries: Vec<VideoEntry>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invariant("index dimension must be >= 1"));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.video_id.trim().is_empty() {
                return Err(Error::invariant("video_id must be non-empty"));
            }
            if !seen.insert(e.video_id.as_str()) {
                return Err(Error::invariant(format!(
                    "duplicate video_id {:?}",
                    e.video_id
                )));
            }
            for (name, v) in [("av", &e.av), ("caption", &e.caption)] {
                if v.dim() != dim {
                    return Err(Error::invariant(format!(
                        "video {:?}: {name} embedding has dimension {}, expected {dim}",
                        e.video_id,
                        v.dim()
                    )));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[VideoEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Element-wise product of two equal-dimension embeddings.
pub fn hadamard_fuse(audio: &EmbeddingVector, visual: &EmbeddingVector) -> Result<EmbeddingVector> {
    audio.hadamard(visual)
}

/// Per-video similarity breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoScore {
    pub video_id: String,
    pub s_av: f64,
    pub s_cap: f64,
    pub sim_avg: f64,
}

/// Scores in ranking order: descending `sim_avg`, ties broken by ascending
/// video id.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    scores: Vec<VideoScore>,
}

impl ScoreTable {
    pub fn scores(&self) -> &[VideoScore] {
        &self.scores
    }

    pub fn ranking(&self) -> Vec<String> {
        self.scores.iter().map(|s| s.video_id.clone()).collect()
    }

    /// First `k` ranked video ids; `k` must be in `1..=N`.
    pub fn top_k(&self, k: usize) -> Result<Vec<String>> {
        if k < 1 || k > self.scores.len() {
            return Err(Error::usage(format!(
                "k must satisfy 1 <= k <= {} (got {k})",
                self.scores.len()
            )));
        }
        Ok(self.scores[..k]
            .iter()
            .map(|s| s.video_id.clone())
            .collect())
    }
}

/// Scores every index entry against the query: `s_av` and `s_cap` cosines,
/// averaged into `sim_avg`, then ranked.
pub fn score_videos(query: &EmbeddingVector, index: &RetrievalIndex) -> Result<ScoreTable> {
    if query.dim() != index.dim() {
        return Err(Error::invariant(format!(
            "query embedding has dimension {}, index expects {}",
            query.dim(),
            index.dim()
        )));
    }
    let mut scores: Vec<VideoScore> = index
        .entries()
        .iter()
        .map(|e| {
            let s_av = query.cosine(&e.av);
            let s_cap = query.cosine(&e.caption);
            VideoScore {
                video_id: e.video_id.clone(),
                s_av,
                s_cap,
                sim_avg: (s_av + s_cap) / 2.0,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.sim_avg
            .total_cmp(&a.sim_avg)
            .then_with(|| a.video_id.cmp(&b.video_id))
    });
    Ok(ScoreTable { scores })
}

/// Which recall denominator to use for multi-relevant queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecallDenominator {
    /// `min(k, |relevant|)`: full credit once every retrievable slot is
    /// filled with a relevant video.
    #[default]
    Capped,
    /// The plain `|relevant|`.
    Relevant,
}

/// Per-query recall at each requested cutoff.
pub fn recall_at_k(
    ranking: &[String],
    relevant: &BTreeSet<String>,
    ks: &[usize],
    denominator: RecallDenominator,
) -> Result<Vec<(usize, f64)>> {
    if relevant.is_empty() {
        return Err(Error::invariant("relevant set must be non-empty"));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::usage("recall cutoffs must be positive"));
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = ranking
                .iter()
                .take(k)
                .filter(|vid| relevant.contains(*vid))
                .count();
            let den = match denominator {
                RecallDenominator::Capped => k.min(relevant.len()),
                RecallDenominator::Relevant => relevant.len(),
            };
            (k, hits as f64 / den as f64)
        })
        .collect())
}
