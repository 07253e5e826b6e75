//! Salient frame selection: a pairwise affinity matrix (cosine similarity
//! plus a temporal-separation penalty) and the exact dynamic program that
//! picks `k` of `m` frames minimizing total consecutive-pair affinity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EmbeddingVector;

/// Shape of the temporal-separation penalty added to the cosine affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyKind {
    /// `gamma * (1 / (sin(pi*d/2) + 1) - 1)`; the best-performing variant.
    #[default]
    Sine,
    /// `gamma * (cos(pi*d/2) - 1)`.
    Cosine,
    /// `gamma * (exp(lambda*d) - 1)`; requires `lambda`.
    Exp,
    /// No penalty: the affinity is the raw cosine matrix.
    None,
}

impl PenaltyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyKind::Sine => "sine",
            PenaltyKind::Cosine => "cosine",
            PenaltyKind::Exp => "exp",
            PenaltyKind::None => "none",
        }
    }
}

/// How the index distance `|a - b|` feeds the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// `d = |a - b| / m`, in (0, 1]. The sine penalty is then monotone in
    /// separation and free of singularities.
    #[default]
    Normalized,
    /// The literal integer distance `d = |a - b|`. The sine denominator can
    /// reach zero here, so it is clamped at 1e-6. Kept for comparison runs.
    RawIndex,
}

/// Penalty parameters; `lambda` only applies to the exponential variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub kind: PenaltyKind,
    pub gamma: f64,
    pub lambda: Option<f64>,
}

impl PenaltyParams {
    pub fn none() -> Self {
        Self {
            kind: PenaltyKind::None,
            gamma: 0.0,
            lambda: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::usage(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        match (self.kind, self.lambda) {
            (PenaltyKind::Exp, None) => Err(Error::usage("the exp penalty requires --lambda")),
            (PenaltyKind::Exp, Some(l)) if !l.is_finite() => {
                Err(Error::usage(format!("lambda must be finite, got {l}")))
            }
            _ => Ok(()),
        }
    }

    /// The penalty value at separation `d`.
    pub fn delta(&self, d: f64) -> f64 {
        match self.kind {
            PenaltyKind::Sine => {
                let denom = ((std::f64::consts::PI * d / 2.0).sin() + 1.0).max(1e-6);
                self.gamma * (1.0 / denom - 1.0)
            }
            PenaltyKind::Cosine => self.gamma * ((std::f64::consts::PI * d / 2.0).cos() - 1.0),
            PenaltyKind::Exp => {
                let lambda = self.lambda.expect("validated at construction");
                self.gamma * ((lambda * d).exp() - 1.0)
            }
            PenaltyKind::None => 0.0,
        }
    }
}

/// The total affinity matrix `Q = cosine + penalty` over `m` frames, plus
/// any warnings recorded while building it (e.g. zero-norm embeddings).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    m: usize,
    q: Vec<f64>,
    penalty: PenaltyParams,
    distance: DistanceMode,
    warnings: Vec<String>,
}

impl AffinityMatrix {
    /// Builds the affinity matrix from frame embeddings. Requires at least
    /// two frames of uniform dimension. Zero-norm frames follow the
    /// cosine-zero convention and are recorded as warnings.
    pub fn build(
        frames: &[EmbeddingVector],
        penalty: PenaltyParams,
        distance: DistanceMode,
    ) -> Result<Self> {
        penalty.validate()?;
        let m = frames.len();
        if m < 2 {
            return Err(Error::usage(format!(
                "affinity needs at least 2 frames, got {m}"
            )));
        }
        let dim = frames[0].dim();
        if let Some(pos) = frames.iter().position(|f| f.dim() != dim) {
            return Err(Error::invariant(format!(
                "frame {} has dimension {}, expected {dim}",
                pos + 1,
                frames[pos].dim()
            )));
        }

        let warnings: Vec<String> = frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.norm() == 0.0)
            .map(|(t, _)| format!("frame {}: zero-norm embedding, cosine treated as 0", t + 1))
            .collect();

        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| {
                (0..m)
                    .map(|b| {
                        let gamma_part = frames[a].cosine(&frames[b]);
                        let sep = (a as f64 - b as f64).abs();
                        let d = match distance {
                            DistanceMode::Normalized => sep / m as f64,
                            DistanceMode::RawIndex => sep,
                        };
                        gamma_part + penalty.delta(d)
                    })
                    .collect()
            })
            .collect();
        let q: Vec<f64> = rows.into_iter().flatten().collect();

        if let Some(pos) = q.iter().position(|v| !v.is_finite()) {
            let (a, b) = (pos / m + 1, pos % m + 1);
            return Err(Error::invariant(format!(
                "affinity ({a},{b}) is not finite; check gamma/lambda against the frame count"
            )));
        }

        Ok(Self {
            m,
            q,
            penalty,
            distance,
            warnings,
        })
    }

    /// Wraps a raw `m x m` matrix (no penalty metadata). Used by tests and
    /// by callers that precompute affinities.
    pub fn from_raw(m: usize, q: Vec<f64>) -> Result<Self> {
        if m < 1 || q.len() != m * m {
            return Err(Error::usage(format!(
                "raw affinity must be m*m (m = {m}), got {} values",
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("raw affinity contains non-finite values"));
        }
        Ok(Self {
            m,
            q,
            penalty: PenaltyParams::none(),
            distance: DistanceMode::Normalized,
            warnings: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry for 1-based frame indices `a, b` in `1..=m`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.q[(a - 1) * self.m + (b - 1)]
    }

    pub fn penalty(&self) -> &PenaltyParams {
        &self.penalty
    }

    pub fn distance(&self) -> DistanceMode {
        self.distance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Edge cost used by the selection DP: the sentinel row 0 (the "no
    /// previous frame" state) costs 0, so the DP objective is exactly the
    /// sum over consecutive selected pairs.
    fn edge(&self, p: usize, i: usize) -> f64 {
        if p == 0 {
            0.0
        } else {
            self.get(p, i)
        }
    }
}

/// The DP tables and the selected frame chain. `selected` holds ascending
/// 1-based indices; in the default mode the last one is always `m`, because
/// the backtrack starts there.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPlan {
    pub k: usize,
    pub selected: Vec<usize>,
    pub total_cost: f64,
    pub free_endpoint: bool,
    cost_table: Vec<f64>,
    backtrack: Vec<Option<usize>>,
    m: usize,
}

impl SelectionPlan {
    /// DP cost `C[i][j]`: cheapest way to select `j` frames with frame `i`
    /// chosen last. Indices are 0-based into an (m+1) x (k+1) table.
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost_table[i * (self.k + 1) + j]
    }

    /// The predecessor chosen when `C[i][j]` was relaxed; 0 is the sentinel
    /// "no previous frame" state.
    pub fn predecessor(&self, i: usize, j: usize) -> Option<usize> {
        self.backtrack[i * (self.k + 1) + j]
    }
}

/// Selects `k` frames by the exact DP: relax `C[i][j] = min over p of
/// C[p][j-1] + Q[p][i]`, backtrack from `(m, k)`. Ties break to the smallest
/// predecessor via strict-less relaxation with ascending `p`, so output is
/// deterministic.
pub fn select_frames(q: &AffinityMatrix, k: usize) -> Result<SelectionPlan> {
    select_frames_impl(q, k, false)
}

/// Like [`select_frames`] but the last selected frame is the argmin over
/// `C[i][k]`, `i in k..=m`, rather than pinned at `m`.
pub fn select_frames_free_endpoint(q: &AffinityMatrix, k: usize) -> Result<SelectionPlan> {
    select_frames_impl(q, k, true)
}

fn select_frames_impl(q: &AffinityMatrix, k: usize, free_endpoint: bool) -> Result<SelectionPlan> {
    let m = q.m();
    if k < 1 || k > m {
        return Err(Error::usage(format!(
            "k must satisfy 1 <= k <= m (k = {k}, m = {m})"
        )));
    }

    let width = k + 1;
    let mut cost = vec![f64::INFINITY; (m + 1) * width];
    let mut back: Vec<Option<usize>> = vec![None; (m + 1) * width];
    cost[0] = 0.0; // C[0][0]

    for j in 1..=k {
        for i in j..=m {
            for p in (j - 1)..=(i - 1) {
                let prev = cost[p * width + (j - 1)];
                if prev.is_infinite() {
                    continue;
                }
                let cand = prev + q.edge(p, i);
                if cand < cost[i * width + j] {
                    cost[i * width + j] = cand;
                    back[i * width + j] = Some(p);
                }
            }
        }
    }

    let end = if free_endpoint {
        // Smallest index wins ties, for determinism.
        (k..=m)
            .min_by(|&a, &b| cost[a * width + k].total_cmp(&cost[b * width + k]))
            .expect("k <= m")
    } else {
        m
    };
    let total_cost = cost[end * width + k];
    if !total_cost.is_finite() {
        return Err(Error::invariant(
            "selection DP ended in an infeasible state; this is a bug",
        ));
    }

    let mut selected = Vec::with_capacity(k);
    let (mut i, mut j) = (end, k);
    while j > 0 {
        selected.push(i);
        i = back[i * width + j].expect("finite cost implies a predecessor");
        j -= 1;
    }
    selected.reverse();

    Ok(SelectionPlan {
        k,
        selected,
        total_cost,
        free_endpoint,
        cost_table: cost,
        backtrack: back,
        m,
    })
}

/// `m` indices evenly spaced over `1..=total_frames`, first and last
/// included when `m >= 2`. A single sample takes the midpoint
/// `(total + 1) / 2` (integer division, so the lower middle of an even
/// count).
pub fn uniform_sample_indices(total_frames: usize, m: usize) -> Result<Vec<usize>> {
    if total_frames < 1 || m < 1 {
        return Err(Error::usage("frame counts must be >= 1"));
    }
    if m > total_frames {
        return Err(Error::usage(format!(
            "cannot sample {m} of {total_frames} frames"
        )));
    }
    if m == 1 {
        return Ok(vec![total_frames.div_ceil(2)]);
    }
    let step = (total_frames - 1) as f64 / (m - 1) as f64;
    Ok((0..m)
        .map(|i| 1 + (i as f64 * step).round() as usize)
        .collect())
}
