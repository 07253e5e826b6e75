//! Shared domain types: time intervals, interval sets, groundings, answer
//! steps, QA items, and embedding vectors.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they are safe to share across threads.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A time range in seconds with strictly positive duration.
///
/// Zero-duration intervals are rejected at construction: they contribute
/// nothing to any duration and signal data errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    start_s: f64,
    end_s: f64,
}

impl TimeInterval {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !start_s.is_finite() || !end_s.is_finite() {
            return Err(Error::invariant(format!(
                "interval bounds must be finite, got [{start_s}, {end_s}]"
            )));
        }
        if start_s < 0.0 {
            return Err(Error::invariant(format!(
                "start_s ({start_s}) must be non-negative"
            )));
        }
        if end_s <= start_s {
            return Err(Error::invariant(format!(
                "end_s ({end_s}) must be greater than start_s ({start_s})"
            )));
        }
        Ok(Self { start_s, end_s })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// IoU between two single intervals; 0 when they do not overlap.
    pub fn iou(&self, other: &TimeInterval) -> f64 {
        let inter = (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0);
        let union = self.duration() + other.duration() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// A sorted list of pairwise-disjoint intervals. Overlapping or touching
/// inputs are merged during normalization, so the union duration is well
/// defined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<TimeInterval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts the input by start time and merges overlapping or touching
    /// intervals, e.g. `[0,5],[5,9]` becomes `[0,9]`.
    pub fn normalize(raw: Vec<TimeInterval>) -> Self {
        let mut sorted = raw;
        sorted.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then(a.end_s.total_cmp(&b.end_s))
        });
        let mut merged: Vec<TimeInterval> = Vec::with_capacity(sorted.len());
        for iv in sorted {
            match merged.last_mut() {
                Some(last) if iv.start_s <= last.end_s => {
                    last.end_s = last.end_s.max(iv.end_s);
                }
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[TimeInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Sum of interval durations; 0 for the empty set.
    pub fn total_duration(&self) -> f64 {
        self.intervals.iter().map(TimeInterval::duration).sum()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::normalize(all)
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].start_s.max(b[j].start_s);
            let hi = a[i].end_s.min(b[j].end_s);
            if hi > lo {
                out.push(TimeInterval {
                    start_s: lo,
                    end_s: hi,
                });
            }
            if a[i].end_s <= b[j].end_s {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Inputs are sorted and disjoint, so the sweep output already is.
        Self { intervals: out }
    }

    /// Duration(intersection) / Duration(union); 0 when both sets are empty.
    pub fn iou(&self, other: &IntervalSet) -> f64 {
        let union = self.union(other).total_duration();
        if union <= 0.0 {
            0.0
        } else {
            self.intersection(other).total_duration() / union
        }
    }
}

/// A `(video, interval)` evidence reference attached to an answer step.
///
/// Video identifiers are compared by exact string equality after trimming
/// surrounding whitespace, so the trim happens once, here.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounding {
    video_id: String,
    interval: TimeInterval,
}

impl Grounding {
    pub fn new(video_id: impl Into<String>, interval: TimeInterval) -> Result<Self> {
        let video_id = video_id.into().trim().to_owned();
        if video_id.is_empty() {
            return Err(Error::invariant("video_id must be non-empty"));
        }
        Ok(Self { video_id, interval })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn interval(&self) -> &TimeInterval {
        &self.interval
    }
}

/// One step of a step-wise answer: an ordinal, free-form text, and zero or
/// more groundings. A step with no citation is legal input; it contributes
/// no grounding counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    index: usize,
    text: String,
    groundings: Vec<Grounding>,
}

impl Step {
    pub fn new(index: usize, text: impl Into<String>, groundings: Vec<Grounding>) -> Result<Self> {
        if index < 1 {
            return Err(Error::invariant("step index must be >= 1"));
        }
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invariant("step text must be non-empty"));
        }
        Ok(Self {
            index,
            text,
            groundings,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn groundings(&self) -> &[Grounding] {
        &self.groundings
    }

    /// Distinct video ids cited by this step.
    pub fn video_ids(&self) -> BTreeSet<&str> {
        self.groundings.iter().map(Grounding::video_id).collect()
    }
}

/// A question with its ordered, grounded answer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct QAItem {
    id: String,
    question: String,
    steps: Vec<Step>,
}

impl QAItem {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        steps: Vec<Step>,
    ) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::invariant("id must be non-empty"));
        }
        for (pos, step) in steps.iter().enumerate() {
            if step.index() != pos + 1 {
                return Err(Error::invariant(format!(
                    "step indices must be contiguous from 1: position {} has index {}",
                    pos + 1,
                    step.index()
                )));
            }
        }
        Ok(Self {
            id,
            question: question.into(),
            steps,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

/// A fixed-dimension real vector. All values are finite and the dimension is
/// at least 1; a zero vector is allowed and follows the cosine-zero
/// convention.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invariant("embedding dimension must be >= 1"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invariant(format!(
                "embedding value at position {pos} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot product");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Cosine similarity, clamped to `[-1, 1]`. Cosine with a zero vector is
    /// defined as 0.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (self.dot(other) / (na * nb)).clamp(-1.0, 1.0)
    }

    /// Element-wise product; both vectors must share the same dimension.
    pub fn hadamard(&self, other: &EmbeddingVector) -> Result<EmbeddingVector> {
        if self.dim() != other.dim() {
            return Err(Error::invariant(format!(
                "dimension mismatch in Hadamard fusion: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        EmbeddingVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }
}
