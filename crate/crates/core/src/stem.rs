//! Step-wise error metric: Hungarian step matching on text similarity,
//! followed by counting missing, hallucinated, and out-of-order steps plus
//! grounding false positives/negatives and grounding IoU.

use std::collections::BTreeSet;

use crate::assignment::min_cost_assignment;
use crate::embed::TextEmbedder;
use crate::error::{Error, Result};
use crate::model::{IntervalSet, Step};

/// Pairwise text similarities between ground-truth rows and predicted
/// columns. Values are cosines in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::invariant("similarity matrix must be non-empty"));
        }
        let mut values = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::invariant(format!(
                    "similarity matrix row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(Error::invariant(format!(
                        "similarity ({i},{j}) = {v} is outside [-1, 1]"
                    )));
                }
                values.push(v);
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based (row, col).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Cosine similarity matrix between two text lists under `embedder`. Entry
/// (i, j) compares `gt_texts[i]` with `pred_texts[j]`; an empty text embeds
/// to the zero vector and scores 0 against everything.
pub fn text_similarity_matrix<S: AsRef<str>, T: AsRef<str>>(
    gt_texts: &[S],
    pred_texts: &[T],
    embedder: &dyn TextEmbedder,
) -> Result<SimilarityMatrix> {
    if gt_texts.is_empty() || pred_texts.is_empty() {
        return Err(Error::usage("text lists must be non-empty"));
    }
    let embed = |text: &str| {
        embedder.embed(text).map_err(|e| Error::Embedding {
            text: text.to_owned(),
            message: e.to_string(),
        })
    };
    let gt_vecs = gt_texts
        .iter()
        .map(|t| embed(t.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let pred_vecs = pred_texts
        .iter()
        .map(|t| embed(t.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let rows = gt_vecs
        .iter()
        .map(|g| pred_vecs.iter().map(|p| g.cosine(p)).collect())
        .collect();
    SimilarityMatrix::from_rows(rows)
}

/// One matched (ground truth, prediction) step pair. Indices are 1-based
/// list positions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub gt_index: usize,
    pub pred_index: usize,
    pub similarity: f64,
}

/// The thresholded Hungarian matching: each side appears at most once and
/// every kept pair has similarity >= `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<MatchedPair>,
    pub threshold: f64,
}

/// Optimal assignment pairs before thresholding. The n x m similarity matrix
/// is turned into costs `1 - sim`, padded square with cost 1 (similarity 0),
/// and solved exactly; only pairs between real rows and real columns are
/// returned, sorted by ground-truth index.
pub fn assignment_pairs(sim: &SimilarityMatrix) -> Vec<MatchedPair> {
    let (n, m) = (sim.rows(), sim.cols());
    let dim = n.max(m);
    let cost: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if i < n && j < m {
                        1.0 - sim.get(i, j)
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    (0..n)
        .filter(|&i| assign[i] < m)
        .map(|i| MatchedPair {
            gt_index: i + 1,
            pred_index: assign[i] + 1,
            similarity: sim.get(i, assign[i]),
        })
        .collect()
}

/// Hungarian matching at threshold `tau_s`: solve the assignment on cost
/// `1 - sim`, then discard assigned pairs whose similarity falls below the
/// threshold.
pub fn hungarian_match(sim: &SimilarityMatrix, tau_s: f64) -> Result<MatchSet> {
    if !(0.0..=1.0).contains(&tau_s) {
        return Err(Error::usage(format!(
            "tau_s must be in [0, 1], got {tau_s}"
        )));
    }
    let pairs = assignment_pairs(sim)
        .into_iter()
        .filter(|p| p.similarity >= tau_s)
        .collect();
    Ok(MatchSet {
        pairs,
        threshold: tau_s,
    })
}

/// Raw error counts and their normalized views for one evaluated query.
///
/// Normalization denominators: `sm` by the ground-truth step count, `sh` by
/// the predicted step count, `so` by the matched-pair count, `sfp` by the
/// number of predicted groundings inside matched steps, `sfn` by the number
/// of ground-truth groundings inside matched steps; every 0/0 is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StemReport {
    pub missing: usize,
    pub hallucinated: usize,
    pub wrong_order: usize,
    pub grounding_fp: usize,
    pub grounding_fn: usize,
    pub iou_values: Vec<f64>,
    pub sm: f64,
    pub sh: f64,
    pub so: f64,
    pub sfp: f64,
    pub sfn: f64,
    pub s_iou_mean: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Evaluates a predicted step sequence against the ground truth.
///
/// Matched pairs come from `hungarian_match` over `text_similarity_matrix`.
/// A matched pair at different list positions counts as a wrong-order step.
/// Within a matched pair, each predicted grounding whose video id is absent
/// from the ground-truth step counts as a false positive; otherwise the IoU
/// of the same-video interval unions (one value per such grounding) is
/// recorded. Each ground-truth grounding whose video id is absent from the
/// predicted step counts as a false negative. Unmatched ground-truth steps
/// are missing; unmatched predicted steps are hallucinated.
pub fn stem_evaluate(
    gt: &[Step],
    pred: &[Step],
    tau_s: f64,
    embedder: &dyn TextEmbedder,
) -> Result<StemReport> {
    if gt.is_empty() {
        return Err(Error::usage("ground-truth step list must be non-empty"));
    }
    if !(0.0..=1.0).contains(&tau_s) {
        return Err(Error::usage(format!(
            "tau_s must be in [0, 1], got {tau_s}"
        )));
    }
    let n = gt.len();
    let m = pred.len();

    let pairs = if m == 0 {
        Vec::new()
    } else {
        let gt_texts: Vec<&str> = gt.iter().map(Step::text).collect();
        let pred_texts: Vec<&str> = pred.iter().map(Step::text).collect();
        let sim = text_similarity_matrix(&gt_texts, &pred_texts, embedder)?;
        hungarian_match(&sim, tau_s)?.pairs
    };

    let mut wrong_order = 0usize;
    let mut grounding_fp = 0usize;
    let mut grounding_fn = 0usize;
    let mut iou_values = Vec::new();
    let mut pred_groundings_matched = 0usize;
    let mut gt_groundings_matched = 0usize;

    for pair in &pairs {
        if pair.gt_index != pair.pred_index {
            wrong_order += 1;
        }
        let gt_step = &gt[pair.gt_index - 1];
        let pred_step = &pred[pair.pred_index - 1];
        let gt_vids: BTreeSet<&str> = gt_step.video_ids();
        let pred_vids: BTreeSet<&str> = pred_step.video_ids();
        pred_groundings_matched += pred_step.groundings().len();
        gt_groundings_matched += gt_step.groundings().len();

        let same_video_union = |step: &Step, vid: &str| {
            IntervalSet::normalize(
                step.groundings()
                    .iter()
                    .filter(|g| g.video_id() == vid)
                    .map(|g| *g.interval())
                    .collect(),
            )
        };

        for g in pred_step.groundings() {
            if !gt_vids.contains(g.video_id()) {
                grounding_fp += 1;
            } else {
                let gt_set = same_video_union(gt_step, g.video_id());
                let pred_set = same_video_union(pred_step, g.video_id());
                iou_values.push(gt_set.iou(&pred_set));
            }
        }
        for g in gt_step.groundings() {
            if !pred_vids.contains(g.video_id()) {
                grounding_fn += 1;
            }
        }
    }

    let missing = n - pairs.len();
    let hallucinated = m - pairs.len();
    let s_iou_mean = if iou_values.is_empty() {
        0.0
    } else {
        iou_values.iter().sum::<f64>() / iou_values.len() as f64
    };

    Ok(StemReport {
        missing,
        hallucinated,
        wrong_order,
        grounding_fp,
        grounding_fn,
        sm: ratio(missing, n),
        sh: ratio(hallucinated, m),
        so: ratio(wrong_order, pairs.len()),
        sfp: ratio(grounding_fp, pred_groundings_matched),
        sfn: ratio(grounding_fn, gt_groundings_matched),
        s_iou_mean,
        iou_values,
    })
}

/// Dataset-level aggregation: raw counts are summed, IoU values concatenated,
/// and every normalized field is the arithmetic mean of the per-query values.
pub fn stem_aggregate(reports: &[StemReport]) -> Result<StemReport> {
    if reports.is_empty() {
        return Err(Error::usage("cannot aggregate an empty report list"));
    }
    let count = reports.len() as f64;
    let mean = |f: fn(&StemReport) -> f64| reports.iter().map(f).sum::<f64>() / count;
    Ok(StemReport {
        missing: reports.iter().map(|r| r.missing).sum(),
        hallucinated: reports.iter().map(|r| r.hallucinated).sum(),
        wrong_order: reports.iter().map(|r| r.wrong_order).sum(),
        grounding_fp: reports.iter().map(|r| r.grounding_fp).sum(),
        grounding_fn: reports.iter().map(|r| r.grounding_fn).sum(),
        iou_values: reports.iter().flat_map(|r| r.iou_values.clone()).collect(),
        sm: mean(|r| r.sm),
        sh: mean(|r| r.sh),
        so: mean(|r| r.so),
        sfp: mean(|r| r.sfp),
        sfn: mean(|r| r.sfn),
        s_iou_mean: mean(|r| r.s_iou_mean),
    })
}
