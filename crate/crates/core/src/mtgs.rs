//! Matched temporal grounding score: per-video interval-set IoU averaged
//! over the video ids present on both sides of a query.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{IntervalSet, Step};

/// Per-query groundings flattened into one normalized interval set per video.
pub type GroundingMap = BTreeMap<String, IntervalSet>;

/// Groups all step groundings by video id, merging intervals per video.
pub fn collect_groundings(steps: &[Step]) -> GroundingMap {
    let mut raw: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for step in steps {
        for g in step.groundings() {
            raw.entry(g.video_id().to_owned())
                .or_default()
                .push(*g.interval());
        }
    }
    raw.into_iter()
        .map(|(vid, ivs)| (vid, IntervalSet::normalize(ivs)))
        .collect()
}

/// One query's grounding score. `score` is the mean IoU over matched video
/// ids, or exactly 0 when no id appears on both sides. Queries where a side
/// has no groundings at all are flagged for auditability.
#[derive(Debug, Clone, PartialEq)]
pub struct MtgsReport {
    pub per_video_iou: BTreeMap<String, f64>,
    pub matched_ids: BTreeSet<String>,
    pub score: f64,
    pub gt_empty: bool,
    pub pred_empty: bool,
}

/// Computes the score for one query. Video ids present on only one side are
/// excluded from the computation entirely.
pub fn mtgs_per_query(gt: &GroundingMap, pred: &GroundingMap) -> MtgsReport {
    let matched_ids: BTreeSet<String> = gt
        .keys()
        .filter(|vid| pred.contains_key(*vid))
        .cloned()
        .collect();
    let per_video_iou: BTreeMap<String, f64> = matched_ids
        .iter()
        .map(|vid| (vid.clone(), gt[vid].iou(&pred[vid])))
        .collect();
    let score = if per_video_iou.is_empty() {
        0.0
    } else {
        per_video_iou.values().sum::<f64>() / per_video_iou.len() as f64
    };
    MtgsReport {
        per_video_iou,
        matched_ids,
        score,
        gt_empty: gt.is_empty(),
        pred_empty: pred.is_empty(),
    }
}

/// Arithmetic mean of per-query scores.
pub fn mtgs_avg(reports: &[MtgsReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::usage("cannot average an empty report list"));
    }
    Ok(reports.iter().map(|r| r.score).sum::<f64>() / reports.len() as f64)
}
