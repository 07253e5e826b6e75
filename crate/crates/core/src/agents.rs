//! Model-agnostic grounded QA pipeline: per-video agents propose scored
//! time windows with snippet text, and a deterministic meta-aggregator
//! merges them into one ordered, grounded answer.
//!
//! The shipped agent scores transcript segments with a text embedder, which
//! keeps the whole pipeline reproducible. Implementations that call external
//! services can plug in through the same [`Agent`] trait.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::embed::TextEmbedder;
use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, Grounding, QAItem, Step, TimeInterval};
use crate::retrieval::{score_videos, RetrievalIndex};

/// One candidate time window inside a single video.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub interval: TimeInterval,
    /// Relevance in [0, 1].
    pub score: f64,
    pub snippet: String,
}

/// What one agent reports for one video: windows sorted by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentFinding {
    pub video_id: String,
    pub windows: Vec<Window>,
}

/// A timed transcript piece.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptSegment {
    pub interval: TimeInterval,
    pub text: String,
}

/// The material an agent sees for one video: its transcript, optionally the
/// frame embeddings and a salient-frame selection.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoContext {
    video_id: String,
    segments: Vec<TranscriptSegment>,
    pub frame_embeddings: Option<Vec<EmbeddingVector>>,
    pub selected_frames: Option<Vec<usize>>,
}

impl VideoContext {
    /// Validates that segments are sorted by start time and non-empty of
    /// text; intervals are valid by construction of [`TimeInterval`].
    pub fn new(video_id: impl Into<String>, segments: Vec<TranscriptSegment>) -> Result<Self> {
        let video_id = video_id.into().trim().to_owned();
        if video_id.is_empty() {
            return Err(Error::invariant("video_id must be non-empty"));
        }
        for (i, pair) in segments.windows(2).enumerate() {
            if pair[1].interval.start_s() < pair[0].interval.start_s() {
                return Err(Error::invariant(format!(
                    "segments must be sorted by start time: segment {} starts at {}, segment {} at {}",
                    i + 1,
                    pair[0].interval.start_s(),
                    i + 2,
                    pair[1].interval.start_s()
                )));
            }
        }
        if let Some(i) = segments.iter().position(|s| s.text.trim().is_empty()) {
            return Err(Error::invariant(format!(
                "segment {} has empty text",
                i + 1
            )));
        }
        Ok(Self {
            video_id,
            segments,
            frame_embeddings: None,
            selected_frames: None,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn segments(&self) -> &[TranscriptSegment] {
        &self.segments
    }
}

/// The ordered, grounded answer produced by the aggregator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundedAnswer {
    pub steps: Vec<Step>,
}

impl GroundedAnswer {
    /// Packs the answer as a QA record for serialization and evaluation.
    pub fn to_qa_item(&self, id: &str, question: &str) -> Result<QAItem> {
        QAItem::new(id, question, self.steps.clone())
    }
}

/// A per-video answering agent. Implementations must be callable from
/// multiple workers; deterministic implementations yield deterministic
/// pipelines.
pub trait Agent: Send + Sync {
    fn answer(&self, query: &str, ctx: &VideoContext) -> Result<AgentFinding>;
}

/// Deterministic stand-in for a perception model: scores each transcript
/// segment by embedder cosine against the query, keeps segments at or above
/// the threshold, and returns the top `max_windows` as windows with the
/// segment text as snippet.
pub struct MockTranscriptAgent<E: TextEmbedder> {
    embedder: E,
    score_threshold: f64,
    max_windows: usize,
}

impl<E: TextEmbedder> MockTranscriptAgent<E> {
    pub fn new(embedder: E, score_threshold: f64, max_windows: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score_threshold) {
            return Err(Error::usage(format!(
                "score threshold must be in [0, 1], got {score_threshold}"
            )));
        }
        Ok(Self {
            embedder,
            score_threshold,
            max_windows,
        })
    }
}

impl<E: TextEmbedder> Agent for MockTranscriptAgent<E> {
    fn answer(&self, query: &str, ctx: &VideoContext) -> Result<AgentFinding> {
        let embed = |text: &str| {
            self.embedder.embed(text).map_err(|e| Error::Embedding {
                text: text.to_owned(),
                message: e.to_string(),
            })
        };
        let query_vec = embed(query)?;
        let mut windows = Vec::new();
        for seg in ctx.segments() {
            // Negative cosine carries no evidence of relevance.
            let score = query_vec.cosine(&embed(&seg.text)?).max(0.0);
            if score >= self.score_threshold {
                windows.push(Window {
                    interval: seg.interval,
                    score,
                    snippet: seg.text.clone(),
                });
            }
        }
        windows.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.interval.start_s().total_cmp(&b.interval.start_s()))
                .then(a.interval.end_s().total_cmp(&b.interval.end_s()))
        });
        windows.truncate(self.max_windows);
        Ok(AgentFinding {
            video_id: ctx.video_id().to_owned(),
            windows,
        })
    }
}

/// Merges findings into one answer: all windows are flattened, sorted by
/// (score desc, video id asc, start asc, end asc, snippet asc), and a window
/// is suppressed when a higher-ranked window in the same video overlaps it
/// with IoU above `dedupe_iou`. Each surviving window becomes one step whose
/// text is the snippet verbatim.
///
/// The sort key is total, so the output never depends on the order of
/// `findings`. The query is unused by this rule-based aggregator; it is part
/// of the interface for aggregators that synthesize text.
pub fn meta_aggregate(
    _query: &str,
    findings: &[AgentFinding],
    dedupe_iou: f64,
) -> Result<GroundedAnswer> {
    if !(0.0..=1.0).contains(&dedupe_iou) {
        return Err(Error::usage(format!(
            "dedupe IoU must be in [0, 1], got {dedupe_iou}"
        )));
    }
    let mut flat: Vec<(&str, &Window)> = findings
        .iter()
        .flat_map(|f| f.windows.iter().map(move |w| (f.video_id.as_str(), w)))
        .collect();
    flat.sort_by(|(vid_a, a), (vid_b, b)| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| vid_a.cmp(vid_b))
            .then(a.interval.start_s().total_cmp(&b.interval.start_s()))
            .then(a.interval.end_s().total_cmp(&b.interval.end_s()))
            .then_with(|| a.snippet.cmp(&b.snippet))
    });

    let mut kept: Vec<(&str, &Window)> = Vec::new();
    for (vid, w) in flat {
        let duplicate = kept
            .iter()
            .any(|(kvid, kw)| *kvid == vid && kw.interval.iou(&w.interval) > dedupe_iou);
        if !duplicate {
            kept.push((vid, w));
        }
    }

    let steps = kept
        .into_iter()
        .enumerate()
        .map(|(i, (vid, w))| {
            let grounding = Grounding::new(vid, w.interval)?;
            Step::new(i + 1, w.snippet.clone(), vec![grounding])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundedAnswer { steps })
}

/// A per-video agent failure the pipeline survived.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentFailure {
    pub video_id: String,
    pub message: String,
}

/// The pipeline result: the aggregated answer, the retrieval order used,
/// and any per-video failures (the pipeline continues without them).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub answer: GroundedAnswer,
    pub retrieved: Vec<String>,
    pub failures: Vec<AgentFailure>,
}

/// Runs retrieval, spawns one agent invocation per retrieved video (up to
/// `workers` in parallel), and aggregates the findings. The aggregator is
/// order-independent, so output is identical across worker counts.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    query: &str,
    index: &RetrievalIndex,
    contexts: &BTreeMap<String, VideoContext>,
    query_embedding: &EmbeddingVector,
    k: usize,
    agent: &dyn Agent,
    dedupe_iou: f64,
    workers: usize,
) -> Result<PipelineOutcome> {
    if workers < 1 {
        return Err(Error::usage("workers must be >= 1"));
    }
    for entry in index.entries() {
        if !contexts.contains_key(&entry.video_id) {
            return Err(Error::invariant(format!(
                "no context provided for indexed video {:?}",
                entry.video_id
            )));
        }
    }

    let table = score_videos(query_embedding, index)?;
    let retrieved = table.top_k(k)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invariant(format!("failed to start worker pool: {e}")))?;
    let results: Vec<(String, Result<AgentFinding>)> = pool.install(|| {
        retrieved
            .par_iter()
            .map(|vid| (vid.clone(), agent.answer(query, &contexts[vid])))
            .collect()
    });

    let mut findings = Vec::new();
    let mut failures = Vec::new();
    for (vid, result) in results {
        match result {
            Ok(f) => findings.push(f),
            Err(e) => failures.push(AgentFailure {
                video_id: vid,
                message: e.to_string(),
            }),
        }
    }

    let answer = meta_aggregate(query, &findings, dedupe_iou)?;
    Ok(PipelineOutcome {
        answer,
        retrieved,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::default_embedder;
    use crate::retrieval::VideoEntry;
    use approx::assert_abs_diff_eq;

    fn iv(a: f64, b: f64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    fn seg(a: f64, b: f64, text: &str) -> TranscriptSegment {
        TranscriptSegment {
            interval: iv(a, b),
            text: text.to_owned(),
        }
    }

    fn ctx(vid: &str, segments: Vec<TranscriptSegment>) -> VideoContext {
        VideoContext::new(vid, segments).unwrap()
    }

    fn mock(
        threshold: f64,
        max_windows: usize,
    ) -> MockTranscriptAgent<crate::embed::HashedBowEmbedder> {
        MockTranscriptAgent::new(default_embedder(), threshold, max_windows).unwrap()
    }

    #[test]
    fn context_rejects_unsorted_or_empty_segments() {
        assert!(VideoContext::new("v1", vec![seg(5.0, 6.0, "b"), seg(0.0, 1.0, "a")]).is_err());
        assert!(VideoContext::new("v1", vec![seg(0.0, 1.0, "  ")]).is_err());
        assert!(VideoContext::new(" ", vec![]).is_err());
    }

    #[test]
    fn agent_no_token_overlap_yields_no_windows() {
        let agent = mock(0.1, 5);
        let c = ctx("v1", vec![seg(0.0, 10.0, "tune guitar strings loudly")]);
        let f = agent.answer("whisk some eggs", &c).unwrap();
        assert!(f.windows.is_empty());
    }

    #[test]
    fn agent_verbatim_segment_scores_one() {
        let agent = mock(0.5, 5);
        let c = ctx("v1", vec![seg(3.0, 9.0, "whisk the eggs")]);
        let f = agent.answer("whisk the eggs", &c).unwrap();
        assert_eq!(f.windows.len(), 1);
        assert_eq!(f.windows[0].interval, iv(3.0, 9.0));
        assert_abs_diff_eq!(f.windows[0].score, 1.0, epsilon = 1e-12);
        assert_eq!(f.windows[0].snippet, "whisk the eggs");
    }

    #[test]
    fn agent_orders_windows_by_cosine() {
        let e = default_embedder();
        let texts = ["whisk the eggs until fluffy", "heat some butter in the pan"];
        let query = "how do i whisk eggs";
        let c = ctx("v1", vec![seg(0.0, 5.0, texts[0]), seg(5.0, 9.0, texts[1])]);
        let f = mock(0.0, 5).answer(query, &c).unwrap();
        assert_eq!(f.windows.len(), 2);
        // Oracle: score each fixture text directly with the embedder.
        let q = e.embed(query).unwrap();
        let s0 = q.cosine(&e.embed(texts[0]).unwrap()).max(0.0);
        let s1 = q.cosine(&e.embed(texts[1]).unwrap()).max(0.0);
        assert!(s0 > s1);
        assert_eq!(f.windows[0].score, s0);
        assert_eq!(f.windows[1].score, s1);
    }

    #[test]
    fn agent_threshold_and_truncation() {
        let c = ctx(
            "v1",
            vec![
                seg(0.0, 1.0, "alpha"),
                seg(1.0, 2.0, "beta"),
                seg(2.0, 3.0, "gamma"),
            ],
        );
        // Impossible threshold, no exact match: empty.
        let f = mock(1.0, 5).answer("delta", &c).unwrap();
        assert!(f.windows.is_empty());
        // Zero threshold keeps everything (cosine >= 0 under the default
        // embedder), sorted.
        let f = mock(0.0, 5).answer("alpha", &c).unwrap();
        assert_eq!(f.windows.len(), 3);
        assert!(f.windows.windows(2).all(|w| w[0].score >= w[1].score));
        let f = mock(0.0, 2).answer("alpha", &c).unwrap();
        assert_eq!(f.windows.len(), 2);
    }

    #[test]
    fn aggregate_single_window() {
        let finding = AgentFinding {
            video_id: "v1".into(),
            windows: vec![Window {
                interval: iv(0.0, 5.0),
                score: 0.9,
                snippet: "crack the eggs".into(),
            }],
        };
        let ans = meta_aggregate("q", &[finding], 0.7).unwrap();
        assert_eq!(ans.steps.len(), 1);
        assert_eq!(ans.steps[0].text(), "crack the eggs");
        assert_eq!(ans.steps[0].groundings()[0].video_id(), "v1");
    }

    #[test]
    fn aggregate_suppresses_same_video_overlap() {
        let finding = AgentFinding {
            video_id: "v1".into(),
            windows: vec![
                Window {
                    interval: iv(0.0, 5.0),
                    score: 0.9,
                    snippet: "first".into(),
                },
                Window {
                    interval: iv(0.0, 5.0),
                    score: 0.8,
                    snippet: "second".into(),
                },
            ],
        };
        let ans = meta_aggregate("q", &[finding], 0.7).unwrap();
        assert_eq!(ans.steps.len(), 1);
        assert_eq!(ans.steps[0].text(), "first");
    }

    #[test]
    fn aggregate_golden_sort_order() {
        // Hand-applied sort key over three videos:
        // (0.9, v2) < (0.9, v3) by id, then (0.7, v1).
        let findings = vec![
            AgentFinding {
                video_id: "v1".into(),
                windows: vec![Window {
                    interval: iv(0.0, 2.0),
                    score: 0.7,
                    snippet: "low".into(),
                }],
            },
            AgentFinding {
                video_id: "v3".into(),
                windows: vec![Window {
                    interval: iv(1.0, 3.0),
                    score: 0.9,
                    snippet: "high-b".into(),
                }],
            },
            AgentFinding {
                video_id: "v2".into(),
                windows: vec![Window {
                    interval: iv(4.0, 6.0),
                    score: 0.9,
                    snippet: "high-a".into(),
                }],
            },
        ];
        let ans = meta_aggregate("q", &findings, 0.7).unwrap();
        let texts: Vec<&str> = ans.steps.iter().map(Step::text).collect();
        assert_eq!(texts, vec!["high-a", "high-b", "low"]);
        let indices: Vec<usize> = ans.steps.iter().map(Step::index).collect();
        assert_eq!(indices, vec![1, 2, 3]);
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let findings: Vec<AgentFinding> = (0..4)
            .map(|i| AgentFinding {
                video_id: format!("v{i}"),
                windows: vec![
                    Window {
                        interval: iv(0.0, 5.0),
                        score: 0.5 + 0.1 * f64::from(i),
                        snippet: format!("window a{i}"),
                    },
                    Window {
                        interval: iv(4.0, 9.0),
                        score: 0.4,
                        snippet: format!("window b{i}"),
                    },
                ],
            })
            .collect();
        let base = meta_aggregate("q", &findings, 0.5).unwrap();
        let mut reversed = findings.clone();
        reversed.reverse();
        assert_eq!(meta_aggregate("q", &reversed, 0.5).unwrap(), base);
    }

    #[test]
    fn aggregate_empty_findings_gives_empty_answer() {
        assert!(meta_aggregate("q", &[], 0.7).unwrap().steps.is_empty());
        assert!(meta_aggregate("q", &[], 1.5).is_err());
    }

    fn small_world() -> (RetrievalIndex, BTreeMap<String, VideoContext>) {
        let ev = |v: &[f64]| EmbeddingVector::new(v.to_vec()).unwrap();
        let index = RetrievalIndex::new(
            2,
            vec![
                VideoEntry {
                    video_id: "v1".into(),
                    av: ev(&[1.0, 0.0]),
                    caption: ev(&[1.0, 0.0]),
                },
                VideoEntry {
                    video_id: "v2".into(),
                    av: ev(&[0.0, 1.0]),
                    caption: ev(&[0.0, 1.0]),
                },
            ],
        )
        .unwrap();
        let mut contexts = BTreeMap::new();
        contexts.insert(
            "v1".to_owned(),
            ctx(
                "v1",
                vec![
                    seg(0.0, 8.0, "whisk the eggs"),
                    seg(8.0, 20.0, "heat the pan"),
                ],
            ),
        );
        contexts.insert(
            "v2".to_owned(),
            ctx("v2", vec![seg(0.0, 6.0, "tune the guitar")]),
        );
        (index, contexts)
    }

    #[test]
    fn pipeline_single_relevant_video() {
        let (index, contexts) = small_world();
        let agent = mock(0.5, 3);
        let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let out = run_pipeline("whisk the eggs", &index, &contexts, &q, 1, &agent, 0.7, 1).unwrap();
        assert_eq!(out.retrieved, vec!["v1"]);
        assert_eq!(out.answer.steps.len(), 1);
        assert_eq!(out.answer.steps[0].text(), "whisk the eggs");
        assert!(out.failures.is_empty());
    }

    #[test]
    fn pipeline_no_matches_yields_empty_answer() {
        let (index, contexts) = small_world();
        let agent = mock(0.9, 3);
        let q = EmbeddingVector::new(vec![0.5, 0.5]).unwrap();
        let out =
            run_pipeline("paint the fence", &index, &contexts, &q, 2, &agent, 0.7, 1).unwrap();
        assert!(out.answer.steps.is_empty());
        assert!(out.failures.is_empty());
    }

    #[test]
    fn pipeline_is_schedule_independent() {
        let (index, contexts) = small_world();
        let agent = mock(0.0, 3);
        let q = EmbeddingVector::new(vec![0.7, 0.7]).unwrap();
        let base =
            run_pipeline("whisk the eggs", &index, &contexts, &q, 2, &agent, 0.7, 1).unwrap();
        for workers in [2, 4, 8] {
            let out = run_pipeline(
                "whisk the eggs",
                &index,
                &contexts,
                &q,
                2,
                &agent,
                0.7,
                workers,
            )
            .unwrap();
            assert_eq!(out, base);
        }
    }

    #[test]
    fn pipeline_output_windows_come_from_findings() {
        let (index, contexts) = small_world();
        let agent = mock(0.0, 5);
        let q = EmbeddingVector::new(vec![0.7, 0.7]).unwrap();
        let out =
            run_pipeline("eggs and guitars", &index, &contexts, &q, 2, &agent, 0.7, 1).unwrap();
        let all_segments: Vec<(String, TimeInterval)> = contexts
            .values()
            .flat_map(|c| {
                c.segments()
                    .iter()
                    .map(|s| (c.video_id().to_owned(), s.interval))
            })
            .collect();
        for step in &out.answer.steps {
            for g in step.groundings() {
                assert!(all_segments
                    .iter()
                    .any(|(vid, iv)| vid == g.video_id() && iv == g.interval()));
            }
        }
    }

    struct FailingAgent;

    impl Agent for FailingAgent {
        fn answer(&self, _query: &str, ctx: &VideoContext) -> Result<AgentFinding> {
            if ctx.video_id() == "v1" {
                Err(Error::invariant("synthetic failure"))
            } else {
                Ok(AgentFinding {
                    video_id: ctx.video_id().to_owned(),
                    windows: vec![Window {
                        interval: iv(0.0, 6.0),
                        score: 0.5,
                        snippet: "tune the guitar".into(),
                    }],
                })
            }
        }
    }

    #[test]
    fn pipeline_survives_per_video_failures() {
        let (index, contexts) = small_world();
        let q = EmbeddingVector::new(vec![0.7, 0.7]).unwrap();
        let out =
            run_pipeline("anything", &index, &contexts, &q, 2, &FailingAgent, 0.7, 2).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].video_id, "v1");
        assert_eq!(out.answer.steps.len(), 1);
    }

    #[test]
    fn pipeline_requires_context_coverage() {
        let (index, mut contexts) = small_world();
        contexts.remove("v2");
        let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let err = run_pipeline("x", &index, &contexts, &q, 1, &mock(0.5, 3), 0.7, 1).unwrap_err();
        assert!(err.to_string().contains("v2"));
    }
}
