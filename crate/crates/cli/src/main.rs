//! `avground`: one executable exposing every toolkit operation as a
//! subcommand with reproducible, canonical reports.
//!
//! Exit codes: 0 on success, 1 on evaluation-data errors (I/O, syntax,
//! schema, invariant violations), 2 on usage errors. No environment
//! variables affect results; configuration is flags only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use avground_core::agents::{run_pipeline, MockTranscriptAgent, VideoContext};
use avground_core::dataio;
use avground_core::embed::{default_embedder, HashedBowEmbedder};
use avground_core::error::{Error, Result};
use avground_core::model::{EmbeddingVector, QAItem};
use avground_core::mtgs::{collect_groundings, mtgs_avg, mtgs_per_query, MtgsReport};
use avground_core::retrieval::{recall_at_k, score_videos, RecallDenominator};
use avground_core::sfs::{
    select_frames, select_frames_free_endpoint, uniform_sample_indices, AffinityMatrix,
    DistanceMode, PenaltyKind, PenaltyParams,
};
use avground_core::stem::{stem_aggregate, stem_evaluate, StemReport};
use avground_core::text_metrics::{bleu4, cider_scores, text_sim, AlignmentReport, CiderVariant};

#[derive(Parser)]
#[command(
    name = "avground",
    version,
    about = "Multi-video grounded QA toolkit: frame selection, retrieval, pipeline, and metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predictions against ground truth
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Select k salient frames from per-frame embeddings
    SelectFrames(SelectFramesArgs),
    /// Rank indexed videos against a query embedding
    Retrieve(RetrieveArgs),
    /// Run the retrieval + per-video agents + aggregation pipeline
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Validate a data file against its schema, without evaluating
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Step-wise error metric over matched answer steps
    Stem(EvalStemArgs),
    /// Matched temporal grounding score
    Mtgs(EvalMtgsArgs),
    /// Recall@k over rankings and relevance judgments
    Retrieval(EvalRetrievalArgs),
    /// Response alignment: BLEU@4, CIDEr, text similarity
    Text(EvalTextArgs),
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Answer one query over an index plus transcript contexts
    Run(PipelineRunArgs),
}

#[derive(Args)]
struct EvalStemArgs {
    /// Ground-truth dataset (JSONL)
    #[arg(long)]
    gt: PathBuf,
    /// Predictions in the same schema (JSONL)
    #[arg(long)]
    pred: PathBuf,
    /// Text similarity threshold for step matching
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Include per-query breakdowns in the report
    #[arg(long)]
    per_query: bool,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalMtgsArgs {
    /// Ground-truth dataset (JSONL)
    #[arg(long)]
    gt: PathBuf,
    /// Predictions in the same schema (JSONL)
    #[arg(long)]
    pred: PathBuf,
    /// Include per-query and per-video breakdowns in the report
    #[arg(long)]
    per_query: bool,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    /// Relevance judgments (JSONL: {"id","relevant":[...]})
    #[arg(long)]
    qrels: PathBuf,
    /// System rankings (JSONL: {"id","ranking":[...]})
    #[arg(long)]
    rankings: PathBuf,
    /// Comma-separated recall cutoffs
    #[arg(long, default_value = "1,3,5")]
    k: String,
    /// Denominator for multi-relevant queries
    #[arg(long, value_enum, default_value_t = RecallDenominatorArg::Capped)]
    recall_denominator: RecallDenominatorArg,
    /// Include per-query breakdowns in the report
    #[arg(long)]
    per_query: bool,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalTextArgs {
    /// Ground-truth dataset (JSONL)
    #[arg(long)]
    gt: PathBuf,
    /// Predictions in the same schema (JSONL)
    #[arg(long)]
    pred: PathBuf,
    /// CIDEr formula variant
    #[arg(long, value_enum, default_value_t = CiderArg::D)]
    cider_variant: CiderArg,
    /// Include per-query breakdowns in the report
    #[arg(long)]
    per_query: bool,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectFramesArgs {
    /// Per-frame embeddings ({"schema_version","dim","frames":[[..],..]})
    #[arg(long)]
    frames: PathBuf,
    /// Optional second stream fused element-wise with --frames
    #[arg(long)]
    audio_frames: Option<PathBuf>,
    /// Number of frames to select
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Candidate count: files with more frames are uniformly subsampled
    #[arg(long, default_value_t = 75)]
    m: usize,
    /// Temporal separation penalty factor
    #[arg(long, default_value_t = 20.0)]
    gamma: f64,
    /// Penalty shape
    #[arg(long, value_enum, default_value_t = PenaltyArg::Sine)]
    penalty: PenaltyArg,
    /// Rate for the exp penalty
    #[arg(long)]
    lambda: Option<f64>,
    /// Use the literal integer index distance instead of |a-b|/m
    #[arg(long)]
    raw_index_distance: bool,
    /// Let the last selected frame float instead of pinning it at m
    #[arg(long)]
    free_endpoint: bool,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Retrieval index ({"schema_version","dim","videos":[..]})
    #[arg(long)]
    index: PathBuf,
    /// Query embedding: a frames file containing exactly one frame
    #[arg(long)]
    query_embedding: PathBuf,
    /// How many videos to return
    #[arg(long, default_value_t = 6)]
    topk: usize,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineRunArgs {
    /// Retrieval index
    #[arg(long)]
    index: PathBuf,
    /// Directory of transcript files (*.json), one per video
    #[arg(long)]
    contexts: PathBuf,
    /// The question to answer
    #[arg(long)]
    query: String,
    /// Query embedding: a frames file containing exactly one frame
    #[arg(long)]
    query_embedding: PathBuf,
    /// How many videos to retrieve and hand to agents
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Same-video windows above this IoU are deduplicated
    #[arg(long, default_value_t = 0.7)]
    dedupe_iou: f64,
    /// Minimum agent relevance score for a window
    #[arg(long, default_value_t = 0.25)]
    score_threshold: f64,
    /// Maximum windows each agent may return
    #[arg(long, default_value_t = 3)]
    max_windows: usize,
    /// Parallel agent invocations (output is identical for any value)
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record id for the emitted answer
    #[arg(long, default_value = "query")]
    id: String,
    /// Output prediction file (JSONL); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// File to check
    #[arg(long)]
    file: PathBuf,
    /// Which schema the file must satisfy
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Report file (canonical JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    Sine,
    Cosine,
    Exp,
    None,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(value: PenaltyArg) -> Self {
        match value {
            PenaltyArg::Sine => PenaltyKind::Sine,
            PenaltyArg::Cosine => PenaltyKind::Cosine,
            PenaltyArg::Exp => PenaltyKind::Exp,
            PenaltyArg::None => PenaltyKind::None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RecallDenominatorArg {
    Capped,
    Relevant,
}

impl From<RecallDenominatorArg> for RecallDenominator {
    fn from(value: RecallDenominatorArg) -> Self {
        match value {
            RecallDenominatorArg::Capped => RecallDenominator::Capped,
            RecallDenominatorArg::Relevant => RecallDenominator::Relevant,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CiderArg {
    D,
    Plain,
}

impl From<CiderArg> for CiderVariant {
    fn from(value: CiderArg) -> Self {
        match value {
            CiderArg::D => CiderVariant::D,
            CiderArg::Plain => CiderVariant::Plain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dataset,
    Index,
    Frames,
    Transcript,
    Qrels,
    Rankings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(EvalCommand::Stem(args)) => eval_stem(args),
        Command::Eval(EvalCommand::Mtgs(args)) => eval_mtgs(args),
        Command::Eval(EvalCommand::Retrieval(args)) => eval_retrieval(args),
        Command::Eval(EvalCommand::Text(args)) => eval_text(args),
        Command::SelectFrames(args) => select_frames_cmd(args),
        Command::Retrieve(args) => retrieve_cmd(args),
        Command::Pipeline(PipelineCommand::Run(args)) => pipeline_run(args),
        Command::Validate(args) => validate_cmd(args),
    }
}

fn emit_report(report: &Value, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => dataio::write_report(report, path),
        None => {
            print!("{}", dataio::canonical_json(report)?);
            Ok(())
        }
    }
}

fn fv(x: f64) -> Result<Value> {
    dataio::float_value(x)
}

/// Pairs every ground-truth record with the prediction of the same id.
/// Ids must match exactly in both directions so silent partial evaluation
/// cannot happen.
fn paired_records(gt_path: &Path, pred_path: &Path) -> Result<Vec<(QAItem, QAItem)>> {
    let gt = dataio::load_dataset(gt_path)?;
    let pred = dataio::load_dataset(pred_path)?;
    let mut pred_by_id: BTreeMap<String, QAItem> = pred
        .records
        .into_iter()
        .map(|r| (r.id().to_owned(), r))
        .collect();
    let mut pairs = Vec::with_capacity(gt.records.len());
    for gt_rec in gt.records {
        let pred_rec = pred_by_id
            .remove(gt_rec.id())
            .ok_or_else(|| Error::Invariant {
                path: Some(pred_path.display().to_string()),
                record: Some(gt_rec.id().to_owned()),
                field: None,
                message: "no prediction for this ground-truth record".to_owned(),
            })?;
        pairs.push((gt_rec, pred_rec));
    }
    if let Some(extra) = pred_by_id.keys().next() {
        return Err(Error::Invariant {
            path: Some(pred_path.display().to_string()),
            record: Some(extra.clone()),
            field: None,
            message: "prediction record has no ground-truth counterpart".to_owned(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::Invariant {
            path: Some(gt_path.display().to_string()),
            record: None,
            field: None,
            message: "dataset has no records".to_owned(),
        });
    }
    Ok(pairs)
}

fn require_steps(path: &Path, record: &QAItem) -> Result<()> {
    if record.steps().is_empty() {
        return Err(Error::Invariant {
            path: Some(path.display().to_string()),
            record: Some(record.id().to_owned()),
            field: Some("answer_steps".to_owned()),
            message: "ground-truth record has no steps".to_owned(),
        });
    }
    Ok(())
}

fn stem_fields(r: &StemReport) -> Result<Value> {
    Ok(json!({
        "sm": fv(r.sm)?,
        "sh": fv(r.sh)?,
        "so": fv(r.so)?,
        "sfp": fv(r.sfp)?,
        "sfn": fv(r.sfn)?,
        "s_iou_mean": fv(r.s_iou_mean)?,
        "raw": {
            "missing": r.missing,
            "hallucinated": r.hallucinated,
            "wrong_order": r.wrong_order,
            "grounding_fp": r.grounding_fp,
            "grounding_fn": r.grounding_fn,
            "iou_count": r.iou_values.len(),
        },
    }))
}

fn eval_stem(args: EvalStemArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.tau) {
        return Err(Error::usage(format!(
            "--tau must be in [0, 1], got {}",
            args.tau
        )));
    }
    let embedder = default_embedder();
    let pairs = paired_records(&args.gt, &args.pred)?;
    let mut reports = Vec::with_capacity(pairs.len());
    let mut per_query = Vec::new();
    for (gt_rec, pred_rec) in &pairs {
        require_steps(&args.gt, gt_rec)?;
        let report = stem_evaluate(gt_rec.steps(), pred_rec.steps(), args.tau, &embedder)?;
        if args.per_query {
            let mut entry = stem_fields(&report)?;
            entry["id"] = json!(gt_rec.id());
            per_query.push(entry);
        }
        reports.push(report);
    }
    let aggregate = stem_aggregate(&reports)?;

    let mut report = json!({
        "command": "eval-stem",
        "schema_version": dataio::SCHEMA_VERSION,
        "params": {
            "tau_s": fv(args.tau)?,
            "embedder": HashedBowEmbedder::VERSION,
        },
        "queries": pairs.len(),
        "aggregate": stem_fields(&aggregate)?,
    });
    if args.per_query {
        report["per_query"] = Value::Array(per_query);
    }
    emit_report(&report, args.out.as_deref())
}

fn mtgs_fields(r: &MtgsReport) -> Result<Value> {
    Ok(json!({
        "score": fv(r.score)?,
        "matched_ids": r.matched_ids.iter().collect::<Vec<_>>(),
        "gt_empty": r.gt_empty,
        "pred_empty": r.pred_empty,
    }))
}

fn eval_mtgs(args: EvalMtgsArgs) -> Result<()> {
    let pairs = paired_records(&args.gt, &args.pred)?;
    let mut reports = Vec::with_capacity(pairs.len());
    let mut per_query = Vec::new();
    for (gt_rec, pred_rec) in &pairs {
        let report = mtgs_per_query(
            &collect_groundings(gt_rec.steps()),
            &collect_groundings(pred_rec.steps()),
        );
        if args.per_query {
            let mut entry = mtgs_fields(&report)?;
            entry["id"] = json!(gt_rec.id());
            let mut per_video = serde_json::Map::new();
            for (vid, iou) in &report.per_video_iou {
                per_video.insert(vid.clone(), fv(*iou)?);
            }
            entry["per_video_iou"] = Value::Object(per_video);
            per_query.push(entry);
        }
        reports.push(report);
    }
    let avg = mtgs_avg(&reports)?;
    let flagged = reports
        .iter()
        .filter(|r| r.gt_empty || r.pred_empty)
        .count();

    let mut report = json!({
        "command": "eval-mtgs",
        "schema_version": dataio::SCHEMA_VERSION,
        "queries": reports.len(),
        "aggregate": {
            "mtgs_avg": fv(avg)?,
            "flagged_empty": flagged,
        },
    });
    if args.per_query {
        report["per_query"] = Value::Array(per_query);
    }
    emit_report(&report, args.out.as_deref())
}

fn parse_cutoffs(spec: &str) -> Result<Vec<usize>> {
    let ks = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::usage(format!("bad recall cutoff {s:?} in --k")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::usage("--k needs positive comma-separated cutoffs"));
    }
    Ok(ks)
}

fn eval_retrieval(args: EvalRetrievalArgs) -> Result<()> {
    let ks = parse_cutoffs(&args.k)?;
    let qrels = dataio::load_qrels(&args.qrels)?;
    let rankings = dataio::load_rankings(&args.rankings)?;
    let ranking_by_id: BTreeMap<&str, &Vec<String>> = rankings
        .records
        .iter()
        .map(|r| (r.id.as_str(), &r.ranking))
        .collect();

    if qrels.records.is_empty() {
        return Err(Error::Invariant {
            path: Some(args.qrels.display().to_string()),
            record: None,
            field: None,
            message: "qrels file has no records".to_owned(),
        });
    }
    let denominator: RecallDenominator = args.recall_denominator.into();
    let mut sums: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut per_query = Vec::new();
    for rec in &qrels.records {
        let ranking = ranking_by_id
            .get(rec.id.as_str())
            .ok_or_else(|| Error::Invariant {
                path: Some(args.rankings.display().to_string()),
                record: Some(rec.id.clone()),
                field: None,
                message: "no ranking for this qrels record".to_owned(),
            })?;
        let recalls = recall_at_k(ranking, &rec.relevant, &ks, denominator)?;
        if args.per_query {
            let mut entry = serde_json::Map::new();
            entry.insert("id".to_owned(), json!(rec.id));
            for (k, v) in &recalls {
                entry.insert(format!("r@{k}"), fv(*v)?);
            }
            per_query.push(Value::Object(entry));
        }
        for (k, v) in recalls {
            *sums.get_mut(&k).expect("cutoff present") += v;
        }
    }
    let queries = qrels.records.len();

    let mut aggregate = serde_json::Map::new();
    for (k, sum) in &sums {
        aggregate.insert(format!("r@{k}"), fv(sum / queries as f64)?);
    }
    let mut report = json!({
        "command": "eval-retrieval",
        "schema_version": dataio::SCHEMA_VERSION,
        "params": {
            "recall_denominator": match denominator {
                RecallDenominator::Capped => "capped",
                RecallDenominator::Relevant => "relevant",
            },
        },
        "queries": queries,
        "aggregate": Value::Object(aggregate),
    });
    if args.per_query {
        report["per_query"] = Value::Array(per_query);
    }
    emit_report(&report, args.out.as_deref())
}

/// A record's answer text: its step texts joined with newlines.
fn answer_text(record: &QAItem) -> String {
    record
        .steps()
        .iter()
        .map(|s| s.text())
        .collect::<Vec<_>>()
        .join("\n")
}

fn eval_text(args: EvalTextArgs) -> Result<()> {
    let pairs = paired_records(&args.gt, &args.pred)?;
    if pairs.len() < 2 {
        return Err(Error::Invariant {
            path: Some(args.gt.display().to_string()),
            record: None,
            field: None,
            message: "text evaluation needs at least 2 records (CIDEr document \
                      frequencies require a corpus)"
                .to_owned(),
        });
    }
    let embedder = default_embedder();
    let predictions: Vec<String> = pairs.iter().map(|(_, p)| answer_text(p)).collect();
    let references: Vec<String> = pairs.iter().map(|(g, _)| answer_text(g)).collect();

    let variant: CiderVariant = args.cider_variant.into();
    let bleu = bleu4(&predictions, &references)?;
    let cider_per_pair = cider_scores(&predictions, &references, variant)?;
    let sims = predictions
        .iter()
        .zip(&references)
        .map(|(p, r)| text_sim(p, r, &embedder))
        .collect::<Result<Vec<f64>>>()?;
    let alignment = AlignmentReport {
        bleu4: bleu,
        cider: cider_per_pair.iter().sum::<f64>() / cider_per_pair.len() as f64,
        text_sim: sims.iter().sum::<f64>() / sims.len() as f64,
    };

    let mut report = json!({
        "command": "eval-text",
        "schema_version": dataio::SCHEMA_VERSION,
        "params": {
            "cider_variant": match variant {
                CiderVariant::D => "d",
                CiderVariant::Plain => "plain",
            },
            "embedder": HashedBowEmbedder::VERSION,
        },
        "queries": pairs.len(),
        "aggregate": {
            "bleu4": fv(alignment.bleu4)?,
            "cider": fv(alignment.cider)?,
            "text_sim": fv(alignment.text_sim)?,
            "bleu4_x100": fv(alignment.bleu4_x100())?,
            "cider_x100": fv(alignment.cider_x100())?,
            "text_sim_x10": fv(alignment.text_sim_x10())?,
        },
    });
    if args.per_query {
        let mut per_query = Vec::new();
        for (((gt_rec, _), sim), cider_pair) in pairs.iter().zip(&sims).zip(&cider_per_pair) {
            per_query.push(json!({
                "id": gt_rec.id(),
                "text_sim": fv(*sim)?,
                "cider": fv(*cider_pair)?,
            }));
        }
        report["per_query"] = Value::Array(per_query);
    }
    emit_report(&report, args.out.as_deref())
}

fn select_frames_cmd(args: SelectFramesArgs) -> Result<()> {
    let mut frames = dataio::load_frame_embeddings(&args.frames)?;
    if let Some(audio_path) = &args.audio_frames {
        let audio = dataio::load_frame_embeddings(audio_path)?;
        if audio.len() != frames.len() {
            return Err(Error::Invariant {
                path: Some(audio_path.display().to_string()),
                record: None,
                field: None,
                message: format!(
                    "audio stream has {} frames but the visual stream has {}",
                    audio.len(),
                    frames.len()
                ),
            });
        }
        frames = frames
            .iter()
            .zip(&audio)
            .map(|(v, a)| a.hadamard(v))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.locate(Some(&args.frames.display().to_string()), None, None))?;
    }

    if args.m < 1 {
        return Err(Error::usage("--m must be >= 1"));
    }
    let total = frames.len();
    if total == 0 {
        return Err(Error::Invariant {
            path: Some(args.frames.display().to_string()),
            record: None,
            field: Some("frames".to_owned()),
            message: "frame file is empty".to_owned(),
        });
    }
    let m_used = args.m.min(total);
    let candidates = uniform_sample_indices(total, m_used)?;
    if args.k > m_used {
        return Err(Error::usage(format!(
            "cannot select k = {} frames from m = {m_used} candidates",
            args.k
        )));
    }
    let candidate_frames: Vec<EmbeddingVector> =
        candidates.iter().map(|&i| frames[i - 1].clone()).collect();

    let penalty = PenaltyParams {
        kind: args.penalty.into(),
        gamma: args.gamma,
        lambda: args.lambda,
    };
    let distance = if args.raw_index_distance {
        DistanceMode::RawIndex
    } else {
        DistanceMode::Normalized
    };
    let affinity = AffinityMatrix::build(&candidate_frames, penalty, distance)?;
    for warning in affinity.warnings() {
        eprintln!("warning: {warning}");
    }
    let plan = if args.free_endpoint {
        select_frames_free_endpoint(&affinity, args.k)?
    } else {
        select_frames(&affinity, args.k)?
    };
    let selected_original: Vec<usize> = plan.selected.iter().map(|&p| candidates[p - 1]).collect();

    let report = json!({
        "command": "select-frames",
        "schema_version": dataio::SCHEMA_VERSION,
        "params": {
            "k": args.k,
            "m": args.m,
            "gamma": fv(args.gamma)?,
            "penalty": PenaltyKind::from(args.penalty).as_str(),
            "lambda": match args.lambda {
                Some(l) => fv(l)?,
                None => Value::Null,
            },
            "raw_index_distance": args.raw_index_distance,
            "free_endpoint": args.free_endpoint,
        },
        "frames_total": total,
        "candidates_used": m_used,
        "candidate_frames": candidates,
        "selected_candidates": plan.selected,
        "selected_frames": selected_original,
        "chain_cost": fv(plan.total_cost)?,
        "warnings": affinity.warnings(),
    });
    emit_report(&report, args.out.as_deref())
}

/// Loads a query embedding from a frames file holding exactly one frame.
fn load_query_embedding(path: &Path) -> Result<EmbeddingVector> {
    let frames = dataio::load_frame_embeddings(path)?;
    if frames.len() != 1 {
        return Err(Error::Invariant {
            path: Some(path.display().to_string()),
            record: None,
            field: Some("frames".to_owned()),
            message: format!(
                "query embedding file must contain exactly one frame, found {}",
                frames.len()
            ),
        });
    }
    Ok(frames.into_iter().next().expect("length checked"))
}

fn retrieve_cmd(args: RetrieveArgs) -> Result<()> {
    let index = dataio::load_index(&args.index)?;
    let query = load_query_embedding(&args.query_embedding)?;
    let table = score_videos(&query, &index)?;
    let topk = table.top_k(args.topk)?;

    let mut scores = Vec::new();
    for s in table.scores() {
        scores.push(json!({
            "video_id": s.video_id,
            "s_av": fv(s.s_av)?,
            "s_cap": fv(s.s_cap)?,
            "sim_avg": fv(s.sim_avg)?,
        }));
    }
    let report = json!({
        "command": "retrieve",
        "schema_version": dataio::SCHEMA_VERSION,
        "params": {"topk": args.topk},
        "ranking": table.ranking(),
        "scores": scores,
        "topk": topk,
    });
    emit_report(&report, args.out.as_deref())
}

/// Loads every `*.json` transcript in the directory, keyed by video id.
fn load_contexts(dir: &Path) -> Result<BTreeMap<String, VideoContext>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Io {
            path: dir.display().to_string(),
            message: "no *.json transcript files found".to_owned(),
        });
    }
    let mut contexts = BTreeMap::new();
    for path in paths {
        let ctx = dataio::load_transcript(&path)?;
        let vid = ctx.video_id().to_owned();
        if contexts.insert(vid.clone(), ctx).is_some() {
            return Err(Error::Invariant {
                path: Some(path.display().to_string()),
                record: Some(vid),
                field: None,
                message: "another transcript already declares this video_id".to_owned(),
            });
        }
    }
    Ok(contexts)
}

fn pipeline_run(args: PipelineRunArgs) -> Result<()> {
    let index = dataio::load_index(&args.index)?;
    let contexts = load_contexts(&args.contexts)?;
    let query_embedding = load_query_embedding(&args.query_embedding)?;
    let agent =
        MockTranscriptAgent::new(default_embedder(), args.score_threshold, args.max_windows)?;

    let outcome = run_pipeline(
        &args.query,
        &index,
        &contexts,
        &query_embedding,
        args.k,
        &agent,
        args.dedupe_iou,
        args.workers,
    )?;

    for failure in &outcome.failures {
        eprintln!(
            "warning: agent failed for video {}: {}",
            failure.video_id, failure.message
        );
    }
    if outcome.answer.steps.is_empty() {
        eprintln!(
            "note: no grounded evidence found for the query across {} retrieved videos",
            outcome.retrieved.len()
        );
    }

    let record = outcome.answer.to_qa_item(&args.id, &args.query)?;
    let dataset = dataio::DatasetFile {
        records: vec![record],
    };
    match &args.out {
        Some(path) => dataio::write_dataset(path, &dataset),
        None => {
            print!("{}", dataio::dataset_to_jsonl(&dataset)?);
            Ok(())
        }
    }
}

fn validate_cmd(args: ValidateArgs) -> Result<()> {
    let records = match args.format {
        FormatArg::Dataset => dataio::load_dataset(&args.file)?.records.len(),
        FormatArg::Index => dataio::load_index(&args.file)?.len(),
        FormatArg::Frames => dataio::load_frame_embeddings(&args.file)?.len(),
        FormatArg::Transcript => dataio::load_transcript(&args.file)?.segments().len(),
        FormatArg::Qrels => dataio::load_qrels(&args.file)?.records.len(),
        FormatArg::Rankings => dataio::load_rankings(&args.file)?.records.len(),
    };
    let report = json!({
        "command": "validate",
        "schema_version": dataio::SCHEMA_VERSION,
        "file": args.file.display().to_string(),
        "format": match args.format {
            FormatArg::Dataset => "dataset",
            FormatArg::Index => "index",
            FormatArg::Frames => "frames",
            FormatArg::Transcript => "transcript",
            FormatArg::Qrels => "qrels",
            FormatArg::Rankings => "rankings",
        },
        "records": records,
        "valid": true,
    });
    emit_report(&report, args.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn cutoff_parsing() {
        assert_eq!(parse_cutoffs("1,3,5").unwrap(), vec![1, 3, 5]);
        assert_eq!(parse_cutoffs(" 2 , 4 ").unwrap(), vec![2, 4]);
        assert!(parse_cutoffs("0").is_err());
        assert!(parse_cutoffs("a").is_err());
        assert!(parse_cutoffs("").is_err());
    }
}
