//! Parsing, validation, and serialization of every file format the toolkit
//! exchanges.
//!
//! All formats are UTF-8 JSON. Line-delimited files (datasets, predictions,
//! qrels, rankings) start with a header line `{"schema_version":"1"}`;
//! single-object files (index, frame embeddings, transcripts) carry the same
//! field at the top level. Times are seconds as decimals everywhere;
//! `HH:MM:SS` strings are accepted at ingestion and converted.
//!
//! Every invariant declared on a domain type is enforced at load time, and
//! violations name the file, record id, and field involved. I/O, JSON
//! syntax, schema-version, and invariant violations are distinct error
//! classes (see [`crate::error::Error`]).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::agents::{TranscriptSegment, VideoContext};
use crate::error::{Error, Result};
use crate::model::{EmbeddingVector, Grounding, QAItem, Step, TimeInterval};
use crate::retrieval::{RetrievalIndex, VideoEntry};

pub const SCHEMA_VERSION: &str = "1";

// ---------------------------------------------------------------------------
// Wire structs
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: String,
}

/// Accepts `12.5` or `"HH:MM:SS"` / `"HH:MM:SS.fff"`.
fn deserialize_seconds<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(s) => parse_hhmmss(&s).ok_or_else(|| {
            serde::de::Error::custom(format!("expected seconds or HH:MM:SS, got {s:?}"))
        }),
    }
}

/// `HH:MM:SS` (optionally with fractional seconds) to seconds.
pub fn parse_hhmmss(s: &str) -> Option<f64> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    if parts.len() != 3 {
        return None;
    }
    let hours: u32 = parts[0].parse().ok()?;
    let minutes: u32 = parts[1].parse().ok()?;
    let seconds: f64 = parts[2].parse().ok()?;
    if minutes >= 60 || !(0.0..60.0).contains(&seconds) {
        return None;
    }
    Some(f64::from(hours) * 3600.0 + f64::from(minutes) * 60.0 + seconds)
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundingRec {
    video_id: String,
    #[serde(deserialize_with = "deserialize_seconds")]
    start_s: f64,
    #[serde(deserialize_with = "deserialize_seconds")]
    end_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRec {
    index: usize,
    text: String,
    groundings: Vec<GroundingRec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QaRec {
    id: String,
    question: String,
    answer_steps: Vec<StepRec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    schema_version: String,
    dim: usize,
    videos: Vec<VideoRec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct VideoRec {
    video_id: String,
    av: Vec<f64>,
    caption: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FramesFile {
    schema_version: String,
    dim: usize,
    frames: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptFile {
    schema_version: String,
    video_id: String,
    segments: Vec<SegmentRec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRec {
    #[serde(deserialize_with = "deserialize_seconds")]
    start_s: f64,
    #[serde(deserialize_with = "deserialize_seconds")]
    end_s: f64,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct QrelsRec {
    id: String,
    relevant: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankingRec {
    id: String,
    ranking: Vec<String>,
}

// ---------------------------------------------------------------------------
// Low-level file helpers
// ---------------------------------------------------------------------------

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Parses a JSONL file: a header line, then one record per non-empty line.
/// Returns `(line_number, record)` pairs for error reporting.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = read_text(path)?;
    let path_str = path.display().to_string();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    // A first line that is not a well-formed header counts as a missing
    // schema declaration, whatever else it may be.
    let (_, header_text) = lines.next().ok_or_else(|| Error::SchemaVersion {
        path: path_str.clone(),
        found: None,
    })?;
    let header: Header = serde_json::from_str(header_text).map_err(|_| Error::SchemaVersion {
        path: path_str.clone(),
        found: None,
    })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path_str,
            found: Some(header.schema_version),
        });
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let record: T = serde_json::from_str(line).map_err(|e| Error::Syntax {
            path: path_str.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

fn jsonl_string<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = serde_json::to_string(&Header {
        schema_version: SCHEMA_VERSION.to_owned(),
    })
    .expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::invariant(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_text(path, &jsonl_string(records)?)
}

/// Parses a single-object JSON file after checking its schema_version field.
fn read_single<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let path_str = path.display().to_string();
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Syntax {
        path: path_str.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let version = value.get("schema_version").and_then(Value::as_str);
    if version != Some(SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            path: path_str,
            found: version.map(str::to_owned),
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Syntax {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

fn write_single<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

// ---------------------------------------------------------------------------
// Datasets and predictions
// ---------------------------------------------------------------------------

/// A loaded dataset or prediction file: validated records with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub records: Vec<QAItem>,
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let path_str = path.display().to_string();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut records = Vec::new();
    for (line, rec) in read_jsonl::<QaRec>(path)? {
        let item = qa_from_rec(rec).map_err(|e| e.locate(Some(&path_str), None, None))?;
        if !seen.insert(item.id().to_owned()) {
            return Err(Error::Invariant {
                path: Some(path_str),
                record: Some(item.id().to_owned()),
                field: Some("id".to_owned()),
                message: format!("duplicate record id on line {line}"),
            });
        }
        records.push(item);
    }
    Ok(DatasetFile { records })
}

pub fn write_dataset(path: &Path, dataset: &DatasetFile) -> Result<()> {
    write_text(path, &dataset_to_jsonl(dataset)?)
}

/// The exact bytes `write_dataset` would produce, for writing elsewhere.
pub fn dataset_to_jsonl(dataset: &DatasetFile) -> Result<String> {
    let recs: Vec<QaRec> = dataset.records.iter().map(qa_to_rec).collect();
    jsonl_string(&recs)
}

fn qa_from_rec(rec: QaRec) -> Result<QAItem> {
    let record_id = rec.id.clone();
    let mut steps = Vec::with_capacity(rec.answer_steps.len());
    for (si, step) in rec.answer_steps.into_iter().enumerate() {
        let mut groundings = Vec::with_capacity(step.groundings.len());
        for (gi, g) in step.groundings.into_iter().enumerate() {
            let field = format!("answer_steps[{si}].groundings[{gi}]");
            let interval = TimeInterval::new(g.start_s, g.end_s)
                .map_err(|e| e.locate(None, Some(&record_id), Some(&field)))?;
            groundings.push(
                Grounding::new(g.video_id, interval)
                    .map_err(|e| e.locate(None, Some(&record_id), Some(&field)))?,
            );
        }
        steps.push(
            Step::new(step.index, step.text, groundings).map_err(|e| {
                e.locate(None, Some(&record_id), Some(&format!("answer_steps[{si}]")))
            })?,
        );
    }
    QAItem::new(rec.id, rec.question, steps).map_err(|e| e.locate(None, Some(&record_id), None))
}

fn qa_to_rec(item: &QAItem) -> QaRec {
    QaRec {
        id: item.id().to_owned(),
        question: item.question().to_owned(),
        answer_steps: item
            .steps()
            .iter()
            .map(|s| StepRec {
                index: s.index(),
                text: s.text().to_owned(),
                groundings: s
                    .groundings()
                    .iter()
                    .map(|g| GroundingRec {
                        video_id: g.video_id().to_owned(),
                        start_s: g.interval().start_s(),
                        end_s: g.interval().end_s(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Retrieval index
// ---------------------------------------------------------------------------

pub fn load_index(path: &Path) -> Result<RetrievalIndex> {
    let path_str = path.display().to_string();
    let file: IndexFile = read_single(path)?;
    let mut entries = Vec::with_capacity(file.videos.len());
    for (vi, v) in file.videos.into_iter().enumerate() {
        let vid = v.video_id.clone();
        let mk = |name: &str, values: Vec<f64>| {
            EmbeddingVector::new(values).map_err(|e| {
                e.locate(
                    Some(&path_str),
                    Some(&vid),
                    Some(&format!("videos[{vi}].{name}")),
                )
            })
        };
        entries.push(VideoEntry {
            video_id: v.video_id,
            av: mk("av", v.av)?,
            caption: mk("caption", v.caption)?,
        });
    }
    RetrievalIndex::new(file.dim, entries).map_err(|e| e.locate(Some(&path_str), None, None))
}

pub fn write_index(path: &Path, index: &RetrievalIndex) -> Result<()> {
    let file = IndexFile {
        schema_version: SCHEMA_VERSION.to_owned(),
        dim: index.dim(),
        videos: index
            .entries()
            .iter()
            .map(|e| VideoRec {
                video_id: e.video_id.clone(),
                av: e.av.values().to_vec(),
                caption: e.caption.values().to_vec(),
            })
            .collect(),
    };
    write_single(path, &file)
}

// ---------------------------------------------------------------------------
// Frame embeddings
// ---------------------------------------------------------------------------

pub fn load_frame_embeddings(path: &Path) -> Result<Vec<EmbeddingVector>> {
    let path_str = path.display().to_string();
    let file: FramesFile = read_single(path)?;
    if file.dim == 0 {
        return Err(Error::Invariant {
            path: Some(path_str),
            record: None,
            field: Some("dim".to_owned()),
            message: "dimension must be >= 1".to_owned(),
        });
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    for (i, values) in file.frames.into_iter().enumerate() {
        if values.len() != file.dim {
            return Err(Error::Invariant {
                path: Some(path_str),
                record: None,
                field: Some(format!("frames[{i}]")),
                message: format!(
                    "frame has dimension {}, expected {}",
                    values.len(),
                    file.dim
                ),
            });
        }
        frames.push(
            EmbeddingVector::new(values)
                .map_err(|e| e.locate(Some(&path_str), None, Some(&format!("frames[{i}]"))))?,
        );
    }
    Ok(frames)
}

pub fn write_frame_embeddings(path: &Path, frames: &[EmbeddingVector]) -> Result<()> {
    let dim = frames.first().map_or(1, EmbeddingVector::dim);
    if let Some(f) = frames.iter().find(|f| f.dim() != dim) {
        return Err(Error::invariant(format!(
            "cannot write frames of mixed dimension ({} vs {dim})",
            f.dim()
        )));
    }
    let file = FramesFile {
        schema_version: SCHEMA_VERSION.to_owned(),
        dim,
        frames: frames.iter().map(|f| f.values().to_vec()).collect(),
    };
    write_single(path, &file)
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

pub fn load_transcript(path: &Path) -> Result<VideoContext> {
    let path_str = path.display().to_string();
    let file: TranscriptFile = read_single(path)?;
    let vid = file.video_id.clone();
    let mut segments = Vec::with_capacity(file.segments.len());
    for (i, seg) in file.segments.into_iter().enumerate() {
        let interval = TimeInterval::new(seg.start_s, seg.end_s)
            .map_err(|e| e.locate(Some(&path_str), Some(&vid), Some(&format!("segments[{i}]"))))?;
        segments.push(TranscriptSegment {
            interval,
            text: seg.text,
        });
    }
    VideoContext::new(file.video_id, segments)
        .map_err(|e| e.locate(Some(&path_str), Some(&vid), Some("segments")))
}

pub fn write_transcript(path: &Path, ctx: &VideoContext) -> Result<()> {
    let file = TranscriptFile {
        schema_version: SCHEMA_VERSION.to_owned(),
        video_id: ctx.video_id().to_owned(),
        segments: ctx
            .segments()
            .iter()
            .map(|s| SegmentRec {
                start_s: s.interval.start_s(),
                end_s: s.interval.end_s(),
                text: s.text.clone(),
            })
            .collect(),
    };
    write_single(path, &file)
}

// ---------------------------------------------------------------------------
// Qrels and rankings
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct QrelRecord {
    pub id: String,
    pub relevant: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrelsFile {
    pub records: Vec<QrelRecord>,
}

pub fn load_qrels(path: &Path) -> Result<QrelsFile> {
    let path_str = path.display().to_string();
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for (line, rec) in read_jsonl::<QrelsRec>(path)? {
        let make_err = |field: &str, message: String| Error::Invariant {
            path: Some(path_str.clone()),
            record: Some(rec.id.clone()),
            field: Some(field.to_owned()),
            message,
        };
        if rec.id.trim().is_empty() {
            return Err(make_err("id", format!("empty id on line {line}")));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(make_err(
                "id",
                format!("duplicate record id on line {line}"),
            ));
        }
        let relevant: BTreeSet<String> = rec
            .relevant
            .iter()
            .map(|v| v.trim().to_owned())
            .filter(|v| !v.is_empty())
            .collect();
        if relevant.is_empty() {
            return Err(make_err(
                "relevant",
                "relevant set must be non-empty".to_owned(),
            ));
        }
        records.push(QrelRecord {
            id: rec.id,
            relevant,
        });
    }
    Ok(QrelsFile { records })
}

pub fn write_qrels(path: &Path, qrels: &QrelsFile) -> Result<()> {
    let recs: Vec<QrelsRec> = qrels
        .records
        .iter()
        .map(|r| QrelsRec {
            id: r.id.clone(),
            relevant: r.relevant.iter().cloned().collect(),
        })
        .collect();
    write_jsonl(path, &recs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRecord {
    pub id: String,
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingsFile {
    pub records: Vec<RankingRecord>,
}

pub fn load_rankings(path: &Path) -> Result<RankingsFile> {
    let path_str = path.display().to_string();
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for (line, rec) in read_jsonl::<RankingRec>(path)? {
        let make_err = |field: &str, message: String| Error::Invariant {
            path: Some(path_str.clone()),
            record: Some(rec.id.clone()),
            field: Some(field.to_owned()),
            message,
        };
        if rec.id.trim().is_empty() {
            return Err(make_err("id", format!("empty id on line {line}")));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(make_err(
                "id",
                format!("duplicate record id on line {line}"),
            ));
        }
        let ranking: Vec<String> = rec.ranking.iter().map(|v| v.trim().to_owned()).collect();
        if ranking.is_empty() {
            return Err(make_err("ranking", "ranking must be non-empty".to_owned()));
        }
        let mut unique = BTreeSet::new();
        for (i, vid) in ranking.iter().enumerate() {
            if vid.is_empty() {
                return Err(make_err(
                    &format!("ranking[{i}]"),
                    "empty video id".to_owned(),
                ));
            }
            if !unique.insert(vid.as_str()) {
                return Err(make_err(
                    &format!("ranking[{i}]"),
                    format!("video id {vid:?} appears twice in the ranking"),
                ));
            }
        }
        records.push(RankingRecord {
            id: rec.id,
            ranking,
        });
    }
    Ok(RankingsFile { records })
}

pub fn write_rankings(path: &Path, rankings: &RankingsFile) -> Result<()> {
    let recs: Vec<RankingRec> = rankings
        .records
        .iter()
        .map(|r| RankingRec {
            id: r.id.clone(),
            ranking: r.ranking.clone(),
        })
        .collect();
    write_jsonl(path, &recs)
}

// ---------------------------------------------------------------------------
// Reference strings
// ---------------------------------------------------------------------------

/// Parses the comma-separated reference-string form, e.g.
/// `"1.txt 0017s > 0074s, 8.txt 0045s > 0270s"`, into groundings.
/// Zero-padded integers and extra whitespace are accepted.
pub fn parse_reference_string(s: &str) -> Result<Vec<Grounding>> {
    let mut out = Vec::new();
    for (pos, entry) in s.split(',').enumerate() {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let nth = pos + 1;
        let bad = |token: &str, expected: &str| {
            Error::invariant(format!(
                "reference entry {nth} ({entry:?}): token {token:?} is not {expected}"
            ))
        };
        let tokens: Vec<&str> = entry.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(Error::invariant(format!(
                "reference entry {nth} ({entry:?}): expected '<video>.txt <start>s > <end>s'"
            )));
        }
        let video_id = tokens[0]
            .strip_suffix(".txt")
            .ok_or_else(|| bad(tokens[0], "a '<video>.txt' name"))?;
        if video_id.is_empty() {
            return Err(bad(tokens[0], "a non-empty video name"));
        }
        let parse_secs = |token: &str| -> Result<f64> {
            token
                .strip_suffix('s')
                .and_then(|t| t.parse::<u64>().ok())
                .map(|v| v as f64)
                .ok_or_else(|| bad(token, "a seconds value like '0017s'"))
        };
        let start = parse_secs(tokens[1])?;
        if tokens[2] != ">" {
            return Err(bad(tokens[2], "the '>' separator"));
        }
        let end = parse_secs(tokens[3])?;
        let interval = TimeInterval::new(start, end)
            .map_err(|e| Error::invariant(format!("reference entry {nth} ({entry:?}): {e}")))?;
        out.push(Grounding::new(video_id, interval)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Canonical reports
// ---------------------------------------------------------------------------

/// Builds a JSON number from a float, rejecting non-finite values before
/// they can reach a report.
pub fn float_value(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| Error::invariant(format!("report value {x} is not finite")))
}

/// Renders a report deterministically: keys sorted lexicographically,
/// floats with exactly 6 decimal places, integers plain, two-space indent.
/// Identical inputs produce identical bytes on every platform.
pub fn canonical_json(value: &Value) -> Result<String> {
    let mut out = String::new();
    fmt_value(value, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn fmt_value(value: &Value, indent: usize, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                let f = n.as_f64().expect("number is u64, i64, or f64");
                if !f.is_finite() {
                    return Err(Error::invariant(format!("report value {f} is not finite")));
                }
                let _ = write!(out, "{f:.6}");
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings serialize"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    fmt_value(item, indent + 1, out)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
            } else {
                out.push('{');
                // serde_json's default map is a BTreeMap, so iteration is
                // already in lexicographic key order.
                for (i, (key, item)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                    out.push_str(": ");
                    fmt_value(item, indent + 1, out)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
    Ok(())
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes a canonical report to `path`.
pub fn write_report(value: &Value, path: &Path) -> Result<()> {
    write_text(path, &canonical_json(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use tempfile::tempdir;

    fn tmpfile(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, content).unwrap();
        path
    }

    const DATASET: &str = concat!(
        "{\"schema_version\":\"1\"}\n",
        "{\"id\":\"q1\",\"question\":\"how?\",\"answer_steps\":[{\"index\":1,\"text\":\"crack eggs\",\"groundings\":[{\"video_id\":\"v1\",\"start_s\":0,\"end_s\":10}]}]}\n",
        "{\"id\":\"q2\",\"question\":\"when?\",\"answer_steps\":[{\"index\":1,\"text\":\"heat pan\",\"groundings\":[]}]}\n",
    );

    #[test]
    fn dataset_roundtrip() {
        let dir = tempdir().unwrap();
        let path = tmpfile(&dir, "d.jsonl", DATASET);
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.records[0].id(), "q1");
        assert_eq!(ds.records[0].steps()[0].groundings()[0].video_id(), "v1");

        let out = dir.path().join("out.jsonl");
        write_dataset(&out, &ds).unwrap();
        assert_eq!(load_dataset(&out).unwrap(), ds);
    }

    #[test]
    fn dataset_missing_header_is_schema_error() {
        let dir = tempdir().unwrap();
        let path = tmpfile(
            &dir,
            "d.jsonl",
            "{\"id\":\"q1\",\"question\":\"?\",\"answer_steps\":[]}\n",
        );
        assert!(matches!(
            load_dataset(&path).unwrap_err(),
            Error::SchemaVersion { .. }
        ));
    }

    #[test]
    fn dataset_wrong_version_is_schema_error() {
        let dir = tempdir().unwrap();
        let path = tmpfile(&dir, "d.jsonl", "{\"schema_version\":\"2\"}\n");
        assert!(matches!(
            load_dataset(&path).unwrap_err(),
            Error::SchemaVersion { found: Some(v), .. } if v == "2"
        ));
    }

    #[test]
    fn dataset_bad_json_is_syntax_error() {
        let dir = tempdir().unwrap();
        let path = tmpfile(&dir, "d.jsonl", "{\"schema_version\":\"1\"}\n{nope\n");
        assert!(matches!(
            load_dataset(&path).unwrap_err(),
            Error::Syntax { line: 2, .. }
        ));
    }

    #[test]
    fn dataset_inverted_interval_cites_record() {
        let dir = tempdir().unwrap();
        let path = tmpfile(
            &dir,
            "d.jsonl",
            concat!(
                "{\"schema_version\":\"1\"}\n",
                "{\"id\":\"q9\",\"question\":\"?\",\"answer_steps\":[{\"index\":1,\"text\":\"x\",\"groundings\":[{\"video_id\":\"v1\",\"start_s\":10,\"end_s\":5}]}]}\n",
            ),
        );
        let err = load_dataset(&path).unwrap_err();
        let text = err.to_string();
        assert!(matches!(err, Error::Invariant { .. }));
        assert!(text.contains("q9"));
        assert!(text.contains("groundings[0]"));
    }

    #[test]
    fn dataset_duplicate_id_rejected() {
        let dir = tempdir().unwrap();
        let rec = "{\"id\":\"q1\",\"question\":\"?\",\"answer_steps\":[]}";
        let path = tmpfile(
            &dir,
            "d.jsonl",
            &format!("{{\"schema_version\":\"1\"}}\n{rec}\n{rec}\n"),
        );
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn dataset_accepts_hhmmss_times() {
        let dir = tempdir().unwrap();
        let path = tmpfile(
            &dir,
            "d.jsonl",
            concat!(
                "{\"schema_version\":\"1\"}\n",
                "{\"id\":\"q1\",\"question\":\"?\",\"answer_steps\":[{\"index\":1,\"text\":\"x\",\"groundings\":[{\"video_id\":\"v1\",\"start_s\":\"00:01:10\",\"end_s\":\"00:02:00.5\"}]}]}\n",
            ),
        );
        let ds = load_dataset(&path).unwrap();
        let g = &ds.records[0].steps()[0].groundings()[0];
        assert_eq!(g.interval().start_s(), 70.0);
        assert_eq!(g.interval().end_s(), 120.5);
    }

    #[test]
    fn hhmmss_parsing() {
        assert_eq!(parse_hhmmss("00:00:03"), Some(3.0));
        assert_eq!(parse_hhmmss("01:02:03"), Some(3723.0));
        assert_eq!(parse_hhmmss("00:00:03.25"), Some(3.25));
        assert_eq!(parse_hhmmss("00:61:00"), None);
        assert_eq!(parse_hhmmss("0:03"), None);
        assert_eq!(parse_hhmmss("nope"), None);
    }

    #[test]
    fn index_roundtrip_and_dimension_error() {
        let dir = tempdir().unwrap();
        let good = tmpfile(
            &dir,
            "i.json",
            "{\"schema_version\":\"1\",\"dim\":2,\"videos\":[{\"video_id\":\"v1\",\"av\":[1.0,0.0],\"caption\":[0.5,0.5]}]}",
        );
        let index = load_index(&good).unwrap();
        assert_eq!(index.len(), 1);
        let out = dir.path().join("o.json");
        write_index(&out, &index).unwrap();
        assert_eq!(load_index(&out).unwrap(), index);

        let bad = tmpfile(
            &dir,
            "bad.json",
            "{\"schema_version\":\"1\",\"dim\":2,\"videos\":[{\"video_id\":\"v7\",\"av\":[1.0],\"caption\":[0.5,0.5]}]}",
        );
        let err = load_index(&bad).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
        assert!(err.to_string().contains("v7"));
    }

    #[test]
    fn frames_roundtrip_and_mismatch() {
        let dir = tempdir().unwrap();
        let good = tmpfile(
            &dir,
            "f.json",
            "{\"schema_version\":\"1\",\"dim\":2,\"frames\":[[1.0,2.0],[3.0,4.0]]}",
        );
        let frames = load_frame_embeddings(&good).unwrap();
        assert_eq!(frames.len(), 2);
        let out = dir.path().join("o.json");
        write_frame_embeddings(&out, &frames).unwrap();
        assert_eq!(load_frame_embeddings(&out).unwrap(), frames);

        let bad = tmpfile(
            &dir,
            "b.json",
            "{\"schema_version\":\"1\",\"dim\":2,\"frames\":[[1.0,2.0],[3.0]]}",
        );
        let err = load_frame_embeddings(&bad).unwrap_err();
        assert!(err.to_string().contains("frames[1]"));
    }

    #[test]
    fn transcript_roundtrip_and_order_check() {
        let dir = tempdir().unwrap();
        let good = tmpfile(
            &dir,
            "t.json",
            "{\"schema_version\":\"1\",\"video_id\":\"v1\",\"segments\":[{\"start_s\":0,\"end_s\":5,\"text\":\"hello\"},{\"start_s\":5,\"end_s\":9,\"text\":\"world\"}]}",
        );
        let ctx = load_transcript(&good).unwrap();
        assert_eq!(ctx.video_id(), "v1");
        assert_eq!(ctx.segments().len(), 2);
        let out = dir.path().join("o.json");
        write_transcript(&out, &ctx).unwrap();
        assert_eq!(load_transcript(&out).unwrap(), ctx);

        let bad = tmpfile(
            &dir,
            "b.json",
            "{\"schema_version\":\"1\",\"video_id\":\"v1\",\"segments\":[{\"start_s\":5,\"end_s\":9,\"text\":\"b\"},{\"start_s\":0,\"end_s\":5,\"text\":\"a\"}]}",
        );
        assert!(load_transcript(&bad).is_err());
    }

    #[test]
    fn qrels_and_rankings_validation() {
        let dir = tempdir().unwrap();
        let q = tmpfile(
            &dir,
            "q.jsonl",
            "{\"schema_version\":\"1\"}\n{\"id\":\"q1\",\"relevant\":[\"v1\",\"v2\"]}\n",
        );
        let qrels = load_qrels(&q).unwrap();
        assert_eq!(qrels.records[0].relevant.len(), 2);
        let out = dir.path().join("qo.jsonl");
        write_qrels(&out, &qrels).unwrap();
        assert_eq!(load_qrels(&out).unwrap(), qrels);

        let empty = tmpfile(
            &dir,
            "qe.jsonl",
            "{\"schema_version\":\"1\"}\n{\"id\":\"q1\",\"relevant\":[]}\n",
        );
        assert!(load_qrels(&empty)
            .unwrap_err()
            .to_string()
            .contains("non-empty"));

        let r = tmpfile(
            &dir,
            "r.jsonl",
            "{\"schema_version\":\"1\"}\n{\"id\":\"q1\",\"ranking\":[\"v2\",\"v1\"]}\n",
        );
        let rankings = load_rankings(&r).unwrap();
        let out = dir.path().join("ro.jsonl");
        write_rankings(&out, &rankings).unwrap();
        assert_eq!(load_rankings(&out).unwrap(), rankings);

        let dup = tmpfile(
            &dir,
            "rd.jsonl",
            "{\"schema_version\":\"1\"}\n{\"id\":\"q1\",\"ranking\":[\"v1\",\"v1\"]}\n",
        );
        assert!(load_rankings(&dup)
            .unwrap_err()
            .to_string()
            .contains("twice"));
    }

    #[test]
    fn reference_string_paper_forms() {
        let gs = parse_reference_string("1.txt 0017s > 0074s").unwrap();
        assert_eq!(gs.len(), 1);
        assert_eq!(gs[0].video_id(), "1");
        assert_eq!(gs[0].interval().start_s(), 17.0);
        assert_eq!(gs[0].interval().end_s(), 74.0);

        assert!(parse_reference_string("").unwrap().is_empty());
        assert!(parse_reference_string("   ").unwrap().is_empty());

        let gs = parse_reference_string("2.txt 0050s > 0100s, 3.txt 0110s > 0150s").unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].video_id(), "2");
        assert_eq!(gs[0].interval().start_s(), 50.0);
        assert_eq!(gs[0].interval().end_s(), 100.0);
        assert_eq!(gs[1].video_id(), "3");
        assert_eq!(gs[1].interval().start_s(), 110.0);
        assert_eq!(gs[1].interval().end_s(), 150.0);
    }

    #[test]
    fn reference_string_errors_name_token_and_position() {
        let err = parse_reference_string("1.txt 0017s > 0074s, 3txt 0110s > 0150s").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("entry 2"));
        assert!(text.contains("3txt"));

        let err = parse_reference_string("1.txt 17 > 74s").unwrap_err();
        assert!(err.to_string().contains("\"17\""));

        let err = parse_reference_string("1.txt 0074s > 0017s").unwrap_err();
        assert!(err.to_string().contains("entry 1"));
    }

    #[test]
    fn canonical_json_is_sorted_and_six_decimal() {
        let v = json!({
            "zeta": 1,
            "alpha": 0.5,
            "nested": {"b": [1.0, 2], "a": "text"},
            "empty_list": [],
            "empty_obj": {},
        });
        let text = canonical_json(&v).unwrap();
        let alpha_pos = text.find("\"alpha\"").unwrap();
        let zeta_pos = text.find("\"zeta\"").unwrap();
        assert!(alpha_pos < zeta_pos);
        assert!(text.contains("0.500000"));
        assert!(text.contains("\"b\": ["));
        assert!(text.contains("1.000000"));
        assert!(text.ends_with("}\n"));
        // Integers stay integers.
        assert!(text.contains("\"zeta\": 1"));
    }

    #[test]
    fn canonical_json_deterministic() {
        let v = json!({"a": 1.0/3.0, "b": [0.1, 0.2, {"c": true}]});
        assert_eq!(canonical_json(&v).unwrap(), canonical_json(&v).unwrap());
        assert!(canonical_json(&v).unwrap().contains("0.333333"));
    }

    #[test]
    fn float_value_rejects_non_finite() {
        assert!(float_value(f64::NAN).is_err());
        assert!(float_value(f64::INFINITY).is_err());
        assert!(float_value(0.5).is_ok());
    }

    #[test]
    fn write_report_bytes_stable() {
        let dir = tempdir().unwrap();
        let v = json!({"score": 2.0/3.0, "count": 3});
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        write_report(&v, &p1).unwrap();
        write_report(&v, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset(Path::new("/nonexistent/nope.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
