//! Response-alignment scoring: corpus BLEU@4, CIDEr, and embedding-cosine
//! text similarity.
//!
//! Tokenization is fixed (lowercase, split on non-alphanumeric runs) and all
//! reductions iterate in deterministic order, so scores are bit-stable.

use std::collections::BTreeMap;

use crate::embed::{tokenize, TextEmbedder};
use crate::error::{Error, Result};

const MAX_NGRAM: usize = 4;

/// Gaussian length-penalty sigma used by the CIDEr-D variant.
const CIDER_SIGMA: f64 = 6.0;

/// Raw metric values plus the conventional scaled views used in result
/// tables (BLEU and CIDEr x100, text similarity x10). The raw values are
/// canonical; the views are display only.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub bleu4: f64,
    pub cider: f64,
    pub text_sim: f64,
}

impl AlignmentReport {
    pub fn bleu4_x100(&self) -> f64 {
        self.bleu4 * 100.0
    }

    pub fn cider_x100(&self) -> f64 {
        self.cider * 100.0
    }

    pub fn text_sim_x10(&self) -> f64 {
        self.text_sim * 10.0
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], u64> {
    let mut counts: BTreeMap<&[String], u64> = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_default() += 1;
        }
    }
    counts
}

fn check_corpus<S: AsRef<str>, T: AsRef<str>>(predictions: &[S], references: &[T]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::usage("metric corpus must be non-empty"));
    }
    if predictions.len() != references.len() {
        return Err(Error::usage(format!(
            "predictions ({}) and references ({}) must be pairwise aligned",
            predictions.len(),
            references.len()
        )));
    }
    Ok(())
}

/// Corpus-level BLEU with uniform weights over 1..4-gram modified precisions
/// and the standard brevity penalty. No smoothing: a zero precision at any
/// order yields a corpus score of 0.
pub fn bleu4<S: AsRef<str>, T: AsRef<str>>(predictions: &[S], references: &[T]) -> Result<f64> {
    check_corpus(predictions, references)?;
    let mut clipped = [0u64; MAX_NGRAM];
    let mut totals = [0u64; MAX_NGRAM];
    let mut pred_len = 0u64;
    let mut ref_len = 0u64;

    for (pred, reference) in predictions.iter().zip(references) {
        let p = tokenize(pred.as_ref());
        let r = tokenize(reference.as_ref());
        pred_len += p.len() as u64;
        ref_len += r.len() as u64;
        for n in 1..=MAX_NGRAM {
            let pc = ngram_counts(&p, n);
            let rc = ngram_counts(&r, n);
            for (gram, &count) in &pc {
                clipped[n - 1] += count.min(rc.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += pc.values().sum::<u64>();
        }
    }

    let mut log_sum = 0.0;
    for n in 0..MAX_NGRAM {
        if totals[n] == 0 || clipped[n] == 0 {
            return Ok(0.0);
        }
        log_sum += (clipped[n] as f64 / totals[n] as f64).ln();
    }
    let brevity = if pred_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / pred_len as f64).exp()
    };
    Ok(brevity * (log_sum / MAX_NGRAM as f64).exp())
}

/// Which CIDEr formula to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiderVariant {
    /// Consensus scoring with clipped candidate counts and a Gaussian
    /// sentence-length penalty (sigma = 6); the usual reporting convention.
    #[default]
    D,
    /// The unclipped, unpenalized original formula.
    Plain,
}

/// CIDEr over aligned prediction/reference pairs: per n in 1..4, TF-IDF
/// n-gram vectors with IDF taken from the reference corpus, cosine per n,
/// mean over n, x10; the corpus score is the mean over pairs. Defaults to
/// the [`CiderVariant::D`] formula.
///
/// IDF needs a corpus, so fewer than two pairs are rejected.
pub fn cider<S: AsRef<str>, T: AsRef<str>>(predictions: &[S], references: &[T]) -> Result<f64> {
    cider_with(predictions, references, CiderVariant::D)
}

pub fn cider_with<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    references: &[T],
    variant: CiderVariant,
) -> Result<f64> {
    let scores = cider_scores(predictions, references, variant)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Per-pair CIDEr scores, in corpus order.
pub fn cider_scores<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    references: &[T],
    variant: CiderVariant,
) -> Result<Vec<f64>> {
    check_corpus(predictions, references)?;
    if predictions.len() < 2 {
        return Err(Error::usage(
            "CIDEr needs a corpus of at least 2 prediction/reference pairs so document \
             frequencies are meaningful; score more pairs at once",
        ));
    }

    let pred_tokens: Vec<Vec<String>> = predictions.iter().map(|p| tokenize(p.as_ref())).collect();
    let ref_tokens: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();

    // Document frequency of each n-gram over the reference corpus.
    let num_docs = ref_tokens.len() as f64;
    let mut df: Vec<BTreeMap<Vec<String>, u64>> = vec![BTreeMap::new(); MAX_NGRAM];
    for r in &ref_tokens {
        for n in 1..=MAX_NGRAM {
            for gram in ngram_counts(r, n).keys() {
                *df[n - 1].entry(gram.to_vec()).or_default() += 1;
            }
        }
    }
    // N-grams never seen in any reference fall back to df = 1, matching the
    // reference scoring convention.
    let idf = |n: usize, gram: &[String]| {
        let d = df[n - 1].get(gram).copied().unwrap_or(0).max(1);
        (num_docs / d as f64).ln()
    };

    let mut scores = Vec::with_capacity(pred_tokens.len());
    for (p, r) in pred_tokens.iter().zip(&ref_tokens) {
        let mut pair_score = 0.0;
        for n in 1..=MAX_NGRAM {
            let pc = ngram_counts(p, n);
            let rc = ngram_counts(r, n);
            let mut dot = 0.0;
            let mut norm_p = 0.0;
            let mut norm_r = 0.0;
            for (gram, &count) in &pc {
                let w = count as f64 * idf(n, gram);
                norm_p += w * w;
                if let Some(&rcount) = rc.get(gram) {
                    let rw = rcount as f64 * idf(n, gram);
                    let pw = match variant {
                        CiderVariant::D => w.min(rw),
                        CiderVariant::Plain => w,
                    };
                    dot += pw * rw;
                }
            }
            for (gram, &count) in &rc {
                let w = count as f64 * idf(n, gram);
                norm_r += w * w;
            }
            let (norm_p, norm_r) = (norm_p.sqrt(), norm_r.sqrt());
            let cos = if norm_p == 0.0 || norm_r == 0.0 {
                0.0
            } else {
                dot / (norm_p * norm_r)
            };
            let penalty = match variant {
                CiderVariant::D => {
                    let delta = p.len() as f64 - r.len() as f64;
                    (-delta * delta / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp()
                }
                CiderVariant::Plain => 1.0,
            };
            pair_score += penalty * cos;
        }
        scores.push(10.0 * pair_score / MAX_NGRAM as f64);
    }
    Ok(scores)
}

/// Cosine similarity of the two sentence embeddings; the zero-vector
/// convention maps empty or un-embeddable text to 0.
pub fn text_sim(prediction: &str, reference: &str, embedder: &dyn TextEmbedder) -> Result<f64> {
    let wrap = |text: &str, e: Error| Error::Embedding {
        text: text.to_owned(),
        message: e.to_string(),
    };
    let p = embedder
        .embed(prediction)
        .map_err(|e| wrap(prediction, e))?;
    let r = embedder.embed(reference).map_err(|e| wrap(reference, e))?;
    Ok(p.cosine(&r))
}
