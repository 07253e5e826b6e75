//! Text embedding interface and the default deterministic embedder.
//!
//! The default embedder is a hashed bag of words: lowercase alphanumeric
//! tokens, a stable 64-bit FNV-1a hash into 256 buckets, raw counts, L2
//! normalization. It stands in for sentence encoders so every metric in the
//! toolkit is computable without a model; precomputed-embedding files cover
//! fidelity runs.

use crate::error::Result;
use crate::model::EmbeddingVector;

/// A deterministic text-to-vector encoder: equal inputs must produce equal
/// outputs, and every output has length `dimension()`.
pub trait TextEmbedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Lowercase the text and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64 bit. Hand-rolled so hashes are stable across releases and
/// platforms; `std` hashers make no such guarantee.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// The versioned hashed bag-of-words embedder. `VERSION` changes whenever the
/// tokenizer, hash, or normalization changes, since downstream reports are
/// bit-stable only per version.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dimension: usize,
}

impl HashedBowEmbedder {
    pub const VERSION: &'static str = "hashed-bow-v1";

    pub fn new(dimension: usize) -> Self {
        assert!(dimension >= 1, "embedder dimension must be >= 1");
        Self { dimension }
    }

    /// Bucket index for a single token.
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl TextEmbedder for HashedBowEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut counts = vec![0.0f64; self.dimension];
        for token in tokenize(text) {
            counts[self.bucket(&token)] += 1.0;
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut counts {
                *v /= norm;
            }
        }
        EmbeddingVector::new(counts)
    }
}

/// The embedder used everywhere a module needs text similarity and no
/// external embeddings are supplied.
pub fn default_embedder() -> HashedBowEmbedder {
    HashedBowEmbedder::default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(tokenize("Whisk, the EGGS!"), vec!["whisk", "the", "eggs"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("a2b c"), vec!["a2b", "c"]);
    }

    #[test]
    fn empty_text_embeds_to_zero_vector() {
        let e = default_embedder();
        let v = e.embed("").unwrap();
        assert_eq!(v.dim(), 256);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn deterministic_across_calls() {
        let e = default_embedder();
        assert_eq!(
            e.embed("fold the flour").unwrap(),
            e.embed("fold the flour").unwrap()
        );
    }

    #[test]
    fn repeated_token_weights() {
        // "a a b": count 2 at bucket(a), count 1 at bucket(b), L2-normalized.
        let e = default_embedder();
        assert_ne!(
            e.bucket("a"),
            e.bucket("b"),
            "fixture tokens must not collide"
        );
        let v = e.embed("a a b").unwrap();
        let mut nonzero: Vec<f64> = v.values().iter().copied().filter(|&x| x != 0.0).collect();
        nonzero.sort_by(|x, y| y.total_cmp(x));
        assert_eq!(nonzero.len(), 2);
        assert_abs_diff_eq!(nonzero[0], 2.0 / 5.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(nonzero[1], 1.0 / 5.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn order_invariance_of_bag_of_words() {
        let e = default_embedder();
        assert_eq!(
            e.embed("eggs whisk").unwrap(),
            e.embed("whisk eggs").unwrap()
        );
    }

    proptest! {
        #[test]
        fn nonempty_token_streams_embed_to_unit_norm(words in proptest::collection::vec("[a-z]{1,8}", 1..10)) {
            let e = default_embedder();
            let v = e.embed(&words.join(" ")).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }
}
