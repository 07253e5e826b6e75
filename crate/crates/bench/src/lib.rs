//! Deterministic input generators shared by the benchmarks.

use avground_core::model::EmbeddingVector;
use avground_core::retrieval::{RetrievalIndex, VideoEntry};
use avground_core::sfs::AffinityMatrix;
use avground_core::stem::SimilarityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_affinity(m: usize, seed: u64) -> AffinityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AffinityMatrix::from_raw(m, (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("finite values")
}

pub fn random_similarity(n: usize, m: usize, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SimilarityMatrix::from_rows(
        (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    )
    .expect("values in range")
}

pub fn random_index(videos: usize, dim: usize, seed: u64) -> RetrievalIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vec = |n: usize| -> EmbeddingVector {
        EmbeddingVector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let entries = (0..videos)
        .map(|i| VideoEntry {
            video_id: format!("v{i:04}"),
            av: vec(dim),
            caption: vec(dim),
        })
        .collect();
    RetrievalIndex::new(dim, entries).expect("well-formed index")
}

pub fn random_query(dim: usize, seed: u64) -> EmbeddingVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}
