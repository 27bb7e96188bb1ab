//! Generation-quality metrics for the world model: per-exam distribution
//! distances on numeric results, embedding-based diversity and Fréchet
//! distance on narrative results, and rule-based judges for result chains.

mod embed;
mod frechet;
mod judges;
mod numeric;
mod report;

pub use embed::{tokenize, Embedder, EmbeddingSet, HashedEmbedder, RemoteEmbedder, DEFAULT_EMBED_DIM};
pub use frechet::{cosine, frechet_distance, frechet_from_vectors, intra_diversity, intra_diversity_vectors, mean_cov};
pub use judges::{
    chain_violations, jaccard, judge_chain_consistency, judge_step_similarity, score_jaccard,
    score_z_distance, Similarity, Violation, JACCARD_THRESHOLDS, Z_THRESHOLDS,
};
pub use numeric::{
    exam_normalized_variance, exam_wasserstein1, mean_std, normalized_variance,
    normalized_variance_eps, w1_empirical, wasserstein1, ExamAverage, NumericSample,
    DEFAULT_EPS_MEAN, DEGENERATE_STD,
};
pub use report::{
    exam_dist_report, exam_dist_table, first_step_generations, ExamDistConfig, ExamDistReport,
    ExamDistRow, ExamDistSummary, ExamKind, ExcludedExam, GeneratedExam,
};

use thiserror::Error;

use crate::remote::TransportError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty sample: {0}")]
    Empty(String),
    #[error("{0}: fewer than two values")]
    TooFewValues(String),
    #[error("{subevent}: unit {gen:?} does not match reference unit {reference:?}")]
    UnitMismatch {
        subevent: String,
        gen: String,
        reference: String,
    },
    #[error("{0}: non-finite value")]
    NonFinite(String),
    #[error("{0}: reference standard deviation is zero")]
    DegenerateDistribution(String),
    #[error("{0}: mean too close to zero for normalized variance")]
    SkippedSubevent(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("retryable transport error: {0}")]
    Transport(#[from] TransportError),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
}
