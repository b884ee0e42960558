//! Downstream analysis of a trained model: latent projections and marginals,
//! per-subject encodings, cross-validated classification, significance tests,
//! correlation matrices, community ordering and ground-truth recovery.

mod classify;
mod community;
mod marginal;
mod projection;
mod recovery;
mod stats;

pub use classify::{classify_cv, default_folds, stratified_folds, ClassificationReport, LogisticFit};
pub use community::{community_graph, louvain_communities, modularity, Communities, DEFAULT_EDGE_CUT};
pub use marginal::{marginal_importance_estimate, MarginalEstimate};
pub use projection::{align_and_threshold, encode_subjects, latent_projection, ProjectionMap, DEFAULT_THRESHOLD_SD};
pub use recovery::{recovery_score, Recovery};
pub use stats::{
    beta_ttest, correlation_matrix, regularized_incomplete_beta, student_t_two_sided_p, Axis, ComponentStats,
    CorrelationMatrix, SIGNIFICANCE_LEVEL,
};
