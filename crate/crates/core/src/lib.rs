//! Constrained learn-to-defer post-processing.
//!
//! Scores estimated on training data are mapped to embedding vectors, and a
//! generalized Neyman-Pearson rule over those embeddings is tuned on
//! validation data to maximize accuracy subject to expectation constraints
//! (expert budget, demographic parity, equality of opportunity, equalized
//! odds, type-k error, out-of-distribution mass, long-tail balance).

pub mod bootstrap;
pub mod dataset;
pub mod decision;
pub mod embeddings;
pub mod error;
pub mod logistic;
pub mod metrics;
pub mod oracle;
pub mod scores;
pub mod simulate;
pub mod solver;

pub use dataset::{LabeledDataset, Record, Split};
pub use decision::{DeferralDecision, SimplexVector};
pub use embeddings::{build_embeddings, ConstraintSpec, EmbeddingSet};
pub use error::{Error, Infeasibility, Result};
pub use metrics::EvalReport;
pub use scores::{fit_scores, ExpertModel, FitConfig, ScoreModel, ScoreTable};
pub use solver::{fit_policy, DeferralPolicy, GridSpec, PolicyMode, SolverOptions};
