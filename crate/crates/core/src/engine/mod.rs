//! Variational feature importance for a frozen classifier.
//!
//! Importance is a Dirichlet over feature groups. The classifier `g` sees
//! `f ∘ x` for `f` on the simplex, and the engine minimises the negative ELBO
//! `E_q[−ln p(y | f ∘ x)] + KL(q ‖ Dir(α0))` with `g` held fixed. Global mode
//! fits one Dirichlet for the whole dataset; local mode trains a network that
//! outputs one Dirichlet per instance.

mod checkpoint;
mod config;
mod explain;
mod global;
mod local;
mod objective;

pub use checkpoint::{
    FittedImportance, ImportanceCheckpoint, ImportanceState, IMPORTANCE_FORMAT, IMPORTANCE_VERSION,
};
pub use config::{BifConfig, Estimator, Mode};
pub use explain::{average_local_means, Explanation};
pub use global::{
    fit_global, fit_global_with_map, neg_elbo_global, ElboTerms, GlobalFit, GlobalImportance,
};
pub use local::{fit_local, fit_local_with_map, neg_elbo_local, ImportanceNetwork, LocalFit};
pub use objective::{weighted_forward, FeatureMap, ALPHA_OFFSET};

/// ChaCha stream reserved for Dirichlet draws, so that the shuffling stream
/// is identical under both estimators.
const SAMPLING_STREAM: u64 = 1;
