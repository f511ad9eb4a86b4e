//! Bayesian feature importance for frozen differentiable classifiers.
//!
//! A Dirichlet distribution over the probability simplex describes how much
//! each input feature matters to a trained model `g`. Samples (or the mean)
//! of that distribution rescale the input element-wise before it reaches
//! `g`, and the Dirichlet parameters are fitted by maximising a variational
//! lower bound while `g` stays frozen. Two levels are supported:
//!
//! * **global**: one parameter vector shared by every instance;
//! * **local**: an importance network maps each instance to its own
//!   Dirichlet parameters.
//!
//! Around the estimator sit the pieces needed to evaluate it: a small dense
//! network engine ([`nn`]), Dirichlet special functions and divergences
//! ([`dirichlet`]), synthetic benchmarks with known relevant features
//! ([`synth`]), scoring ([`eval`]), loaders ([`ingest`]) and a noise
//! trade-off harness ([`tradeoff`]).

pub mod dataset;
pub mod dirichlet;
pub mod engine;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod nn;
pub mod svg;
pub mod synth;
pub mod tradeoff;

mod digest;

pub use dataset::{Dataset, Split};
pub use error::{BifError, Result};
