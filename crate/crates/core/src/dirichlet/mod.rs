//! Dirichlet distribution toolkit: special functions, sampling with implicit
//! reparameterisation gradients, moments and closed-form divergences.
//!
//! The log-partition convention is the standard one,
//! `A(α) = Σ_d ln Γ(α_d) − ln Γ(Σ_d α_d)`, so that `∇A(α) = E[ln f]`.

mod params;
mod sampling;
pub mod special;

pub use params::{kl_divergence, DirichletParams, SimplexVector, ALPHA_FLOOR};
pub use sampling::{dlog_gamma_dshape, sample, sample_log_gamma, sample_with_grad, ReparamSample};
pub use special::{digamma, lgamma, regularized_lower_gamma, trigamma};
