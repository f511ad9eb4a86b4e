use serde::{Deserialize, Serialize};

use crate::error::{BifError, Result};
use crate::nn::{Activation, Architecture, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Global,
    Local,
}

/// How the expected log-likelihood under the Dirichlet is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    /// Average over `samples` reparameterised Dirichlet draws.
    Sampling { samples: usize },
    /// Evaluate the likelihood once at the Dirichlet mean.
    PointEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// Symmetric prior concentration.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_kl_weight")]
    pub kl_weight: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
    /// Hidden layers of the importance network (local mode only).
    #[serde(default = "default_importance_arch")]
    pub importance_network: Architecture,
}

fn default_mode() -> Mode {
    Mode::Global
}
fn default_estimator() -> Estimator {
    Estimator::PointEstimate
}
fn default_alpha0() -> f64 {
    0.1
}
fn default_kl_weight() -> f64 {
    1.0
}
fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    64
}
fn default_learning_rate() -> f64 {
    1e-2
}
fn default_importance_arch() -> Architecture {
    Architecture {
        hidden: vec![100, 100],
        activation: Activation::Relu,
    }
}

impl Default for BifConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            estimator: default_estimator(),
            alpha0: default_alpha0(),
            kl_weight: default_kl_weight(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            optimizer: Optimizer::default(),
            seed: 0,
            importance_network: default_importance_arch(),
        }
    }
}

impl BifConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BifError::Config(m.into()));
        if let Estimator::Sampling { samples: 0 } = self.estimator {
            return bad("estimator.samples must be at least 1");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive");
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("kl_weight must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.importance_network.hidden.contains(&0) {
            return bad("importance_network.hidden widths must be positive");
        }
        Ok(())
    }
}
