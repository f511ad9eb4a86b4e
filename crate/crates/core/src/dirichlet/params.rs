use serde::{Deserialize, Serialize};

use super::special::{ln_gamma, psi, psi1};
use crate::error::{shape_err, BifError, Result};

/// Lower bound applied when parameters come out of an optimizer.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Concentration vector of a Dirichlet distribution; every entry is
/// strictly positive and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector {
    f: Vec<f64>,
}

impl SimplexVector {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(f: Vec<f64>) -> Result<Self> {
        if f.is_empty() {
            return Err(BifError::Domain(
                "simplex vector needs at least one entry".into(),
            ));
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(BifError::Domain(
                "simplex entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = f.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(BifError::Domain(format!(
                "simplex entries sum to {total}, not 1"
            )));
        }
        Ok(Self { f })
    }

    pub(crate) fn new_unchecked(f: Vec<f64>) -> Self {
        debug_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { f }
    }

    /// Uniform point `(1/D, …, 1/D)`.
    pub fn uniform(dim: usize) -> Self {
        Self {
            f: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.f
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.f
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = BifError;
    fn try_from(f: Vec<f64>) -> Result<Self> {
        Self::new(f)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(s: SimplexVector) -> Self {
        s.f
    }
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(BifError::Domain(
                "Dirichlet needs at least one component".into(),
            ));
        }
        if let Some(bad) = alpha.iter().find(|a| !a.is_finite() || **a <= 0.0) {
            return Err(BifError::Domain(format!(
                "Dirichlet parameters must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Symmetric parameters `(a, …, a)`.
    pub fn symmetric(dim: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; dim])
    }

    /// Builds parameters from raw optimizer output, flooring each entry at
    /// [`ALPHA_FLOOR`].
    pub fn from_optimizer(raw: &[f64]) -> Result<Self> {
        Self::new(
            raw.iter()
                .map(|&a| if a.is_nan() { a } else { a.max(ALPHA_FLOOR) })
                .collect(),
        )
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// α̂ = Σ α_d.
    pub fn concentration(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// E[f] = α / α̂.
    pub fn mean(&self) -> SimplexVector {
        let total = self.concentration();
        SimplexVector::new_unchecked(self.alpha.iter().map(|a| a / total).collect())
    }

    /// Var(f_d) = α_d (α̂ − α_d) / (α̂² (α̂ + 1)).
    pub fn variance(&self) -> Vec<f64> {
        let total = self.concentration();
        self.alpha
            .iter()
            .map(|a| a * (total - a) / (total * total * (total + 1.0)))
            .collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.variance().into_iter().map(f64::sqrt).collect()
    }

    /// A(α) = Σ ln Γ(α_d) − ln Γ(α̂).
    pub fn log_partition(&self) -> f64 {
        self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(self.concentration())
    }

    /// E[ln f_d] = ψ(α_d) − ψ(α̂), the gradient of the log-partition.
    pub fn expected_sufficient_stat(&self) -> Vec<f64> {
        let psi_total = psi(self.concentration());
        self.alpha.iter().map(|&a| psi(a) - psi_total).collect()
    }

    /// Log density at a simplex point.
    pub fn log_pdf(&self, f: &SimplexVector) -> Result<f64> {
        self.check_dim(f.dim())?;
        let inner: f64 = self
            .alpha
            .iter()
            .zip(f.as_slice())
            .map(|(&a, &x)| if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() })
            .sum();
        Ok(inner - self.log_partition())
    }

    /// KL(self ‖ other) = A(β) − A(α) + Σ (α_d − β_d)(ψ(α_d) − ψ(α̂)).
    pub fn kl_divergence(&self, other: &DirichletParams) -> Result<f64> {
        self.check_dim(other.dim())?;
        let stat = self.expected_sufficient_stat();
        let inner: f64 = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .zip(&stat)
            .map(|((a, b), t)| (a - b) * t)
            .sum();
        Ok(other.log_partition() - self.log_partition() + inner)
    }

    /// Bregman divergence of the log-partition, B_A(β ‖ α) =
    /// A(β) − A(α) − ⟨β − α, ∇A(α)⟩, which equals KL(self ‖ other).
    pub fn bregman_divergence(&self, other: &DirichletParams) -> Result<f64> {
        self.check_dim(other.dim())?;
        let grad = self.expected_sufficient_stat();
        let a_beta = other.log_partition();
        let a_alpha = self.log_partition();
        let inner: f64 = other
            .alpha
            .iter()
            .zip(&self.alpha)
            .zip(&grad)
            .map(|((b, a), g)| (b - a) * g)
            .sum();
        Ok(a_beta - a_alpha - inner)
    }

    /// ∂ KL(self ‖ other) / ∂α_k = (α_k − β_k) ψ′(α_k) − ψ′(α̂) Σ_d (α_d − β_d).
    pub fn kl_gradient(&self, other: &DirichletParams) -> Result<Vec<f64>> {
        self.check_dim(other.dim())?;
        let total_gap: f64 = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| a - b)
            .sum();
        let tri_total = psi1(self.concentration());
        Ok(self
            .alpha
            .iter()
            .zip(&other.alpha)
            .map(|(&a, &b)| (a - b) * psi1(a) - tri_total * total_gap)
            .collect())
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if other != self.dim() {
            return Err(shape_err(format!(
                "dimension {other} does not match Dirichlet dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = BifError;
    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.alpha
    }
}

/// KL(p ‖ q) between two Dirichlet distributions.
pub fn kl_divergence(p: &DirichletParams, q: &DirichletParams) -> Result<f64> {
    p.kl_divergence(q)
}
