use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletParams;
use crate::error::{BifError, Result};

/// Importance summary of one Dirichlet: the mean weight of each feature group
/// and its posterior standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub alpha: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

impl From<&DirichletParams> for Explanation {
    fn from(p: &DirichletParams) -> Self {
        Self {
            alpha: p.alpha().to_vec(),
            mean: p.mean().into_vec(),
            std_dev: p.std_dev(),
        }
    }
}

impl Explanation {
    /// Group indices ordered by decreasing mean weight; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean.len()).collect();
        idx.sort_by(|&a, &b| self.mean[b].total_cmp(&self.mean[a]));
        idx
    }
}

/// Averages per-instance mean weights into one global importance vector.
pub fn average_local_means(explanations: &[DirichletParams]) -> Result<Vec<f64>> {
    let first = explanations
        .first()
        .ok_or_else(|| BifError::Input("no local explanations to average".into()))?;
    let mut acc = vec![0.0; first.dim()];
    for p in explanations {
        if p.dim() != acc.len() {
            return Err(BifError::Shape(
                "local explanations differ in dimension".into(),
            ));
        }
        for (a, m) in acc.iter_mut().zip(p.mean().as_slice()) {
            *a += m;
        }
    }
    let n = explanations.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
