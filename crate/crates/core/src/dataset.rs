use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{BifError, Result};

/// Labelled feature matrix with optional per-instance relevance masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    feature_names: Vec<String>,
    truth: Option<Vec<Vec<bool>>>,
}

/// Train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(BifError::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(BifError::Input("num_classes must be at least 1".into()));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(BifError::Input(format!(
                "label {y} at row {i} is outside [0, {num_classes})"
            )));
        }
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            features,
            labels,
            num_classes,
            feature_names,
            truth: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(BifError::Shape(format!(
                "{} feature names for {} columns",
                names.len(),
                self.dim()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_truth(mut self, truth: Vec<Vec<bool>>) -> Result<Self> {
        if truth.len() != self.len() || truth.iter().any(|row| row.len() != self.dim()) {
            return Err(BifError::Shape(
                "truth masks must be one row of `dim` flags per instance".into(),
            ));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn truth(&self) -> Option<&[Vec<bool>]> {
        self.truth.as_deref()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            feature_names: self.feature_names.clone(),
            truth: self
                .truth
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
        }
    }

    /// First `n_train` rows become the training split, the rest the test split.
    pub fn split_at(&self, n_train: usize) -> Split {
        let n_train = n_train.min(self.len());
        let train: Vec<usize> = (0..n_train).collect();
        let test: Vec<usize> = (n_train..self.len()).collect();
        Split {
            train: self.subset(&train),
            test: self.subset(&test),
        }
    }

    /// Same dataset with the feature columns reordered: new column `j` is old column `order[j]`.
    pub fn permute_features(&self, order: &[usize]) -> Result<Dataset> {
        check_permutation(order, self.dim())?;
        Ok(Dataset {
            features: self.features.select(Axis(1), order),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            feature_names: order
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            truth: self.truth.as_ref().map(|t| {
                t.iter()
                    .map(|row| order.iter().map(|&j| row[j]).collect())
                    .collect()
            }),
        })
    }

    /// Content hash over dimensions, features (little-endian bits) and labels.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(16 + 8 * self.features.len() + 8 * self.len());
        bytes.extend_from_slice(&(self.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for v in self.features.iter() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        for &y in &self.labels {
            bytes.extend_from_slice(&(y as u64).to_le_bytes());
        }
        sha256_hex(&bytes)
    }

    /// Fraction of instances per class.
    pub fn class_balance(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        let n = self.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

pub(crate) fn check_permutation(order: &[usize], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    if order.len() != dim {
        return Err(BifError::Shape(format!(
            "permutation of length {} for {dim} features",
            order.len()
        )));
    }
    for &j in order {
        if j >= dim || seen[j] {
            return Err(BifError::Input("feature order is not a permutation".into()));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Summary written next to reports so runs can be matched to their data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    pub fingerprint: String,
}

impl From<&Dataset> for DatasetSummary {
    fn from(ds: &Dataset) -> Self {
        Self {
            rows: ds.len(),
            features: ds.dim(),
            classes: ds.num_classes(),
            fingerprint: ds.fingerprint(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_out_of_range_label() {
        let err = Dataset::new(array![[0.0], [1.0]], vec![0, 2], 2).unwrap_err();
        assert!(matches!(err, BifError::Input(_)));
    }

    #[test]
    fn split_keeps_order() {
        let ds = Dataset::new(array![[0.0], [1.0], [2.0]], vec![0, 1, 0], 2).unwrap();
        let split = ds.split_at(2);
        assert_eq!(split.train.len(), 2);
        assert_eq!(split.test.row(0)[0], 2.0);
    }

    #[test]
    fn permutation_moves_columns_and_truth() {
        let ds = Dataset::new(array![[1.0, 2.0, 3.0]], vec![0], 1)
            .unwrap()
            .with_truth(vec![vec![true, false, false]])
            .unwrap();
        let p = ds.permute_features(&[2, 0, 1]).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![3.0, 1.0, 2.0]);
        assert_eq!(p.truth().unwrap()[0], vec![false, true, false]);
        assert!(ds.permute_features(&[0, 0, 1]).is_err());
    }
}
