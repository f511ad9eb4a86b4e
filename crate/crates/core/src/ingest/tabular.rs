use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{BifError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

fn default_test_fraction() -> f64 {
    0.2
}

/// Layout of a tabular CSV file. When `features` is omitted every column
/// other than the label and the dropped ones is read as numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSchema {
    pub label: String,
    #[serde(default)]
    pub features: Option<Vec<ColumnSpec>>,
    #[serde(default)]
    pub drop: Vec<String>,
    /// Trailing fraction of rows held out as the test split.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

impl TabularSchema {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            features: None,
            drop: Vec::new(),
            test_fraction: default_test_fraction(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let schema: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.drop.contains(&self.label) {
            return Err(BifError::Config(format!(
                "label column '{}' is in the drop list",
                self.label
            )));
        }
        if let Some(f) = &self.features {
            if f.iter().any(|c| c.name == self.label) {
                return Err(BifError::Config(format!(
                    "label column '{}' is listed as a feature",
                    self.label
                )));
            }
            if f.iter().any(|c| self.drop.contains(&c.name)) {
                return Err(BifError::Config(
                    "a feature column is also in the drop list".into(),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(BifError::Config("test_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Train and test splits of a CSV file after encoding and mean shifting,
/// with the tables needed to interpret them.
#[derive(Debug, Clone)]
pub struct TabularData {
    pub train: Dataset,
    pub test: Dataset,
    /// Train-split means subtracted from every feature.
    pub feature_means: Vec<f64>,
    /// Ordinal code tables of categorical features, code = position.
    pub categories: BTreeMap<String, Vec<String>>,
    /// Original label values, class index = position.
    pub label_values: Vec<String>,
}

fn sorted_distinct(values: impl Iterator<Item = String>) -> Vec<String> {
    let set: BTreeSet<String> = values.collect();
    let mut out: Vec<String> = set.into_iter().collect();
    let numeric: Option<Vec<f64>> = out.iter().map(|v| v.trim().parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(out).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        out = paired.into_iter().map(|p| p.1).collect();
    }
    out
}

/// Reads a CSV with a header row. Categorical columns and labels are coded by
/// the sorted order of their distinct values (numerically when every value is
/// a number). The last `test_fraction` of rows form the test split; feature
/// means of the train split are subtracted from both splits.
pub fn load_csv(path: &Path, schema: &TabularSchema) -> Result<TabularData> {
    schema.validate()?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BifError::Parse {
                row: 0,
                column: name.to_owned(),
                message: "column not found in header".into(),
            })
    };
    let label_idx = find(&schema.label)?;
    for d in &schema.drop {
        find(d)?;
    }
    let features: Vec<ColumnSpec> = match &schema.features {
        Some(f) => f.clone(),
        None => header
            .iter()
            .filter(|h| **h != schema.label && !schema.drop.contains(h))
            .map(|h| ColumnSpec {
                name: h.clone(),
                kind: ColumnKind::Numeric,
            })
            .collect(),
    };
    if features.is_empty() {
        return Err(BifError::Config("no feature columns left".into()));
    }
    let feature_idx: Vec<usize> = features
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|c| c.trim().to_owned()).collect());
    }
    if rows.is_empty() {
        return Err(BifError::Input(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    let mut categories = BTreeMap::new();
    for (spec, &col) in features.iter().zip(&feature_idx) {
        if spec.kind == ColumnKind::Categorical {
            categories.insert(
                spec.name.clone(),
                sorted_distinct(rows.iter().map(|r| r[col].clone())),
            );
        }
    }
    let label_values = sorted_distinct(rows.iter().map(|r| r[label_idx].clone()));

    let n = rows.len();
    let d = features.len();
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        for (j, (spec, &col)) in features.iter().zip(&feature_idx).enumerate() {
            let cell = &r[col];
            x[[i, j]] = match spec.kind {
                ColumnKind::Numeric => cell.parse::<f64>().map_err(|_| BifError::Parse {
                    row: i + 1,
                    column: spec.name.clone(),
                    message: format!("'{cell}' is not a number"),
                })?,
                ColumnKind::Categorical => categories[&spec.name]
                    .iter()
                    .position(|v| v == cell)
                    .unwrap() as f64,
            };
        }
        labels.push(
            label_values
                .iter()
                .position(|v| *v == r[label_idx])
                .unwrap(),
        );
    }

    let n_test = if schema.test_fraction == 0.0 || n < 2 {
        0
    } else {
        ((n as f64 * schema.test_fraction).round() as usize).clamp(1, n - 1)
    };
    let n_train = n - n_test;
    let means: Vec<f64> = (0..d)
        .map(|j| x.column(j).iter().take(n_train).sum::<f64>() / n_train as f64)
        .collect();
    for mut row in x.rows_mut() {
        for (v, m) in row.iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let names: Vec<String> = features.iter().map(|c| c.name.clone()).collect();
    let num_classes = label_values.len().max(2);
    let ds = Dataset::new(x, labels, num_classes)?.with_feature_names(names)?;
    let split = ds.split_at(n_train);
    Ok(TabularData {
        train: split.train,
        test: split.test,
        feature_means: means,
        categories,
        label_values,
    })
}
