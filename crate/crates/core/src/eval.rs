//! Scoring of feature selections: top-k masks, MCC against ground truth,
//! post-hoc accuracy with zeroed features and Dirichlet divergence reports.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dirichlet::DirichletParams;
use crate::error::{shape_err, BifError, Result};
use crate::nn::FrozenModel;

/// Indices of the `k` largest entries, largest first. Equal values keep
/// ascending index order, so ties go to the lowest feature index.
pub fn top_indices(importance: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > importance.len() {
        return Err(BifError::Input(format!(
            "k = {k} outside [1, {}]",
            importance.len()
        )));
    }
    let mut idx: Vec<usize> = (0..importance.len()).collect();
    idx.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]));
    idx.truncate(k);
    Ok(idx)
}

/// Boolean mask with exactly `k` selected features.
pub fn topk(importance: &[f64], k: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; importance.len()];
    for i in top_indices(importance, k)? {
        mask[i] = true;
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, selected: bool, relevant: bool) {
        match (selected, relevant) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Pools counts over every (instance, feature) pair.
    pub fn from_masks(masks: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<Self> {
        if masks.len() != truth.len() {
            return Err(shape_err(format!(
                "{} masks for {} truth rows",
                masks.len(),
                truth.len()
            )));
        }
        let mut c = Self::default();
        for (m, t) in masks.iter().zip(truth) {
            if m.len() != t.len() {
                return Err(shape_err("mask and truth rows differ in width"));
            }
            for (&s, &r) in m.iter().zip(t) {
                c.record(s, r);
            }
        }
        Ok(c)
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fnn) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fnn) * (tn + fp) * (tn + fnn);
    if denom == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fnn) / denom.sqrt()).clamp(-1.0, 1.0)
}

pub fn score_selection(masks: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64> {
    Ok(mcc(&ConfusionCounts::from_masks(masks, truth)?))
}

/// Per-instance top-k masks where each instance keeps as many features as
/// its truth mask marks relevant.
pub fn select_truth_cardinality(
    importances: &[Vec<f64>],
    truth: &[Vec<bool>],
) -> Result<Vec<Vec<bool>>> {
    if importances.len() != truth.len() {
        return Err(shape_err(format!(
            "{} importances for {} truth rows",
            importances.len(),
            truth.len()
        )));
    }
    importances
        .iter()
        .zip(truth)
        .map(|(imp, t)| topk(imp, t.iter().filter(|&&b| b).count().max(1)))
        .collect()
}

/// Accuracy of `clf` on `ds` after zeroing every feature not selected.
pub fn posthoc_accuracy(clf: &FrozenModel, ds: &Dataset, masks: &[Vec<bool>]) -> Result<f64> {
    if masks.len() != ds.len() {
        return Err(shape_err(format!(
            "{} masks for {} rows",
            masks.len(),
            ds.len()
        )));
    }
    let mut x = Array2::zeros((ds.len(), ds.dim()));
    for (i, m) in masks.iter().enumerate() {
        if m.len() != ds.dim() {
            return Err(shape_err("mask width differs from feature count"));
        }
        for (j, &keep) in m.iter().enumerate() {
            if keep {
                x[[i, j]] = ds.features()[[i, j]];
            }
        }
    }
    clf.accuracy_on(x.view(), ds.labels())
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. Returns 0 when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(shape_err(
            "spearman needs two equal-length series of at least two points",
        ));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkOverlap {
    pub k: usize,
    /// |top-k(a) ∩ top-k(b)| / k.
    pub overlap: f64,
}

/// Side-by-side comparison of two importance distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub kl_ab: f64,
    pub kl_ba: f64,
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub ranking_a: Vec<usize>,
    pub ranking_b: Vec<usize>,
    pub topk_overlap: Vec<TopkOverlap>,
}

pub fn topk_overlap(a: &[f64], b: &[f64], k: usize) -> Result<f64> {
    let ta = top_indices(a, k)?;
    let tb = top_indices(b, k)?;
    Ok(ta.iter().filter(|i| tb.contains(i)).count() as f64 / k as f64)
}

pub fn divergence_report(a: &DirichletParams, b: &DirichletParams) -> Result<DivergenceReport> {
    let kl_ab = a.kl_divergence(b)?;
    let kl_ba = b.kl_divergence(a)?;
    let mean_a = a.mean().into_vec();
    let mean_b = b.mean().into_vec();
    let d = mean_a.len();
    let topk_overlap = [1, 3, 5]
        .into_iter()
        .filter(|&k| k <= d)
        .map(|k| {
            Ok(TopkOverlap {
                k,
                overlap: topk_overlap(&mean_a, &mean_b, k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DivergenceReport {
        kl_ab,
        kl_ba,
        ranking_a: top_indices(&mean_a, d)?,
        ranking_b: top_indices(&mean_b, d)?,
        mean_a,
        mean_b,
        topk_overlap,
    })
}

impl DivergenceReport {
    /// One row per feature: `feature,mean_a,mean_b,rank_a,rank_b`, ranks 1-based.
    pub fn to_csv(&self) -> String {
        let pos = |ranking: &[usize], f: usize| ranking.iter().position(|&r| r == f).unwrap() + 1;
        let mut out = String::from("feature,mean_a,mean_b,rank_a,rank_b\n");
        for f in 0..self.mean_a.len() {
            out.push_str(&format!(
                "{f},{:?},{:?},{},{}\n",
                self.mean_a[f],
                self.mean_b[f],
                pos(&self.ranking_a, f),
                pos(&self.ranking_b, f)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn topk_examples() {
        assert_eq!(topk(&[0.1, 0.7, 0.2], 1).unwrap(), vec![false, true, false]);
        assert_eq!(topk(&[0.3; 4], 2).unwrap(), vec![true, true, false, false]);
        assert!(topk(&[0.1, 0.2], 0).is_err());
        assert!(topk(&[0.1, 0.2], 3).is_err());
    }

    #[test]
    fn mcc_examples() {
        let perfect = ConfusionCounts {
            tp: 3,
            tn: 7,
            fp: 0,
            fn_: 0,
        };
        assert_eq!(mcc(&perfect), 1.0);
        let even = ConfusionCounts {
            tp: 1,
            tn: 1,
            fp: 1,
            fn_: 1,
        };
        assert_eq!(mcc(&even), 0.0);
        // (4·5 − 1·0) / √(5·4·6·5) = 20/√600
        let c = ConfusionCounts {
            tp: 4,
            tn: 5,
            fp: 1,
            fn_: 0,
        };
        assert!((mcc(&c) - 0.816_496_580_927_726).abs() < 1e-15);
        assert_eq!(
            mcc(&ConfusionCounts {
                tp: 5,
                tn: 0,
                fp: 0,
                fn_: 0
            }),
            0.0
        );
    }

    #[test]
    fn selection_against_truth() {
        let truth = vec![
            vec![true, false, true, false],
            vec![false, true, false, true],
        ];
        assert_eq!(score_selection(&truth, &truth).unwrap(), 1.0);
        let flipped: Vec<Vec<bool>> = truth
            .iter()
            .map(|r| r.iter().map(|b| !b).collect())
            .collect();
        assert_eq!(score_selection(&flipped, &truth).unwrap(), -1.0);
        let unbalanced = vec![vec![true, false, false]];
        let comp = vec![vec![false, true, true]];
        let c = ConfusionCounts::from_masks(&comp, &unbalanced).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 0,
                tn: 0,
                fp: 2,
                fn_: 1
            }
        );
        assert_eq!(score_selection(&comp, &unbalanced).unwrap(), mcc(&c));
    }

    #[test]
    fn truth_cardinality_selection() {
        let imp = vec![vec![0.5, 0.1, 0.4], vec![0.1, 0.2, 0.7]];
        let truth = vec![vec![true, false, true], vec![false, false, true]];
        let masks = select_truth_cardinality(&imp, &truth).unwrap();
        assert_eq!(masks, truth);
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // Ties: ranks (1.5, 1.5, 3) vs (1, 2, 3) → cov 1.5, var 1.5 and 2
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn divergence_report_fields() {
        let a = DirichletParams::new(vec![1.0, 2.0, 3.0, 0.5, 4.0]).unwrap();
        let b = DirichletParams::new(vec![2.0, 2.0, 1.0, 1.5, 0.7]).unwrap();
        let r = divergence_report(&a, &b).unwrap();
        assert_eq!(r.kl_ab.to_bits(), a.kl_divergence(&b).unwrap().to_bits());
        let s = divergence_report(&b, &a).unwrap();
        assert_eq!(r.kl_ab, s.kl_ba);
        assert_eq!(r.kl_ba, s.kl_ab);
        let same = divergence_report(&a, &a).unwrap();
        assert_eq!(same.kl_ab, 0.0);
        assert_eq!(same.ranking_a, same.ranking_b);
        assert!(same.topk_overlap.iter().all(|o| o.overlap == 1.0));
        assert_eq!(r.to_csv().lines().count(), 6);
    }

    fn brute_force(masks: &[Vec<bool>], truth: &[Vec<bool>]) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for i in 0..masks.len() {
            for j in 0..masks[i].len() {
                let (s, t) = (masks[i][j], truth[i][j]);
                if s && t {
                    c.tp += 1;
                } else if !s && !t {
                    c.tn += 1;
                } else if s {
                    c.fp += 1;
                } else {
                    c.fn_ += 1;
                }
            }
        }
        c
    }

    proptest! {
        #[test]
        fn topk_matches_sort_oracle(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            for k in 1..=v.len() {
                let mut order: Vec<usize> = (0..v.len()).collect();
                order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
                let mask = topk(&v, k).unwrap();
                for (pos, &i) in order.iter().enumerate() {
                    prop_assert_eq!(mask[i], pos < k);
                }
            }
        }

        #[test]
        fn topk_invariant_under_monotone_maps(v in prop::collection::vec(0.01f64..5.0, 1..12), k in 1usize..12) {
            let k = k.min(v.len());
            let mapped: Vec<f64> = v.iter().map(|x| x.ln() * 3.0 + 1.0).collect();
            prop_assert_eq!(topk(&v, k).unwrap(), topk(&mapped, k).unwrap());
        }

        #[test]
        fn pooled_counts_match_brute_force(
            rows in prop::collection::vec(prop::collection::vec(any::<(bool, bool)>(), 6), 1..100)
        ) {
            let masks: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|p| p.0).collect()).collect();
            let truth: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|p| p.1).collect()).collect();
            let c = ConfusionCounts::from_masks(&masks, &truth).unwrap();
            prop_assert_eq!(c, brute_force(&masks, &truth));
            prop_assert_eq!(c.total(), 6 * rows.len() as u64);
            let m = mcc(&c);
            prop_assert!((-1.0..=1.0).contains(&m));
        }
    }
}
