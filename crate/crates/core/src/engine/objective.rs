use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dirichlet::SimplexVector;
use crate::error::{shape_err, BifError, Result};
use crate::nn::{cross_entropy_batch, FrozenModel};

/// Added to softplus outputs so every concentration stays strictly positive.
pub const ALPHA_OFFSET: f64 = 1e-4;

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of softplus for positive `y`.
pub(crate) fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Assignment of input columns to importance components. The identity map
/// gives one weight per feature; MNIST patches share one weight across the
/// 16 pixels of a 4×4 block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    groups: usize,
    assignment: Vec<usize>,
}

impl FeatureMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            groups: dim,
            assignment: (0..dim).collect(),
        }
    }

    pub fn new(groups: usize, assignment: Vec<usize>) -> Result<Self> {
        if groups == 0 {
            return Err(BifError::Input(
                "a feature map needs at least one group".into(),
            ));
        }
        let mut used = vec![false; groups];
        for &g in &assignment {
            if g >= groups {
                return Err(BifError::Input(format!("group {g} outside [0, {groups})")));
            }
            used[g] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(BifError::Input(
                "every group must own at least one input".into(),
            ));
        }
        Ok(Self { groups, assignment })
    }

    /// Number of importance components.
    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Number of model inputs.
    pub fn inputs(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Per-input weights from per-group weights.
    pub fn expand(&self, weights: &[f64]) -> Vec<f64> {
        self.assignment.iter().map(|&g| weights[g]).collect()
    }

    /// Per-input boolean mask from a per-group mask.
    pub fn expand_mask(&self, mask: &[bool]) -> Vec<bool> {
        self.assignment.iter().map(|&g| mask[g]).collect()
    }
}

/// Logits of `g` on `f ∘ x`, with `f` expanded through `map`.
pub fn weighted_forward(
    g: &FrozenModel,
    f: &SimplexVector,
    x: &[f64],
    map: &FeatureMap,
) -> Result<Vec<f64>> {
    if f.dim() != map.groups() || x.len() != map.inputs() {
        return Err(shape_err(format!(
            "importance of dim {} and input of dim {} do not fit a map of {} groups over {} inputs",
            f.dim(),
            x.len(),
            map.groups(),
            map.inputs()
        )));
    }
    let w = map.expand(f.as_slice());
    let u: Vec<f64> = w.iter().zip(x).map(|(a, b)| a * b).collect();
    g.forward(&u)
}

/// Mean cross-entropy of `g` on the re-weighted batch, and its gradient with
/// respect to each instance's group weights (`B × groups`).
pub(crate) fn weighted_likelihood(
    g: &FrozenModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    weights: ArrayView2<'_, f64>,
    map: &FeatureMap,
) -> Result<(f64, Array2<f64>)> {
    if x.ncols() != map.inputs() || weights.ncols() != map.groups() || weights.nrows() != x.nrows()
    {
        return Err(shape_err("batch, weights and feature map disagree"));
    }
    let mut u = x.to_owned();
    for (mut row, w) in u.axis_iter_mut(Axis(0)).zip(weights.axis_iter(Axis(0))) {
        for (v, &grp) in row.iter_mut().zip(&map.assignment) {
            *v *= w[grp];
        }
    }
    let net = g.net();
    let trace = net.trace(u.view())?;
    let (loss, grad_logits) = cross_entropy_batch(trace.output.view(), labels)?;
    let deltas = net.backprop(&trace, grad_logits.view())?;
    let du = net.input_gradient(&deltas);
    let mut dw = Array2::zeros(weights.dim());
    for n in 0..x.nrows() {
        for (d, &grp) in map.assignment.iter().enumerate() {
            dw[[n, grp]] += du[[n, d]] * x[[n, d]];
        }
    }
    Ok((loss, dw))
}

/// Back-propagates ∂L/∂f̄ through the Dirichlet mean f̄ = α/α̂:
/// ∂L/∂α_j = (∂L/∂f̄_j − Σ_i ∂L/∂f̄_i f̄_i) / α̂.
pub(crate) fn mean_vjp(mean: &[f64], concentration: f64, upstream: &[f64]) -> Vec<f64> {
    let weighted: f64 = upstream.iter().zip(mean).map(|(u, m)| u * m).sum();
    upstream
        .iter()
        .map(|u| (u - weighted) / concentration)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseNet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(d: usize) -> FrozenModel {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        FrozenModel::new(DenseNet::random(d, &[6], Activation::Relu, 2, &mut rng).unwrap())
    }

    #[test]
    fn uniform_weights_scale_input() {
        let g = model(4);
        let x = [0.4, -1.0, 2.0, 0.3];
        let got =
            weighted_forward(&g, &SimplexVector::uniform(4), &x, &FeatureMap::identity(4)).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v / 4.0).collect();
        let want = g.forward(&scaled).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_ignores_weights() {
        let g = model(3);
        let zero = [0.0; 3];
        let f = SimplexVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        assert_eq!(
            weighted_forward(&g, &f, &zero, &FeatureMap::identity(3)).unwrap(),
            g.forward(&zero).unwrap()
        );
    }

    #[test]
    fn composition_with_group_map() {
        let g = model(4);
        let map = FeatureMap::new(2, vec![0, 0, 1, 1]).unwrap();
        let f = SimplexVector::new(vec![0.3, 0.7]).unwrap();
        let x = [1.0, 2.0, -3.0, 0.5];
        let manual = [0.3, 0.6, -2.1, 0.35];
        let got = weighted_forward(&g, &f, &x, &map).unwrap();
        let want = g.forward(&manual).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(weighted_forward(&g, &f, &x[..3], &map).is_err());
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let g = model(3);
        let map = FeatureMap::identity(3);
        let x = ndarray::array![[0.5, -1.0, 2.0], [1.5, 0.2, -0.4]];
        let labels = [1, 0];
        let w = ndarray::array![[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];
        let (_, dw) = weighted_likelihood(&g, x.view(), &labels, w.view(), &map).unwrap();
        let h = 1e-5;
        for n in 0..2 {
            for k in 0..3 {
                let mut up = w.clone();
                up[[n, k]] += h;
                let mut dn = w.clone();
                dn[[n, k]] -= h;
                let lu = weighted_likelihood(&g, x.view(), &labels, up.view(), &map)
                    .unwrap()
                    .0;
                let ld = weighted_likelihood(&g, x.view(), &labels, dn.view(), &map)
                    .unwrap()
                    .0;
                let fd = (lu - ld) / (2.0 * h);
                assert!(
                    (fd - dw[[n, k]]).abs() < 1e-4 * fd.abs().max(1e-6),
                    "{fd} vs {}",
                    dw[[n, k]]
                );
            }
        }
    }

    #[test]
    fn group_map_validation() {
        assert!(FeatureMap::new(2, vec![0, 0]).is_err());
        assert!(FeatureMap::new(2, vec![0, 2]).is_err());
        assert_eq!(
            FeatureMap::new(2, vec![1, 0, 1])
                .unwrap()
                .expand(&[0.25, 0.75]),
            vec![0.75, 0.25, 0.75]
        );
    }

    #[test]
    fn softplus_round_trip() {
        for y in [1e-4, 0.3, 1.0, 12.0, 45.0] {
            assert!((softplus(softplus_inverse(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
