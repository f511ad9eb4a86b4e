use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BifConfig, Estimator};
use super::objective::{
    mean_vjp, sigmoid, softplus, softplus_inverse, weighted_likelihood, FeatureMap, ALPHA_OFFSET,
};
use super::SAMPLING_STREAM;
use crate::dataset::Dataset;
use crate::dirichlet::{sample_with_grad, DirichletParams};
use crate::error::{shape_err, BifError, Result};
use crate::nn::{FrozenModel, OptimizerState};

/// A single Dirichlet over feature groups, shared by every instance.
/// The free parameters θ map to α = softplus(θ) + 1e-4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    theta: Vec<f64>,
    map: FeatureMap,
}

impl GlobalImportance {
    /// Starts every concentration at 1 (the uniform Dirichlet).
    pub fn new(map: FeatureMap) -> Self {
        let t = softplus_inverse(1.0 - ALPHA_OFFSET);
        Self {
            theta: vec![t; map.groups()],
            map,
        }
    }

    pub fn from_theta(theta: Vec<f64>, map: FeatureMap) -> Result<Self> {
        if theta.len() != map.groups() {
            return Err(shape_err(format!(
                "{} parameters for {} groups",
                theta.len(),
                map.groups()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(BifError::Domain(
                "importance parameters must be finite".into(),
            ));
        }
        Ok(Self { theta, map })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|&t| softplus(t) + ALPHA_OFFSET)
            .collect()
    }

    pub fn params(&self) -> Result<DirichletParams> {
        DirichletParams::new(self.alpha())
    }
}

/// Value of the negative ELBO on one mini-batch with its split into the
/// expected cross-entropy and the (scaled) KL term.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboTerms {
    pub loss: f64,
    pub likelihood: f64,
    pub kl: f64,
}

/// Negative ELBO of the global model on one mini-batch and its gradient with
/// respect to θ. The KL term is weighted by `kl_weight / batches_per_epoch`
/// so that one epoch charges the full KL once.
///
/// With the sampling estimator one f is drawn per sample and shared across
/// the batch; the point estimate evaluates at the mean and never touches `rng`.
#[allow(clippy::too_many_arguments)]
pub fn neg_elbo_global<R: Rng + ?Sized>(
    g: &FrozenModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    importance: &GlobalImportance,
    cfg: &BifConfig,
    batches_per_epoch: usize,
    rng: &mut R,
) -> Result<(ElboTerms, Vec<f64>)> {
    let map = &importance.map;
    let params = importance.params()?;
    let k = map.groups();
    let rows = x.nrows();
    let mut grad_alpha = vec![0.0; k];
    let likelihood = match cfg.estimator {
        Estimator::PointEstimate => {
            let mean = params.mean();
            let w = broadcast(mean.as_slice(), rows);
            let (nll, dw) = weighted_likelihood(g, x, labels, w.view(), map)?;
            let df = dw.sum_axis(Axis(0));
            grad_alpha = mean_vjp(
                mean.as_slice(),
                params.concentration(),
                df.as_slice().unwrap(),
            );
            nll
        }
        Estimator::Sampling { samples } => {
            let mut total = 0.0;
            for _ in 0..samples {
                let s = sample_with_grad(&params, rng);
                let w = broadcast(s.value().as_slice(), rows);
                let (nll, dw) = weighted_likelihood(g, x, labels, w.view(), map)?;
                let df = dw.sum_axis(Axis(0));
                for (acc, v) in grad_alpha.iter_mut().zip(s.vjp(df.as_slice().unwrap())) {
                    *acc += v / samples as f64;
                }
                total += nll / samples as f64;
            }
            total
        }
    };
    let prior = DirichletParams::symmetric(k, cfg.alpha0)?;
    let kl = params.kl_divergence(&prior)?;
    let scale = cfg.kl_weight / batches_per_epoch.max(1) as f64;
    for (acc, v) in grad_alpha.iter_mut().zip(params.kl_gradient(&prior)?) {
        *acc += scale * v;
    }
    let grad_theta = grad_alpha
        .iter()
        .zip(&importance.theta)
        .map(|(ga, &t)| ga * sigmoid(t))
        .collect();
    let terms = ElboTerms {
        loss: likelihood + scale * kl,
        likelihood,
        kl,
    };
    Ok((terms, grad_theta))
}

fn broadcast(row: &[f64], rows: usize) -> Array2<f64> {
    let mut w = Array2::zeros((rows, row.len()));
    for mut r in w.axis_iter_mut(Axis(0)) {
        r.assign(&ndarray::ArrayView1::from(row));
    }
    w
}

/// Trained global importance and the mean batch loss of every epoch.
#[derive(Debug, Clone)]
pub struct GlobalFit {
    pub importance: GlobalImportance,
    pub history: Vec<f64>,
}

impl GlobalFit {
    pub fn params(&self) -> Result<DirichletParams> {
        self.importance.params()
    }
}

/// Fits one Dirichlet over the features of `train` with `g` held fixed.
pub fn fit_global(g: &FrozenModel, train: &Dataset, cfg: &BifConfig) -> Result<GlobalFit> {
    fit_global_with_map(g, train, cfg, FeatureMap::identity(train.dim()))
}

pub fn fit_global_with_map(
    g: &FrozenModel,
    train: &Dataset,
    cfg: &BifConfig,
    map: FeatureMap,
) -> Result<GlobalFit> {
    cfg.validate()?;
    check_inputs(g, train, &map)?;
    let before = g.fingerprint();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    draw_rng.set_stream(SAMPLING_STREAM);
    let mut importance = GlobalImportance::new(map);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let nb = train.len().div_ceil(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = train.features().select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();
            let (terms, grad) =
                neg_elbo_global(g, x.view(), &y, &importance, cfg, nb, &mut draw_rng)?;
            opt.step(std::iter::once((
                importance.theta.as_mut_slice(),
                grad.as_slice(),
            )))?;
            total += terms.loss;
        }
        let mean = total / nb as f64;
        log::debug!("global epoch {epoch}: loss {mean:.5}");
        history.push(mean);
    }
    if g.fingerprint() != before {
        return Err(BifError::Input(
            "the classifier changed while fitting importance".into(),
        ));
    }
    Ok(GlobalFit {
        importance,
        history,
    })
}

pub(crate) fn check_inputs(g: &FrozenModel, train: &Dataset, map: &FeatureMap) -> Result<()> {
    if train.is_empty() {
        return Err(BifError::Input(
            "cannot fit importance on an empty dataset".into(),
        ));
    }
    if g.input_dim() != train.dim() || map.inputs() != train.dim() {
        return Err(BifError::Input(format!(
            "classifier expects {} inputs, feature map covers {}, dataset has {}",
            g.input_dim(),
            map.inputs(),
            train.dim()
        )));
    }
    if train.num_classes() > g.num_classes() {
        return Err(BifError::Input(format!(
            "dataset has {} classes but the classifier predicts {}",
            train.num_classes(),
            g.num_classes()
        )));
    }
    Ok(())
}
