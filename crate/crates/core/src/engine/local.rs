use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{BifConfig, Estimator};
use super::global::{check_inputs, ElboTerms};
use super::objective::{
    mean_vjp, sigmoid, softplus, weighted_likelihood, FeatureMap, ALPHA_OFFSET,
};
use super::SAMPLING_STREAM;
use crate::dataset::Dataset;
use crate::dirichlet::{sample_with_grad, DirichletParams};
use crate::error::{shape_err, BifError, Result};
use crate::nn::{Architecture, DenseNet, FrozenModel, GradientSet, OptimizerState};

/// Network mapping an input to the concentrations of its own Dirichlet:
/// α(x) = softplus(net(x)) + 1e-4.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceNetwork {
    net: DenseNet,
    map: FeatureMap,
}

impl ImportanceNetwork {
    pub fn new(net: DenseNet, map: FeatureMap) -> Result<Self> {
        if net.input_dim() != map.inputs() || net.output_dim() != map.groups() {
            return Err(shape_err(format!(
                "network maps {} -> {} but the feature map is {} -> {}",
                net.input_dim(),
                net.output_dim(),
                map.inputs(),
                map.groups()
            )));
        }
        Ok(Self { net, map })
    }

    pub fn random<R: Rng + ?Sized>(
        arch: &Architecture,
        map: FeatureMap,
        rng: &mut R,
    ) -> Result<Self> {
        let net = DenseNet::random(
            map.inputs(),
            &arch.hidden,
            arch.activation,
            map.groups(),
            rng,
        )?;
        Self::new(net, map)
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.map
    }

    /// Concentrations for every row of `x` (`rows × groups`).
    pub fn alpha_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self
            .net
            .forward_batch(x)?
            .mapv(|v| softplus(v) + ALPHA_OFFSET))
    }

    pub fn explain(&self, x: &[f64]) -> Result<DirichletParams> {
        let out = self.net.forward(x)?;
        DirichletParams::new(
            out.into_iter()
                .map(|v| softplus(v) + ALPHA_OFFSET)
                .collect(),
        )
    }

    /// One Dirichlet per row of `ds`.
    pub fn explain_dataset(&self, ds: &Dataset) -> Result<Vec<DirichletParams>> {
        self.alpha_batch(ds.features().view())?
            .axis_iter(Axis(0))
            .map(|row| DirichletParams::new(row.to_vec()))
            .collect()
    }
}

/// Negative ELBO of the local model on one mini-batch: mean cross-entropy
/// plus `kl_weight` times the mean per-instance KL to the symmetric prior.
/// Returns gradients for every tensor of the importance network.
pub fn neg_elbo_local<R: Rng + ?Sized>(
    g: &FrozenModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    importance: &ImportanceNetwork,
    cfg: &BifConfig,
    rng: &mut R,
) -> Result<(ElboTerms, GradientSet)> {
    let map = &importance.map;
    let rows = x.nrows();
    let k = map.groups();
    let trace = importance.net.trace(x)?;
    let params: Vec<DirichletParams> = trace
        .output
        .axis_iter(Axis(0))
        .map(|row| DirichletParams::new(row.iter().map(|&v| softplus(v) + ALPHA_OFFSET).collect()))
        .collect::<Result<_>>()?;
    let mut grad_alpha = Array2::<f64>::zeros((rows, k));
    let likelihood = match cfg.estimator {
        Estimator::PointEstimate => {
            let mut w = Array2::zeros((rows, k));
            for (mut r, p) in w.axis_iter_mut(Axis(0)).zip(&params) {
                r.assign(&ndarray::ArrayView1::from(p.mean().as_slice()));
            }
            let (nll, dw) = weighted_likelihood(g, x, labels, w.view(), map)?;
            for (n, p) in params.iter().enumerate() {
                let ga = mean_vjp(
                    w.row(n).as_slice().unwrap(),
                    p.concentration(),
                    dw.row(n).as_slice().unwrap(),
                );
                grad_alpha
                    .row_mut(n)
                    .assign(&ndarray::ArrayView1::from(&ga));
            }
            nll
        }
        Estimator::Sampling { samples } => {
            let mut total = 0.0;
            for _ in 0..samples {
                let draws: Vec<_> = params.iter().map(|p| sample_with_grad(p, rng)).collect();
                let mut w = Array2::zeros((rows, k));
                for (mut r, s) in w.axis_iter_mut(Axis(0)).zip(&draws) {
                    r.assign(&ndarray::ArrayView1::from(s.value().as_slice()));
                }
                let (nll, dw) = weighted_likelihood(g, x, labels, w.view(), map)?;
                for (n, s) in draws.iter().enumerate() {
                    let ga = s.vjp(dw.row(n).as_slice().unwrap());
                    for (acc, v) in grad_alpha.row_mut(n).iter_mut().zip(ga) {
                        *acc += v / samples as f64;
                    }
                }
                total += nll / samples as f64;
            }
            total
        }
    };
    let prior = DirichletParams::symmetric(k, cfg.alpha0)?;
    let mut kl = 0.0;
    let scale = cfg.kl_weight / rows as f64;
    for (n, p) in params.iter().enumerate() {
        kl += p.kl_divergence(&prior)? / rows as f64;
        for (acc, v) in grad_alpha.row_mut(n).iter_mut().zip(p.kl_gradient(&prior)?) {
            *acc += scale * v;
        }
    }
    let grad_out = &grad_alpha * &trace.output.mapv(sigmoid);
    let deltas = importance.net.backprop(&trace, grad_out.view())?;
    let grads = importance.net.parameter_gradients(&trace, &deltas, None);
    let terms = ElboTerms {
        loss: likelihood + cfg.kl_weight * kl,
        likelihood,
        kl,
    };
    Ok((terms, grads))
}

/// Trained importance network and the mean batch loss of every epoch.
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub network: ImportanceNetwork,
    pub history: Vec<f64>,
}

/// Fits an importance network over the features of `train` with `g` fixed.
pub fn fit_local(g: &FrozenModel, train: &Dataset, cfg: &BifConfig) -> Result<LocalFit> {
    fit_local_with_map(g, train, cfg, FeatureMap::identity(train.dim()))
}

pub fn fit_local_with_map(
    g: &FrozenModel,
    train: &Dataset,
    cfg: &BifConfig,
    map: FeatureMap,
) -> Result<LocalFit> {
    cfg.validate()?;
    check_inputs(g, train, &map)?;
    let before = g.fingerprint();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    draw_rng.set_stream(SAMPLING_STREAM);
    let mut network = ImportanceNetwork::random(&cfg.importance_network, map, &mut rng)?;
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
            let (terms, grads) = neg_elbo_local(g, x.view(), &y, &network, cfg, &mut draw_rng)?;
            opt.apply(&mut network.net, &grads)?;
            total += terms.loss;
        }
        let mean = total / nb as f64;
        log::debug!("local epoch {epoch}: loss {mean:.5}");
        history.push(mean);
    }
    if g.fingerprint() != before {
        return Err(BifError::Input(
            "the classifier changed while fitting importance".into(),
        ));
    }
    Ok(LocalFit { network, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::global::tests::{toy, CountingRng};
    use crate::nn::Activation;

    fn small_network() -> ImportanceNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let arch = Architecture {
            hidden: vec![5],
            activation: Activation::Selu,
        };
        ImportanceNetwork::random(&arch, FeatureMap::identity(4), &mut rng).unwrap()
    }

    #[test]
    fn point_estimate_gradient_matches_finite_differences() {
        let (g, x, y) = toy();
        let imp = small_network();
        let cfg = BifConfig::default();
        let mut rng = CountingRng::new(0);
        let (_, grads) = neg_elbo_local(&g, x.view(), &y, &imp, &cfg, &mut rng).unwrap();
        let flat = grads.to_flat();
        let h = 1e-6;
        let mut idx = 0;
        let lens: Vec<usize> = grads.tensors().map(|t| t.len()).collect();
        for (t, &len) in lens.iter().enumerate() {
            for i in (0..len).step_by(3) {
                let eval = |delta: f64| {
                    let mut probe = imp.clone();
                    probe.net.tensors_mut().nth(t).unwrap()[i] += delta;
                    neg_elbo_local(&g, x.view(), &y, &probe, &cfg, &mut CountingRng::new(0))
                        .unwrap()
                        .0
                        .loss
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let got = flat[idx + i];
                assert!(
                    (fd - got).abs() <= 1e-4 * fd.abs().max(1e-3),
                    "tensor {t}[{i}]: {fd} vs {got}"
                );
            }
            idx += len;
        }
        assert_eq!(rng.draws, 0);
    }

    fn zero_last_layer(mut imp: ImportanceNetwork, bias: &[f64]) -> ImportanceNetwork {
        let last = imp.net.layers_mut().last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias.assign(&ndarray::ArrayView1::from(bias));
        imp
    }

    #[test]
    fn constant_network_matches_global_loss() {
        use crate::engine::{neg_elbo_global, GlobalImportance};
        let (g, x, y) = toy();
        let theta = [0.4, -0.3, 1.7, 0.0];
        let imp = zero_last_layer(small_network(), &theta);
        let cfg = BifConfig::default();
        let (local, _) =
            neg_elbo_local(&g, x.view(), &y, &imp, &cfg, &mut CountingRng::new(0)).unwrap();
        let global = GlobalImportance::from_theta(theta.to_vec(), FeatureMap::identity(4)).unwrap();
        let (glob, _) =
            neg_elbo_global(&g, x.view(), &y, &global, &cfg, 1, &mut CountingRng::new(0)).unwrap();
        assert!(
            (local.loss - glob.loss).abs() < 1e-12,
            "{} vs {}",
            local.loss,
            glob.loss
        );
    }

    #[test]
    fn dominant_kl_pulls_towards_prior() {
        let (g, x, y) = toy();
        let x1 = x.slice(ndarray::s![0..1, ..]).to_owned();
        // α far above the prior α0 = 0.1 in every coordinate.
        let imp = zero_last_layer(small_network(), &[3.0; 4]);
        let cfg = BifConfig {
            kl_weight: 1e6,
            ..Default::default()
        };
        let (_, grads) =
            neg_elbo_local(&g, x1.view(), &y[..1], &imp, &cfg, &mut CountingRng::new(0)).unwrap();
        // Descending the loss must lower every output bias, i.e. shrink α.
        let bias_grad = &grads.layers.last().unwrap().bias;
        assert!(bias_grad.iter().all(|&v| v > 0.0), "{bias_grad:?}");
    }

    #[test]
    fn zero_input_uses_bias_path() {
        let imp = small_network();
        let zero = [0.0; 4];
        let a = imp.explain(&zero).unwrap();
        let mut h: Vec<f64> = imp.net.layers()[0].bias().to_vec();
        h.iter_mut().for_each(|v| *v = Activation::Selu.apply(*v));
        let last = &imp.net.layers()[1];
        for k in 0..4 {
            let z = last.bias()[k] + last.weights().row(k).dot(&ndarray::ArrayView1::from(&h));
            assert!((a.alpha()[k] - softplus(z) - ALPHA_OFFSET).abs() < 1e-14);
        }
    }

    #[test]
    fn explain_matches_batch() {
        let (_, x, _) = toy();
        let imp = small_network();
        let batch = imp.alpha_batch(x.view()).unwrap();
        let one = imp.explain(x.row(2).as_slice().unwrap()).unwrap();
        for (a, b) in one.alpha().iter().zip(batch.row(2)) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
        assert!(batch.iter().all(|&a| a >= ALPHA_OFFSET));
    }

    #[test]
    fn fitting_leaves_classifier_untouched() {
        let (g, x, y) = toy();
        let ds = Dataset::new(x, y, 2).unwrap();
        let before = g.fingerprint();
        let cfg = BifConfig {
            epochs: 2,
            batch_size: 3,
            estimator: Estimator::Sampling { samples: 1 },
            importance_network: Architecture {
                hidden: vec![6],
                activation: Activation::Relu,
            },
            ..Default::default()
        };
        let fit = fit_local(&g, &ds, &cfg).unwrap();
        assert_eq!(g.fingerprint(), before);
        assert_eq!(fit.network.explain_dataset(&ds).unwrap().len(), 6);
    }
}
