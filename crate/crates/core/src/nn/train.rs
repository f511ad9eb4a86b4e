use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::cross_entropy_batch;
use super::net::{Activation, DenseLayer, DenseNet, GradientSet};
use super::optim::{Optimizer, OptimizerState};
use crate::dataset::Dataset;
use crate::digest::sha256_hex;
use crate::error::{BifError, Result};

/// Stream used for gradient noise so that batch order does not depend on it.
const NOISE_STREAM: u64 = 0x006e_6f69_7365;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(BifError::Input("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(BifError::Input("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BifError::Input("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
        }
    }
}

/// Hidden layer widths and their activation; the output layer is always linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![200, 200],
            activation: Activation::Relu,
        }
    }
}

/// Per-example clipping and Gaussian noise applied during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientNoise {
    pub clip_norm: f64,
    pub sigma: f64,
}

/// Mean cross-entropy of `net` on a batch and its parameter gradient.
pub fn backward(
    net: &DenseNet,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(f64, GradientSet)> {
    if labels.is_empty() {
        return Err(BifError::Input("empty batch".into()));
    }
    let trace = net.trace(x)?;
    let (loss, grad_logits) = cross_entropy_batch(trace.output.view(), labels)?;
    let deltas = net.backprop(&trace, grad_logits.view())?;
    Ok((loss, net.parameter_gradients(&trace, &deltas, None)))
}

/// Mean gradient with each instance's contribution clipped to `clip_norm`
/// and `N(0, σ²·clip_norm²)` noise added to the summed gradient.
pub fn privatized_backward<R: rand::Rng + ?Sized>(
    net: &DenseNet,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    noise: &GradientNoise,
    rng: &mut R,
) -> Result<(f64, GradientSet)> {
    if labels.is_empty() {
        return Err(BifError::Input("empty batch".into()));
    }
    let batch = labels.len() as f64;
    let trace = net.trace(x)?;
    let (loss, grad_logits) = cross_entropy_batch(trace.output.view(), labels)?;
    // Deltas already carry the 1/B factor of the mean, so rescale norms by B.
    let deltas = net.backprop(&trace, grad_logits.view())?;
    let scale: Vec<f64> = net
        .per_example_sq_norms(&trace, &deltas)
        .into_iter()
        .map(|sq| {
            let norm = sq.sqrt() * batch;
            if norm > noise.clip_norm {
                noise.clip_norm / norm
            } else {
                1.0
            }
        })
        .collect();
    let mut grads = net.parameter_gradients(&trace, &deltas, Some(&scale));
    if noise.sigma > 0.0 {
        let std = noise.sigma * noise.clip_norm / batch;
        for t in grads.tensors_mut() {
            for v in t.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += std * z;
            }
        }
    }
    Ok((loss, grads))
}

/// A trained classifier whose parameters can no longer change.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenModel {
    net: DenseNet,
}

impl FrozenModel {
    pub fn new(net: DenseNet) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(x)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let logits = self.net.forward_batch(x)?;
        Ok(logits
            .axis_iter(Axis(0))
            .map(|row| argmax(row.iter().copied()))
            .collect())
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        self.accuracy_on(ds.features().view(), ds.labels())
    }

    pub fn accuracy_on(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(BifError::Input("cannot score an empty dataset".into()));
        }
        let pred = self.predict_batch(x)?;
        let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    pub fn to_checkpoint(&self) -> NetCheckpoint {
        NetCheckpoint::from_net(&self.net)
    }

    /// SHA-256 of the canonical JSON checkpoint.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.to_checkpoint()).expect("checkpoint serializes");
        sha256_hex(&json)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(NetCheckpoint::load(path)?.into_net()?))
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Trains a classifier from scratch and freezes it.
pub fn train_classifier(
    ds: &Dataset,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<FrozenModel> {
    fit_network(ds, arch, cfg, None)
}

pub(crate) fn fit_network(
    ds: &Dataset,
    arch: &Architecture,
    cfg: &TrainConfig,
    noise: Option<&GradientNoise>,
) -> Result<FrozenModel> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(BifError::Input("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(NOISE_STREAM);
    let mut net = DenseNet::random(
        ds.dim(),
        &arch.hidden,
        arch.activation,
        ds.num_classes(),
        &mut rng,
    )?;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let x = ds.features().select(Axis(0), chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| ds.labels()[i]).collect();
            let (loss, grads) = match noise {
                None => backward(&net, x.view(), &y)?,
                Some(n) => privatized_backward(&net, x.view(), &y, n, &mut noise_rng)?,
            };
            opt.apply(&mut net, &grads)?;
            epoch_loss += loss;
            batches += 1;
        }
        log::debug!(
            "epoch {epoch}: mean loss {:.5}",
            epoch_loss / batches as f64
        );
    }
    Ok(FrozenModel::new(net))
}

/// Versioned JSON layout of a dense network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub format: String,
    pub version: u32,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "bif-dense-net";
pub const CHECKPOINT_VERSION: u32 = 1;

impl NetCheckpoint {
    pub fn from_net(net: &DenseNet) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation(),
                    weights: l.weights().iter().copied().collect(),
                    bias: l.bias().to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_net(self) -> Result<DenseNet> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(BifError::Format(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|r| {
                let w = Array2::from_shape_vec((r.outputs, r.inputs), r.weights)
                    .map_err(|e| BifError::Format(format!("weight block: {e}")))?;
                DenseLayer::new(w, Array1::from(r.bias), r.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNet::new(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
