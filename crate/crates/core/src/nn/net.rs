use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, BifError, Result};

const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Selu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_SCALE * z
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_SCALE
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer computing `act(W x + b)`; `W` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
    pub(crate) activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(shape_err(format!(
                "weight matrix has {} rows but bias has {} entries",
                weights.nrows(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Uniform(−√(1/fan_in), √(1/fan_in)) for weights and biases.
    pub fn random<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (1.0 / inputs as f64).sqrt();
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(outputs, |_| rng.random_range(-bound..bound));
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// Feed-forward network of dense layers ending in raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
}

/// Per-layer values kept from a batched forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `inputs[l]` is the batch entering layer `l` (`inputs[0]` is the network input).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Array2<f64>>,
    /// Network output (logits).
    pub output: Array2<f64>,
}

/// Gradient of a scalar with respect to every parameter of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(shape_err("a network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(shape_err(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(BifError::Input(
                "the final layer must use the identity activation".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Randomly initialised network `input → hidden… → output`.
    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        activation: Activation,
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input == 0 || output == 0 || hidden.contains(&0) {
            return Err(shape_err("layer widths must be positive"));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input;
        for &width in hidden {
            layers.push(DenseLayer::random(fan_in, width, activation, rng));
            fan_in = width;
        }
        layers.push(DenseLayer::random(
            fan_in,
            output,
            Activation::Identity,
            rng,
        ));
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Logits for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape_err(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = Array1::from(x.to_vec());
        for layer in &self.layers {
            let mut z = layer.weights.dot(&a);
            z += &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            a = z;
        }
        Ok(a.to_vec())
    }

    /// Logits for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = layer_forward(layer, a.view()).1;
        }
        Ok(a)
    }

    /// Forward pass that keeps intermediate values for [`DenseNet::backprop`].
    pub fn trace(&self, x: ArrayView2<'_, f64>) -> Result<Trace> {
        self.check_batch(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let (z, out) = layer_forward(layer, a.view());
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        Ok(Trace {
            inputs,
            pre,
            output: a,
        })
    }

    /// Propagates `grad_output` (∂L/∂logits, one row per instance) back through
    /// the network. Element `l` of the result is ∂L/∂(pre-activation of layer l).
    pub fn backprop(
        &self,
        trace: &Trace,
        grad_output: ArrayView2<'_, f64>,
    ) -> Result<Vec<Array2<f64>>> {
        if grad_output.dim() != trace.output.dim() {
            return Err(shape_err(format!(
                "output gradient {:?} does not match output {:?}",
                grad_output.dim(),
                trace.output.dim()
            )));
        }
        let n = self.layers.len();
        let mut deltas: Vec<Array2<f64>> = Vec::with_capacity(n);
        let mut upstream = grad_output.to_owned();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let mut delta = upstream;
            if layer.activation != Activation::Identity {
                ndarray::Zip::from(&mut delta)
                    .and(&trace.pre[l])
                    .for_each(|d, &z| *d *= layer.activation.derivative(z));
            }
            upstream = if l > 0 {
                delta.dot(&layer.weights)
            } else {
                Array2::zeros((0, 0))
            };
            deltas.push(delta);
        }
        deltas.reverse();
        Ok(deltas)
    }

    /// ∂L/∂input for each row, given the deltas from [`DenseNet::backprop`].
    pub fn input_gradient(&self, deltas: &[Array2<f64>]) -> Array2<f64> {
        deltas[0].dot(&self.layers[0].weights)
    }

    /// Parameter gradients summed over the batch. `row_scale`, when given,
    /// multiplies each instance's contribution (used for per-example clipping).
    pub fn parameter_gradients(
        &self,
        trace: &Trace,
        deltas: &[Array2<f64>],
        row_scale: Option<&[f64]>,
    ) -> GradientSet {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, _)| {
                let delta = match row_scale {
                    Some(scale) => {
                        let mut d = deltas[l].clone();
                        for (mut row, &s) in d.axis_iter_mut(Axis(0)).zip(scale) {
                            row *= s;
                        }
                        d
                    }
                    None => deltas[l].clone(),
                };
                LayerGrad {
                    weights: delta.t().dot(&trace.inputs[l]),
                    bias: delta.sum_axis(Axis(0)),
                }
            })
            .collect();
        GradientSet { layers }
    }

    /// Squared L2 norm of each instance's own parameter gradient.
    pub fn per_example_sq_norms(&self, trace: &Trace, deltas: &[Array2<f64>]) -> Vec<f64> {
        let batch = trace.output.nrows();
        let mut norms = vec![0.0; batch];
        for (delta, input) in deltas.iter().zip(&trace.inputs) {
            for (i, norm) in norms.iter_mut().enumerate() {
                let d2: f64 = delta.row(i).iter().map(|v| v * v).sum();
                let a2: f64 = input.row(i).iter().map(|v| v * v).sum();
                // outer(d, a) has squared norm |d|²|a|²; the bias adds |d|².
                *norm += d2 * a2 + d2;
            }
        }
        norms
    }

    /// Applies `update(param, grad)` tensor by tensor.
    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    fn check_batch(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(shape_err(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

fn layer_forward(layer: &DenseLayer, a: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let mut z = a.dot(&layer.weights.t());
    z += &layer.bias;
    let out = if layer.activation == Activation::Identity {
        z.clone()
    } else {
        z.mapv(|v| layer.activation.apply(v))
    };
    (z, out)
}

impl GradientSet {
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn is_congruent(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }

    /// Flattened copy in layer order (weights row-major, then bias).
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }
}

/// Row view helper used by callers that hold a single instance.
pub fn as_batch(x: ArrayView1<'_, f64>) -> ArrayView2<'_, f64> {
    x.insert_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_gives_zero_logits() {
        let layer = DenseLayer::new(
            Array2::zeros((3, 2)),
            Array1::zeros(3),
            Activation::Identity,
        )
        .unwrap();
        let net = DenseNet::new(vec![layer]).unwrap();
        assert_eq!(net.forward(&[4.0, -7.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer =
            DenseLayer::new(Array2::eye(2), Array1::zeros(2), Activation::Identity).unwrap();
        let net = DenseNet::new(vec![layer]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::random(3, &[4], Activation::Relu, 2, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(BifError::Shape(_))));
    }

    #[test]
    fn layers_must_chain() {
        let a = DenseLayer::new(Array2::zeros((3, 2)), Array1::zeros(3), Activation::Relu).unwrap();
        let b = DenseLayer::new(
            Array2::zeros((2, 4)),
            Array1::zeros(2),
            Activation::Identity,
        )
        .unwrap();
        assert!(matches!(DenseNet::new(vec![a, b]), Err(BifError::Shape(_))));
    }

    #[test]
    fn final_layer_must_be_identity() {
        let a = DenseLayer::new(Array2::zeros((2, 2)), Array1::zeros(2), Activation::Relu).unwrap();
        assert!(DenseNet::new(vec![a]).is_err());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn random_two_layer_matches_hand_unrolled_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = DenseNet::random(3, &[4], Activation::Selu, 2, &mut rng).unwrap();
        let x = [0.3, -1.2, 2.0];
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut hidden = [0.0; 4];
        for (o, h) in hidden.iter_mut().enumerate() {
            let mut s = l0.bias[o];
            for i in 0..3 {
                s += l0.weights[[o, i]] * x[i];
            }
            *h = if s > 0.0 {
                SELU_SCALE * s
            } else {
                SELU_SCALE * SELU_ALPHA * (s.exp() - 1.0)
            };
        }
        let got = net.forward(&x).unwrap();
        for o in 0..2 {
            let mut s = l1.bias[o];
            for (i, h) in hidden.iter().enumerate() {
                s += l1.weights[[o, i]] * h;
            }
            assert!((got[o] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::random(2, &[5, 3], Activation::Relu, 3, &mut rng).unwrap();
        let x = array![[0.5, -0.25], [1.5, 2.0]];
        let batch = net.forward_batch(x.view()).unwrap();
        for i in 0..2 {
            let single = net.forward(&x.row(i).to_vec()).unwrap();
            for (a, b) in single.iter().zip(batch.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_example_norms_match_materialised_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::random(3, &[4], Activation::Relu, 2, &mut rng).unwrap();
        let x = array![[0.5, -0.25, 1.0], [1.5, 2.0, -0.7]];
        let trace = net.trace(x.view()).unwrap();
        let g = array![[0.3, -0.3], [-1.0, 0.5]];
        let deltas = net.backprop(&trace, g.view()).unwrap();
        let norms = net.per_example_sq_norms(&trace, &deltas);
        for i in 0..2 {
            let mut scale = [0.0, 0.0];
            scale[i] = 1.0;
            let gi = net.parameter_gradients(&trace, &deltas, Some(&scale));
            assert!((gi.sq_norm() - norms[i]).abs() < 1e-12);
        }
    }
}
