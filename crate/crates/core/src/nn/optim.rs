use serde::{Deserialize, Serialize};

use super::net::{DenseNet, GradientSet};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

/// Running optimizer state; Adam moments start at zero and are allocated on
/// the first step for each tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    optimizer: Optimizer,
    learning_rate: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, learning_rate: f64) -> Self {
        Self {
            optimizer,
            learning_rate,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update over a list of `(parameters, gradient)` tensor pairs.
    pub fn step<'a, I>(&mut self, tensors: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a mut [f64], &'a [f64])>,
    {
        self.step += 1;
        let lr = self.learning_rate;
        match self.optimizer {
            Optimizer::Sgd => {
                for (params, grads) in tensors {
                    check_len(params, grads)?;
                    for (w, g) in params.iter_mut().zip(grads) {
                        *w -= lr * g;
                    }
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (idx, (params, grads)) in tensors.into_iter().enumerate() {
                    check_len(params, grads)?;
                    if self.first.len() <= idx {
                        self.first.push(vec![0.0; params.len()]);
                        self.second.push(vec![0.0; params.len()]);
                    }
                    let m = &mut self.first[idx];
                    let v = &mut self.second[idx];
                    if m.len() != params.len() {
                        return Err(shape_err("optimizer state does not match parameter shape"));
                    }
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies `grads` to every tensor of `net`.
    pub fn apply(&mut self, net: &mut DenseNet, grads: &GradientSet) -> Result<()> {
        if !grads.is_congruent(net) {
            return Err(shape_err("gradient set is not congruent with the network"));
        }
        self.step(net.tensors_mut().zip(grads.tensors()))
    }
}

fn check_len(params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(shape_err(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            grads.len()
        )));
    }
    Ok(())
}
