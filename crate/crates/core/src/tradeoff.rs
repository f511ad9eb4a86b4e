//! Explainability against training noise.
//!
//! For every noise level σ a classifier is trained with clipped, noised
//! gradients, a global importance distribution is fitted to it, and that
//! distribution is compared with the one fitted to the noiseless classifier.
//! The σ = 0 entry is the baseline; it is clipped like the others but receives
//! no noise, so every difference from it is due to the noise alone.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dirichlet::DirichletParams;
use crate::engine::{fit_global, BifConfig, Mode};
use crate::error::{BifError, Result};
use crate::eval::topk_overlap;
use crate::ingest::noisy_train;
use crate::nn::{Architecture, FrozenModel, TrainConfig};
use crate::svg;

/// Noise levels used by default, from no noise to strong noise.
pub const DEFAULT_SIGMAS: [f64; 6] = [0.0, 1.35, 2.3, 4.4, 8.4, 17.0];

fn default_sigmas() -> Vec<f64> {
    DEFAULT_SIGMAS.to_vec()
}
fn default_clip_norm() -> f64 {
    1.0
}
fn default_alpha0() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSpec {
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    /// Prior concentration used for every fit; replaces the one in the BIF config.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
}

impl Default for TradeoffSpec {
    fn default() -> Self {
        Self {
            sigmas: default_sigmas(),
            clip_norm: default_clip_norm(),
            alpha0: default_alpha0(),
        }
    }
}

impl TradeoffSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.sigmas.contains(&0.0) {
            return Err(BifError::Config(
                "sigmas must contain 0 (the baseline)".into(),
            ));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(BifError::Config(
                "sigmas must be finite and non-negative".into(),
            ));
        }
        for (i, a) in self.sigmas.iter().enumerate() {
            if self.sigmas[..i].contains(a) {
                return Err(BifError::Config(format!("sigma {a} appears twice")));
            }
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(BifError::Config("clip_norm must be positive".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(BifError::Config("alpha0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffEntry {
    pub sigma: f64,
    pub model_fingerprint: String,
    pub alpha: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    pub test_accuracy: f64,
    /// KL(Dir(α_σ) ‖ Dir(α_0)).
    pub kl_to_baseline: f64,
    /// KL(Dir(α_0) ‖ Dir(α_σ)).
    pub kl_from_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRun {
    pub clip_norm: f64,
    pub feature_names: Vec<String>,
    /// In the order of the requested grid.
    pub entries: Vec<TradeoffEntry>,
}

struct Fitted {
    fingerprint: String,
    params: DirichletParams,
    accuracy: f64,
}

fn fit_one(
    train: &Dataset,
    test: &Dataset,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    bif: &BifConfig,
    sigma: f64,
    clip_norm: f64,
) -> Result<Fitted> {
    let g: FrozenModel = noisy_train(train, arch, train_cfg, clip_norm, sigma)?;
    let fit = fit_global(&g, train, bif)?;
    let accuracy = g.accuracy(test)?;
    log::info!("sigma {sigma}: test accuracy {accuracy:.4}");
    Ok(Fitted {
        fingerprint: g.fingerprint(),
        params: fit.params()?,
        accuracy,
    })
}

/// Trains and explains one classifier per σ, using up to `jobs` threads.
/// Results do not depend on `jobs`.
pub fn run_tradeoff(
    train: &Dataset,
    test: &Dataset,
    arch: &Architecture,
    train_cfg: &TrainConfig,
    bif: &BifConfig,
    spec: &TradeoffSpec,
    jobs: usize,
) -> Result<TradeoffRun> {
    spec.validate()?;
    if bif.mode != Mode::Global {
        return Err(BifError::Config(
            "the trade-off harness fits global importance only".into(),
        ));
    }
    let bif = BifConfig {
        alpha0: spec.alpha0,
        ..bif.clone()
    };
    bif.validate()?;
    let n = spec.sigmas.len();
    let slots: Vec<Mutex<Option<Result<Fitted>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = fit_one(
                    train,
                    test,
                    arch,
                    train_cfg,
                    &bif,
                    spec.sigmas[i],
                    spec.clip_norm,
                );
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let fitted: Vec<Fitted> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot filled"))
        .collect::<Result<_>>()?;
    let base = spec.sigmas.iter().position(|&s| s == 0.0).unwrap();
    let base_params = &fitted[base].params;
    let mut entries = Vec::with_capacity(n);
    for (i, (f, &sigma)) in fitted.iter().zip(&spec.sigmas).enumerate() {
        let (to, from) = if i == base {
            (0.0, 0.0)
        } else {
            (
                f.params.kl_divergence(base_params)?,
                base_params.kl_divergence(&f.params)?,
            )
        };
        entries.push(TradeoffEntry {
            sigma,
            model_fingerprint: f.fingerprint.clone(),
            alpha: f.params.alpha().to_vec(),
            mean: f.params.mean().into_vec(),
            std_dev: f.params.std_dev(),
            test_accuracy: f.accuracy,
            kl_to_baseline: to,
            kl_from_baseline: from,
        });
    }
    Ok(TradeoffRun {
        clip_norm: spec.clip_norm,
        feature_names: train.feature_names().to_vec(),
        entries,
    })
}

impl TradeoffRun {
    pub fn baseline(&self) -> &TradeoffEntry {
        self.entries
            .iter()
            .find(|e| e.sigma == 0.0)
            .expect("validated grid holds 0")
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sigma).collect()
    }

    pub fn kls(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.kl_to_baseline).collect()
    }

    /// `sigma,test_accuracy,kl_to_baseline,kl_from_baseline,sum_std_dev`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("sigma,test_accuracy,kl_to_baseline,kl_from_baseline,sum_std_dev\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?}\n",
                e.sigma,
                e.test_accuracy,
                e.kl_to_baseline,
                e.kl_from_baseline,
                e.std_dev.iter().sum::<f64>()
            ));
        }
        out
    }

    /// Accuracy and divergence against σ, in grid order.
    pub fn to_svg(&self) -> String {
        let labels: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{}", e.sigma))
            .collect();
        let acc: Vec<f64> = self.entries.iter().map(|e| e.test_accuracy).collect();
        let kl = self.kls();
        svg::line_chart(
            "Accuracy and importance divergence against noise",
            &labels,
            &[
                svg::Series {
                    name: "test accuracy",
                    values: &acc,
                },
                svg::Series {
                    name: "KL(noisy || baseline)",
                    values: &kl,
                },
            ],
            "sigma",
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub sigma: f64,
    pub overlap: f64,
}

/// |top-k(σ) ∩ top-k(0)| / k for every grid point, ranked by mean importance.
pub fn top_feature_stability(run: &TradeoffRun, k: usize) -> Result<Vec<Stability>> {
    let base = &run.baseline().mean;
    run.entries
        .iter()
        .map(|e| {
            Ok(Stability {
                sigma: e.sigma,
                overlap: topk_overlap(&e.mean, base, k)?,
            })
        })
        .collect()
}
