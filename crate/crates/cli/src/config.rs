use std::fs;
use std::path::{Path, PathBuf};

use bif_core::engine::BifConfig;
use bif_core::ingest::TabularSchema;
use bif_core::nn::{Architecture, GradientNoise, TrainConfig};
use bif_core::synth::SynSpec;
use bif_core::tradeoff::TradeoffSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

fn default_keep() -> Vec<u8> {
    vec![3, 8]
}

/// Where the data comes from. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Syn(SynSpec),
    Csv {
        path: PathBuf,
        schema: TabularSchema,
    },
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "default_keep")]
        keep: Vec<u8>,
        /// Keep at most this many rows of each split.
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
    /// Train with clipped and noised gradients.
    #[serde(default)]
    pub noise: Option<GradientNoise>,
}

fn default_ks() -> Vec<usize> {
    vec![1, 2, 3, 4, 5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Feature (or patch) counts for post-hoc accuracy.
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ks: default_ks() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub bif: BifConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub tradeoff: TradeoffSpec,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses and validates; errors name the offending key.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.inner()))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::Syn(_) => {}
            DataSource::Csv { path, .. } => fix(path),
            DataSource::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    fix(p);
                }
            }
        }
        if let Some(out) = &mut self.out {
            fix(out);
        }
    }

    /// Replaces the seed of every stochastic stage.
    pub fn override_seed(&mut self, seed: u64) {
        if let DataSource::Syn(spec) = &mut self.data {
            spec.seed = seed;
        }
        self.classifier.train.seed = seed;
        self.bif.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let key = |k: &str, e: bif_core::BifError| CliError::Config(format!("at `{k}`: {e}"));
        self.classifier
            .train
            .validate()
            .map_err(|e| key("classifier.train", e))?;
        if self.classifier.architecture.hidden.contains(&0) {
            return Err(CliError::Config(
                "at `classifier.architecture.hidden`: widths must be positive".into(),
            ));
        }
        if let Some(n) = &self.classifier.noise {
            if !(n.clip_norm > 0.0 && n.clip_norm.is_finite()) {
                return Err(CliError::Config(
                    "at `classifier.noise.clip_norm`: must be positive".into(),
                ));
            }
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err(CliError::Config(
                    "at `classifier.noise.sigma`: must be non-negative".into(),
                ));
            }
        }
        self.bif.validate().map_err(|e| key("bif", e))?;
        self.tradeoff.validate().map_err(|e| key("tradeoff", e))?;
        if self.eval.ks.contains(&0) {
            return Err(CliError::Config(
                "at `eval.ks`: k must be at least 1".into(),
            ));
        }
        match &self.data {
            DataSource::Syn(spec) if spec.n < 2 => Err(CliError::Config(
                "at `data.n`: need at least 2 instances".into(),
            )),
            DataSource::Csv { schema, .. } => schema.validate().map_err(|e| key("data.schema", e)),
            DataSource::Mnist { keep, .. } if keep.is_empty() => {
                Err(CliError::Config("at `data.keep`: list is empty".into()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
