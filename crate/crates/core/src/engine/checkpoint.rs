use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::BifConfig;
use super::global::GlobalImportance;
use super::local::ImportanceNetwork;
use super::objective::FeatureMap;
use crate::error::{BifError, Result};
use crate::nn::NetCheckpoint;

pub const IMPORTANCE_FORMAT: &str = "bif-importance";
pub const IMPORTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ImportanceState {
    Global { theta: Vec<f64>, alpha: Vec<f64> },
    Local { network: NetCheckpoint },
}

/// Serialised fitted importance together with the configuration and the
/// fingerprints of the data and classifier it was fitted against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceCheckpoint {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub state: ImportanceState,
    pub feature_map: FeatureMap,
    pub config: BifConfig,
    pub dataset_fingerprint: String,
    pub model_fingerprint: String,
}

/// A loaded importance model of either kind.
#[derive(Debug, Clone)]
pub enum FittedImportance {
    Global(GlobalImportance),
    Local(ImportanceNetwork),
}

impl ImportanceCheckpoint {
    pub fn from_global(
        imp: &GlobalImportance,
        config: &BifConfig,
        dataset: String,
        model: String,
    ) -> Self {
        Self {
            format: IMPORTANCE_FORMAT.into(),
            version: IMPORTANCE_VERSION,
            state: ImportanceState::Global {
                theta: imp.theta().to_vec(),
                alpha: imp.alpha(),
            },
            feature_map: imp.feature_map().clone(),
            config: config.clone(),
            dataset_fingerprint: dataset,
            model_fingerprint: model,
        }
    }

    pub fn from_local(
        imp: &ImportanceNetwork,
        config: &BifConfig,
        dataset: String,
        model: String,
    ) -> Self {
        Self {
            format: IMPORTANCE_FORMAT.into(),
            version: IMPORTANCE_VERSION,
            state: ImportanceState::Local {
                network: NetCheckpoint::from_net(imp.net()),
            },
            feature_map: imp.feature_map().clone(),
            config: config.clone(),
            dataset_fingerprint: dataset,
            model_fingerprint: model,
        }
    }

    pub fn restore(&self) -> Result<FittedImportance> {
        if self.format != IMPORTANCE_FORMAT || self.version != IMPORTANCE_VERSION {
            return Err(BifError::Format(format!(
                "expected {IMPORTANCE_FORMAT} v{IMPORTANCE_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        match &self.state {
            ImportanceState::Global { theta, .. } => Ok(FittedImportance::Global(
                GlobalImportance::from_theta(theta.clone(), self.feature_map.clone())?,
            )),
            ImportanceState::Local { network } => Ok(FittedImportance::Local(
                ImportanceNetwork::new(network.clone().into_net()?, self.feature_map.clone())?,
            )),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Architecture};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn global_round_trip() {
        let imp =
            GlobalImportance::from_theta(vec![0.5, -2.0, 3.0], FeatureMap::identity(3)).unwrap();
        let ck =
            ImportanceCheckpoint::from_global(&imp, &BifConfig::default(), "d".into(), "m".into());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imp.json");
        ck.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"mode\": \"global\""));
        let back = ImportanceCheckpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        match back.restore().unwrap() {
            FittedImportance::Global(g) => assert_eq!(g, imp),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn local_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture {
            hidden: vec![4],
            activation: Activation::Relu,
        };
        let imp = ImportanceNetwork::random(&arch, FeatureMap::identity(3), &mut rng).unwrap();
        let ck =
            ImportanceCheckpoint::from_local(&imp, &BifConfig::default(), "d".into(), "m".into());
        let json = serde_json::to_string(&ck).unwrap();
        let back: ImportanceCheckpoint = serde_json::from_str(&json).unwrap();
        match back.restore().unwrap() {
            FittedImportance::Local(n) => assert_eq!(n, imp),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_other_versions() {
        let imp = GlobalImportance::new(FeatureMap::identity(2));
        let mut ck =
            ImportanceCheckpoint::from_global(&imp, &BifConfig::default(), "d".into(), "m".into());
        ck.version = 7;
        assert!(matches!(ck.restore(), Err(BifError::Format(_))));
    }
}
