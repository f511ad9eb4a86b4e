use bif_core::engine::FeatureMap;
use bif_core::ingest::{load_csv, load_mnist, PatchView};
use bif_core::synth::generate_split;
use bif_core::Dataset;

use crate::config::DataSource;
use crate::error::CliError;

pub struct LoadedData {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub map: FeatureMap,
    /// Names of the importance groups (features, or patches for images).
    pub group_names: Vec<String>,
}

fn head(ds: Dataset, limit: Option<usize>) -> Dataset {
    match limit {
        Some(n) if n < ds.len() => ds.split_at(n).train,
        _ => ds,
    }
}

pub fn load(source: &DataSource) -> Result<LoadedData, CliError> {
    match source {
        DataSource::Syn(spec) => {
            let split = generate_split(spec)?;
            let map = FeatureMap::identity(split.train.dim());
            Ok(LoadedData {
                name: spec.id.to_string(),
                group_names: split.train.feature_names().to_vec(),
                train: split.train,
                test: split.test,
                map,
            })
        }
        DataSource::Csv { path, schema } => {
            let t = load_csv(path, schema)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(LoadedData {
                name,
                group_names: t.train.feature_names().to_vec(),
                map: FeatureMap::identity(t.train.dim()),
                train: t.train,
                test: t.test,
            })
        }
        DataSource::Mnist {
            train_images,
            train_labels,
            test_images,
            test_labels,
            keep,
            limit,
        } => {
            let (train, view): (Dataset, PatchView) = load_mnist(train_images, train_labels, keep)?;
            let (test, _) = load_mnist(test_images, test_labels, keep)?;
            let digits: Vec<String> = keep.iter().map(u8::to_string).collect();
            Ok(LoadedData {
                name: format!("mnist-{}", digits.join("-")),
                train: head(train, *limit),
                test: head(test, *limit),
                map: view.feature_map(),
                group_names: (0..view.patch_count())
                    .map(|p| format!("patch{p}"))
                    .collect(),
            })
        }
    }
}
