use std::path::Path;

use bif_core::engine::{
    fit_global_with_map, fit_local_with_map, FittedImportance, ImportanceCheckpoint, Mode,
};
use bif_core::eval::{mcc, posthoc_accuracy, select_truth_cardinality, topk, ConfusionCounts};
use bif_core::ingest::noisy_train;
use bif_core::nn::{train_classifier, FrozenModel, GradientNoise};
use bif_core::svg::bar_chart;
use bif_core::synth::{generate, write_csv, write_truth_csv};
use bif_core::tradeoff::{run_tradeoff, top_feature_stability, Stability, TradeoffRun};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};
use crate::data::{load, LoadedData};
use crate::error::CliError;
use crate::manifest::{existing_artifact, finish, prepare, write_artifact, Artifact};

pub const MODEL_FILE: &str = "model.json";
pub const IMPORTANCE_FILE: &str = "importance.json";

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn gen(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), CliError> {
    let DataSource::Syn(spec) = &cfg.data else {
        return Err(CliError::Config(
            "at `data.source`: gen needs a synthetic source".into(),
        ));
    };
    prepare(out, "gen", force)?;
    let ds = generate(spec)?;
    let data = format!("{}.csv", spec.id);
    let truth = format!("{}_truth.csv", spec.id);
    write_csv(&ds, &out.join(&data))?;
    write_truth_csv(&ds, &out.join(&truth))?;
    log::info!("wrote {} rows of {}", ds.len(), spec.id);
    let artifacts = vec![
        existing_artifact(out, &data)?,
        existing_artifact(out, &truth)?,
    ];
    finish(out, "gen", cfg, artifacts)
}

#[derive(Serialize)]
struct TrainReport<'a> {
    dataset: &'a str,
    n_train: usize,
    n_test: usize,
    train_accuracy: f64,
    test_accuracy: f64,
    noise: Option<GradientNoise>,
    dataset_fingerprint: String,
    model_fingerprint: String,
}

fn train_model(cfg: &RunConfig, data: &LoadedData) -> Result<FrozenModel, CliError> {
    let c = &cfg.classifier;
    Ok(match &c.noise {
        None => train_classifier(&data.train, &c.architecture, &c.train)?,
        Some(n) => noisy_train(&data.train, &c.architecture, &c.train, n.clip_norm, n.sigma)?,
    })
}

pub fn train(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), CliError> {
    prepare(out, "train", force)?;
    let data = load(&cfg.data)?;
    let g = train_model(cfg, &data)?;
    let ckpt = json_bytes(&g.to_checkpoint())?;
    let report = TrainReport {
        dataset: &data.name,
        n_train: data.train.len(),
        n_test: data.test.len(),
        train_accuracy: g.accuracy(&data.train)?,
        test_accuracy: if data.test.is_empty() {
            f64::NAN
        } else {
            g.accuracy(&data.test)?
        },
        noise: cfg.classifier.noise,
        dataset_fingerprint: data.train.fingerprint(),
        model_fingerprint: g.fingerprint(),
    };
    log::info!("test accuracy {:.4}", report.test_accuracy);
    let artifacts = vec![
        write_artifact(out, MODEL_FILE, &ckpt)?,
        write_artifact(out, "train_report.json", &json_bytes(&report)?)?,
    ];
    finish(out, "train", cfg, artifacts)
}

fn load_model(out: &Path) -> Result<FrozenModel, CliError> {
    let path = out.join(MODEL_FILE);
    if !path.exists() {
        return Err(CliError::Run(format!(
            "{} not found; run `bif train` first",
            path.display()
        )));
    }
    Ok(FrozenModel::load(&path)?)
}

type MeanAndSd = (Vec<f64>, Vec<f64>);

/// Per-instance mean importances over the groups of `data` for its test split.
fn instance_importances(
    fitted: &FittedImportance,
    data: &LoadedData,
) -> Result<Vec<MeanAndSd>, CliError> {
    Ok(match fitted {
        FittedImportance::Global(g) => {
            let p = g.params()?;
            vec![(p.mean().into_vec(), p.std_dev()); data.test.len()]
        }
        FittedImportance::Local(net) => net
            .explain_dataset(&data.test)?
            .into_iter()
            .map(|p| (p.mean().into_vec(), p.std_dev()))
            .collect(),
    })
}

fn column_means(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len().max(1) as f64;
    acc.into_iter().map(|a| a / n).collect()
}

#[derive(Serialize)]
struct ExplainReport<'a> {
    dataset: &'a str,
    mode: Mode,
    groups: &'a [String],
    /// Dirichlet mean; for local fits, averaged over the test split.
    mean: Vec<f64>,
    /// Dirichlet standard deviation; for local fits, averaged over the test split.
    std_dev: Vec<f64>,
    sum_std_dev: f64,
    alpha: Option<Vec<f64>>,
    loss_history: Vec<f64>,
}

pub fn explain(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), CliError> {
    prepare(out, "explain", force)?;
    let data = load(&cfg.data)?;
    let g = load_model(out)?;
    let dataset_fp = data.train.fingerprint();
    let (ckpt, history) = match cfg.bif.mode {
        Mode::Global => {
            let fit = fit_global_with_map(&g, &data.train, &cfg.bif, data.map.clone())?;
            let c = ImportanceCheckpoint::from_global(
                &fit.importance,
                &cfg.bif,
                dataset_fp,
                g.fingerprint(),
            );
            (c, fit.history)
        }
        Mode::Local => {
            let fit = fit_local_with_map(&g, &data.train, &cfg.bif, data.map.clone())?;
            let c = ImportanceCheckpoint::from_local(
                &fit.network,
                &cfg.bif,
                dataset_fp,
                g.fingerprint(),
            );
            (c, fit.history)
        }
    };
    let fitted = ckpt.restore()?;
    let (mean, std_dev, alpha) = match &fitted {
        FittedImportance::Global(imp) => {
            let p = imp.params()?;
            (p.mean().into_vec(), p.std_dev(), Some(p.alpha().to_vec()))
        }
        FittedImportance::Local(_) => {
            let per = instance_importances(&fitted, &data)?;
            let k = data.map.groups();
            let means: Vec<Vec<f64>> = per.iter().map(|p| p.0.clone()).collect();
            let sds: Vec<Vec<f64>> = per.iter().map(|p| p.1.clone()).collect();
            (column_means(&means, k), column_means(&sds, k), None)
        }
    };
    let svg = bar_chart(
        &format!("{} importance ({:?})", data.name, cfg.bif.mode).to_lowercase(),
        &data.group_names,
        &mean,
        &std_dev,
        "mean importance",
    );
    let report = ExplainReport {
        dataset: &data.name,
        mode: cfg.bif.mode,
        groups: &data.group_names,
        sum_std_dev: std_dev.iter().sum(),
        mean,
        std_dev,
        alpha,
        loss_history: history,
    };
    let artifacts = vec![
        write_artifact(out, IMPORTANCE_FILE, &json_bytes(&ckpt)?)?,
        write_artifact(out, "importance.svg", svg.as_bytes())?,
        write_artifact(out, "explain_report.json", &json_bytes(&report)?)?,
    ];
    finish(out, "explain", cfg, artifacts)
}

#[derive(Serialize)]
struct PosthocRow {
    k: usize,
    accuracy: f64,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    dataset: &'a str,
    mode: Mode,
    n_test: usize,
    /// Selection quality against the known relevant features, when available.
    mcc: Option<f64>,
    confusion: Option<ConfusionCounts>,
    posthoc: Vec<PosthocRow>,
    /// Summed Dirichlet standard deviation, averaged over the test split.
    sum_std_dev: f64,
}

pub fn eval(cfg: &RunConfig, out: &Path, force: bool) -> Result<(), CliError> {
    prepare(out, "eval", force)?;
    let data = load(&cfg.data)?;
    if data.test.is_empty() {
        return Err(CliError::Run("the test split is empty".into()));
    }
    let g = load_model(out)?;
    let path = out.join(IMPORTANCE_FILE);
    if !path.exists() {
        return Err(CliError::Run(format!(
            "{} not found; run `bif explain` first",
            path.display()
        )));
    }
    let ckpt = ImportanceCheckpoint::load(&path)?;
    if ckpt.model_fingerprint != g.fingerprint() {
        return Err(CliError::Run(
            "importance checkpoint was fitted to a different model".into(),
        ));
    }
    let fitted = ckpt.restore()?;
    let per = instance_importances(&fitted, &data)?;
    let means: Vec<Vec<f64>> = per.iter().map(|p| p.0.clone()).collect();
    let sum_sd = per.iter().map(|p| p.1.iter().sum::<f64>()).sum::<f64>() / per.len() as f64;

    let (mcc_value, confusion) = match data.test.truth() {
        Some(truth) if data.map.groups() == data.test.dim() => {
            let masks = select_truth_cardinality(&means, truth)?;
            let counts = ConfusionCounts::from_masks(&masks, truth)?;
            (Some(mcc(&counts)), Some(counts))
        }
        _ => (None, None),
    };
    let mut posthoc = Vec::new();
    for &k in cfg.eval.ks.iter().filter(|&&k| k <= data.map.groups()) {
        let masks = means
            .iter()
            .map(|m| Ok(data.map.expand_mask(&topk(m, k)?)))
            .collect::<Result<Vec<_>, bif_core::BifError>>()?;
        posthoc.push(PosthocRow {
            k,
            accuracy: posthoc_accuracy(&g, &data.test, &masks)?,
        });
    }
    let mut csv = String::from("metric,k,value\n");
    if let Some(m) = mcc_value {
        csv.push_str(&format!("mcc,,{m:?}\n"));
    }
    for row in &posthoc {
        csv.push_str(&format!("posthoc_accuracy,{},{:?}\n", row.k, row.accuracy));
    }
    csv.push_str(&format!("sum_std_dev,,{sum_sd:?}\n"));
    let report = EvalReport {
        dataset: &data.name,
        mode: cfg.bif.mode,
        n_test: data.test.len(),
        mcc: mcc_value,
        confusion,
        posthoc,
        sum_std_dev: sum_sd,
    };
    if let Some(m) = report.mcc {
        log::info!("mcc {m:.4}");
    }
    let artifacts = vec![
        write_artifact(out, "eval_report.json", &json_bytes(&report)?)?,
        write_artifact(out, "eval.csv", csv.as_bytes())?,
    ];
    finish(out, "eval", cfg, artifacts)
}

#[derive(Serialize)]
struct TradeoffReport<'a> {
    dataset: &'a str,
    run: &'a TradeoffRun,
    stability: Vec<StabilityAtK>,
}

#[derive(Serialize)]
struct StabilityAtK {
    k: usize,
    overlap: Vec<Stability>,
}

pub fn tradeoff(cfg: &RunConfig, out: &Path, force: bool, jobs: usize) -> Result<(), CliError> {
    if cfg.bif.mode != Mode::Global {
        return Err(CliError::Config(
            "at `bif.mode`: the trade-off harness needs global mode".into(),
        ));
    }
    prepare(out, "tradeoff", force)?;
    let data = load(&cfg.data)?;
    if data.map.groups() != data.train.dim() {
        return Err(CliError::Config(
            "at `data.source`: the trade-off harness needs ungrouped features".into(),
        ));
    }
    if data.test.is_empty() {
        return Err(CliError::Run("the test split is empty".into()));
    }
    let c = &cfg.classifier;
    let run = run_tradeoff(
        &data.train,
        &data.test,
        &c.architecture,
        &c.train,
        &cfg.bif,
        &cfg.tradeoff,
        jobs,
    )?;
    let stability = [1, 3, 5]
        .into_iter()
        .filter(|&k| k <= data.train.dim())
        .map(|k| {
            Ok(StabilityAtK {
                k,
                overlap: top_feature_stability(&run, k)?,
            })
        })
        .collect::<Result<Vec<_>, bif_core::BifError>>()?;
    let report = TradeoffReport {
        dataset: &data.name,
        run: &run,
        stability,
    };
    let artifacts: Vec<Artifact> = vec![
        write_artifact(out, "tradeoff.json", &json_bytes(&report)?)?,
        write_artifact(out, "tradeoff.csv", run.to_csv().as_bytes())?,
        write_artifact(out, "tradeoff.svg", run.to_svg().as_bytes())?,
    ];
    finish(out, "tradeoff", cfg, artifacts)
}
