//! Synthetic binary classification problems Syn1 to Syn6.
//!
//! Every feature is standard normal and `p(y = 1 | x) = 1 / (1 + r(x))`.
//! Features are written X1, X2, … in docs and reports; `x[0]` is X1.
//!
//! | id   | ln r(x)                                        | relevant |
//! |------|------------------------------------------------|----------|
//! | syn1 | X1·X2                                          | X1, X2 |
//! | syn2 | X3² + X4² + X5² + X6² − 4                      | X3..X6 |
//! | syn3 | −100 sin(2·X7) + 2|X8| + X9 + exp(−X10)        | X7..X10 |
//! | syn4 | syn1 if X11 < 0 else syn2                      | branch ∪ X11 |
//! | syn5 | syn1 if X11 < 0 else syn3                      | branch ∪ X11 |
//! | syn6 | syn2 if X11 < 0 else syn3                      | branch ∪ X11 |

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{shape_err, BifError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynId {
    Syn1,
    Syn2,
    Syn3,
    Syn4,
    Syn5,
    Syn6,
}

impl SynId {
    pub const ALL: [SynId; 6] = [
        SynId::Syn1,
        SynId::Syn2,
        SynId::Syn3,
        SynId::Syn4,
        SynId::Syn5,
        SynId::Syn6,
    ];

    pub fn dim(self) -> usize {
        match self {
            SynId::Syn1 | SynId::Syn2 | SynId::Syn3 => 10,
            _ => 11,
        }
    }

    /// The two pure problems a switched problem chooses between.
    fn branches(self) -> Option<(SynId, SynId)> {
        match self {
            SynId::Syn4 => Some((SynId::Syn1, SynId::Syn2)),
            SynId::Syn5 => Some((SynId::Syn1, SynId::Syn3)),
            SynId::Syn6 => Some((SynId::Syn2, SynId::Syn3)),
            _ => None,
        }
    }

    pub fn is_switched(self) -> bool {
        self.branches().is_some()
    }
}

impl fmt::Display for SynId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = SynId::ALL.iter().position(|s| s == self).unwrap() + 1;
        write!(f, "syn{n}")
    }
}

impl FromStr for SynId {
    type Err = BifError;

    fn from_str(s: &str) -> Result<Self> {
        SynId::ALL
            .into_iter()
            .find(|id| id.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| BifError::Input(format!("unknown synthetic dataset '{s}'")))
    }
}

const SWITCH: usize = 10;

fn resolve(id: SynId, x: &[f64]) -> SynId {
    match id.branches() {
        Some((neg, pos)) => {
            if x[SWITCH] < 0.0 {
                neg
            } else {
                pos
            }
        }
        None => id,
    }
}

fn check_len(id: SynId, x: &[f64]) -> Result<()> {
    if x.len() != id.dim() {
        return Err(shape_err(format!(
            "{id} expects {} features, got {}",
            id.dim(),
            x.len()
        )));
    }
    Ok(())
}

/// ln r(x).
pub fn log_odds(id: SynId, x: &[f64]) -> Result<f64> {
    check_len(id, x)?;
    Ok(match resolve(id, x) {
        SynId::Syn1 => x[0] * x[1],
        SynId::Syn2 => x[2..6].iter().map(|v| v * v).sum::<f64>() - 4.0,
        SynId::Syn3 => -100.0 * (2.0 * x[6]).sin() + 2.0 * x[7].abs() + x[8] + (-x[9]).exp(),
        _ => unreachable!(),
    })
}

/// p(y = 1 | x) = sigmoid(−ln r), evaluated without forming r.
pub fn label_probability(id: SynId, x: &[f64]) -> Result<f64> {
    let z = -log_odds(id, x)?;
    Ok(if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    })
}

/// Ground-truth relevant features of `x`. For switched problems the switch
/// X11 is included when `include_switch` is set.
pub fn truth_mask(id: SynId, x: &[f64], include_switch: bool) -> Result<Vec<bool>> {
    check_len(id, x)?;
    let mut mask = vec![false; id.dim()];
    let range = match resolve(id, x) {
        SynId::Syn1 => 0..2,
        SynId::Syn2 => 2..6,
        SynId::Syn3 => 6..10,
        _ => unreachable!(),
    };
    mask[range].iter_mut().for_each(|m| *m = true);
    if id.is_switched() && include_switch {
        mask[SWITCH] = true;
    }
    Ok(mask)
}

fn default_include_switch() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynSpec {
    pub id: SynId,
    pub n: usize,
    pub seed: u64,
    /// Count X11 as relevant in switched problems.
    #[serde(default = "default_include_switch")]
    pub include_switch: bool,
}

impl SynSpec {
    pub fn new(id: SynId, n: usize, seed: u64) -> Self {
        Self {
            id,
            n,
            seed,
            include_switch: true,
        }
    }
}

/// Draws one instance from its own ChaCha stream, so instance `i` does not
/// depend on how many others are generated.
fn draw_instance(id: SynId, seed: u64, index: u64) -> (Vec<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let x: Vec<f64> = (0..id.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let p = label_probability(id, &x).expect("dimension fixed by id");
    let y = usize::from(rng.random::<f64>() < p);
    (x, y)
}

pub fn generate(spec: &SynSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(BifError::Input("synthetic datasets need n >= 1".into()));
    }
    let d = spec.id.dim();
    let mut features = Array2::zeros((spec.n, d));
    let mut labels = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let (x, y) = draw_instance(spec.id, spec.seed, i as u64);
        features.row_mut(i).assign(&ndarray::ArrayView1::from(&x));
        truth.push(truth_mask(spec.id, &x, spec.include_switch)?);
        labels.push(y);
    }
    let names = (1..=d).map(|j| format!("X{j}")).collect();
    Dataset::new(features, labels, 2)?
        .with_feature_names(names)?
        .with_truth(truth)
}

/// Generates and splits 80/20 into train and test, in generation order.
pub fn generate_split(spec: &SynSpec) -> Result<Split> {
    let ds = generate(spec)?;
    let n_train = (ds.len() * 4).div_ceil(5).min(ds.len());
    Ok(ds.split_at(n_train))
}

/// Writes features and label as CSV with a header (`X1,…,y`).
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ds.feature_names().to_vec();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, y) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the truth masks as 0/1 CSV with the same feature header.
pub fn write_truth_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let truth = ds
        .truth()
        .ok_or_else(|| BifError::Input("dataset carries no truth masks".into()))?;
    let mut out = File::create(path)?;
    writeln!(out, "{}", ds.feature_names().join(","))?;
    for mask in truth {
        let cells: Vec<&str> = mask.iter().map(|&m| if m { "1" } else { "0" }).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Reads a dataset written by [`write_csv`], with optional truth masks.
pub fn read_csv(data: &Path, truth: Option<&Path>) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(data)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.last().map(String::as_str) != Some("y") {
        return Err(BifError::Format("last column must be the label 'y'".into()));
    }
    let d = header.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        for (j, cell) in rec.iter().enumerate() {
            let parse_err = |message: String| BifError::Parse {
                row: row + 1,
                column: header[j].clone(),
                message,
            };
            if j < d {
                values.push(cell.parse::<f64>().map_err(|e| parse_err(e.to_string()))?);
            } else {
                labels.push(
                    cell.parse::<usize>()
                        .map_err(|e| parse_err(e.to_string()))?,
                );
            }
        }
    }
    let n = labels.len();
    let features =
        Array2::from_shape_vec((n, d), values).map_err(|e| BifError::Format(e.to_string()))?;
    let ds = Dataset::new(features, labels, 2)?.with_feature_names(header[..d].to_vec())?;
    match truth {
        None => Ok(ds),
        Some(path) => {
            let mut r = csv::Reader::from_path(path)?;
            let masks = r
                .records()
                .map(|rec| Ok(rec?.iter().map(|c| c == "1").collect()))
                .collect::<Result<Vec<Vec<bool>>>>()?;
            ds.with_truth(masks)
        }
    }
}
