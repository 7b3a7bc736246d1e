//! Real-data ingestion and fold construction.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::seeding::CvType;

/// A tabular dataset with all-numeric predictors in their native units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub predictors: Vec<String>,
    pub response: String,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

pub fn load_dataset_csv(path: &Path, name: &str, response: &str) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(std::io::BufReader::new(f), name, response)
}

/// Reads a headered CSV. Every column other than `response` is a predictor
/// and must be numeric.
pub fn read_dataset_csv<R: Read>(input: R, name: &str, response: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let resp_idx = header.iter().position(|h| h == response).ok_or_else(|| {
        Error::Ingest(format!(
            "response column `{response}` not found (columns: {})",
            header.join(", ")
        ))
    })?;
    let predictors: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != resp_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if predictors.is_empty() {
        return Err(Error::Ingest("dataset has no predictor columns".into()));
    }
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Ingest(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                rec.len(),
                header.len()
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Ingest(format!("row {}: column `{}` is not numeric: `{field}`", line + 2, header[i]))
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest(format!("row {}: column `{}` is not finite", line + 2, header[i])));
            }
            if i == resp_idx {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if y.len() < 2 {
        return Err(Error::Ingest(format!("dataset `{name}` needs at least 2 rows, got {}", y.len())));
    }
    let x = DMatrix::from_row_slice(y.len(), predictors.len(), &values);
    Ok(Dataset {
        name: name.to_string(),
        predictors,
        response: response.to_string(),
        x,
        y,
    })
}

/// Training and held-out row indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub fold: u32,
    /// May repeat indices for bootstrap resamples.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Builds the folds of a study. Cross validation partitions a seeded
/// permutation into `folds` contiguous blocks whose sizes differ by at most
/// one; bootstrap fold `b` resamples `n` rows with replacement from the
/// stream `seed + b` and tests on the rows never drawn.
pub fn fold_splits(n: usize, cv_type: CvType, folds: usize, seed: u64) -> Result<Vec<Split>> {
    if folds == 0 {
        return Err(Error::Config("folds must be at least 1".into()));
    }
    match cv_type {
        CvType::CrossValidation => {
            if folds < 2 || folds > n {
                return Err(Error::Config(format!(
                    "cross validation needs 2 <= folds <= n, got folds={folds}, n={n}"
                )));
            }
            let perm = SplitMix64::new(seed).permutation(n);
            let (base, extra) = (n / folds, n % folds);
            let mut start = 0;
            Ok((0..folds)
                .map(|k| {
                    let size = base + usize::from(k < extra);
                    let mut test = perm[start..start + size].to_vec();
                    let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
                    start += size;
                    test.sort_unstable();
                    train.sort_unstable();
                    Split {
                        fold: k as u32 + 1,
                        train,
                        test,
                    }
                })
                .collect())
        }
        CvType::Bootstrap => {
            if n < 2 {
                return Err(Error::Config("bootstrap needs at least 2 rows".into()));
            }
            Ok((1..=folds as u64)
                .map(|b| {
                    let mut rng = SplitMix64::new(seed.wrapping_add(b));
                    loop {
                        let mut train: Vec<usize> = (0..n).map(|_| rng.below(n as u64) as usize).collect();
                        let mut drawn = vec![false; n];
                        for &i in &train {
                            drawn[i] = true;
                        }
                        let test: Vec<usize> = (0..n).filter(|&i| !drawn[i]).collect();
                        if !test.is_empty() {
                            train.sort_unstable();
                            return Split {
                                fold: b as u32,
                                train,
                                test,
                            };
                        }
                    }
                })
                .collect())
        }
    }
}

/// Per-column min/max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (min, range) = (0..x.ncols())
            .map(|j| {
                let c = x.column(j);
                let lo = c.min();
                (lo, c.max() - lo)
            })
            .unzip();
        Self { min, range }
    }

    /// Maps training rows into `[0, 1]`; constant columns map to 0. Rows
    /// outside the training range fall outside the unit interval.
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.range[j] > 0.0 {
                (x[(i, j)] - self.min[j]) / self.range[j]
            } else {
                0.0
            }
        })
    }
}

pub(crate) fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}
