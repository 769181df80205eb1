//! Built-in datasets and CSV ingestion.

use std::path::Path;

use cvxnn::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
    #[error("label column `{0}` not found in the header")]
    MissingLabel(String),
    #[error("dataset is empty")]
    Empty,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Two Gaussian clusters, positives around `(1, 1)` and negatives around
    /// `(−1, −1)`.
    Clusters,
    /// The clusters with the last negative moved to the positive centroid.
    Anomaly,
}

/// `X = [x | 1]` for `x = (−2, −1, 0, 1, 2)` and `y = (1, −1, 1, 1, −1)`.
pub fn dataset_paper_1d() -> (Matrix, Vec<f64>) {
    let x = Matrix::from_fn(5, 2, |i, j| if j == 0 { i as f64 - 2.0 } else { 1.0 });
    (x, vec![1.0, -1.0, 1.0, 1.0, -1.0])
}

/// `n` points in the plane (no bias column), alternating positive and
/// negative labels, cluster standard deviation `0.5` truncated to the
/// class's half-plane.
pub fn dataset_2d_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<(Matrix, Vec<f64>), DataError> {
    if n < 4 {
        return Err(DataError::Invalid(format!("synthetic datasets need n ≥ 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    // each class stays on its side of x₁ + x₂ = 0, so only the anomaly can
    // fall inside the positive hull
    let mut x = Matrix::zeros(n, 2);
    for i in 0..n {
        loop {
            let p = [y[i] + noise.sample(&mut rng), y[i] + noise.sample(&mut rng)];
            if y[i] * (p[0] + p[1]) > 0.0 {
                x.row_mut(i).copy_from_slice(&p);
                break;
            }
        }
    }
    if kind == SyntheticKind::Anomaly {
        // the centroid of the positives lies inside their convex hull
        let pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
        let last = (0..n).rev().find(|&i| y[i] < 0.0).expect("n ≥ 4 has negatives");
        for j in 0..2 {
            x[(last, j)] = pos.iter().map(|&i| x[(i, j)]).sum::<f64>() / pos.len() as f64;
        }
    }
    Ok((x, y))
}

/// Numeric CSV with a header row. The label column is removed and the
/// remaining columns become features in header order.
pub fn load_csv(path: &Path, label_col: &str) -> Result<(Matrix, Vec<f64>), DataError> {
    let io = |e: std::io::Error| DataError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    parse_csv(file, label_col)
}

pub fn parse_csv(input: impl std::io::Read, label_col: &str) -> Result<(Matrix, Vec<f64>), DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(input);
    let csv_error = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        DataError::Parse {
            line,
            column: 0,
            message: e.to_string(),
        }
    };
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() {
        return Err(DataError::Empty);
    }
    let label = header
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| DataError::MissingLabel(label_col.to_string()))?;
    let width = header.len();
    let mut features = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(DataError::Parse {
                line,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                line,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: c + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            if c == label {
                y.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(DataError::Empty);
    }
    if width == 1 {
        return Err(DataError::Invalid("no feature columns besides the label".into()));
    }
    let x = Matrix::new(y.len(), width - 1, features).map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok((x, y))
}
