use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Partition, VarParams};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// On-disk model: `{"n", "p", "A": [[...]], "Sigma": [[...]], "partition"}`
/// with matrices stored as lists of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    pub partition: Partition,
}

fn rows_to_mat(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Mat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!("{name} must be {nrows}x{ncols}")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelFile {
    pub fn from_model(model: &VarParams, partition: Partition) -> Self {
        ModelFile {
            n: model.n(),
            p: model.p(),
            a: mat_to_rows(model.a()),
            sigma: mat_to_rows(model.sigma()),
            partition,
        }
    }

    /// Converts to a validated model; errors name the violated invariant.
    pub fn into_model(self) -> Result<(VarParams, Partition)> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidModel("n and p must be >= 1".into()));
        }
        let part = Partition::new(self.partition.nx, self.partition.ny)
            .map_err(|_| Error::InvalidModel("partition blocks nx, ny must be >= 1".into()))?;
        if part.n() != self.n {
            return Err(Error::InvalidModel(format!(
                "partition nx + ny = {} must equal n = {}",
                part.n(),
                self.n
            )));
        }
        let a = rows_to_mat("A", &self.a, self.n, self.n * self.p)?;
        let sigma = rows_to_mat("Sigma", &self.sigma, self.n, self.n)?;
        let model = VarParams::new(a, sigma)?;
        Ok((model, part))
    }
}

pub fn read_model_file(path: &Path) -> Result<(VarParams, Partition)> {
    let text = fs::read_to_string(path)?;
    let f: ModelFile = serde_json::from_str(&text)?;
    f.into_model()
}

pub fn write_model_file(path: &Path, model: &VarParams, partition: Partition) -> Result<()> {
    let text = serde_json::to_string_pretty(&ModelFile::from_model(model, partition))?;
    fs::write(path, text)?;
    Ok(())
}
