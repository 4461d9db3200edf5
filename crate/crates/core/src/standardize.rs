//! Per-feature standardization fitted on training data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `z = (x - mean) / scale`. Statistics repeat with period `mean.len()`
/// along a row, so per-channel statistics apply to every time step of a
/// time-major window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// One mean/scale per column.
    pub fn fit(x: &Matrix) -> Result<Self> {
        Standardizer::fit_periodic(x, x.cols())
    }

    /// One mean/scale per residue class `column % period`.
    pub fn fit_periodic(x: &Matrix, period: usize) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidData("cannot standardize an empty matrix".into()));
        }
        if period == 0 || x.cols() % period != 0 {
            return Err(Error::Dimension {
                expected: x.cols(),
                got: period,
            });
        }
        let mut sum = vec![0.0; period];
        let mut count = 0usize;
        for row in x.iter_rows() {
            for chunk in row.chunks_exact(period) {
                for (s, v) in sum.iter_mut().zip(chunk) {
                    *s += v;
                }
                count += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; period];
        for row in x.iter_rows() {
            for chunk in row.chunks_exact(period) {
                for ((q, v), m) in sq.iter_mut().zip(chunk).zip(&mean) {
                    *q += (v - m) * (v - m);
                }
            }
        }
        let scale = sq
            .iter()
            .map(|q| {
                let sd = (q / count as f64).sqrt();
                if sd > 1e-12 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        let p = self.mean.len();
        for (i, (o, v)) in out.iter_mut().zip(row).enumerate() {
            *o = (v - self.mean[i % p]) / self.scale[i % p];
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        self.apply_row(row, &mut out);
        out
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..x.rows() {
            self.apply_row(x.row(r), out.row_mut(r));
        }
        out
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        if self.mean.is_empty() || width % self.mean.len() != 0 {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                got: width,
            });
        }
        Ok(())
    }
}
