//! Quantile bin boundaries and the binned training matrix.

use rayon::prelude::*;

use super::split::midpoint;
use crate::matrix::Matrix;

pub const MAX_BINS: usize = 256;

/// Per-feature boundaries. A value lands in bin `b` = number of boundaries
/// strictly below it, so `bin(x) <= b` exactly when `x <= boundaries[b]`.
pub fn build_bins(x: &Matrix, num_bins: usize) -> Vec<Vec<f64>> {
    (0..x.cols())
        .into_par_iter()
        .map(|f| {
            let mut col: Vec<f64> = (0..x.rows()).map(|r| x.get(r, f)).collect();
            col.sort_by(f64::total_cmp);
            feature_boundaries(&col, num_bins)
        })
        .collect()
}

/// Boundaries for one sorted column.
pub fn feature_boundaries(sorted: &[f64], num_bins: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= num_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(num_bins - 1);
    for j in 1..num_bins {
        let k = j * n / num_bins;
        let lo = sorted[k - 1];
        // first distinct value above `lo`
        let pos = distinct.partition_point(|&v| v <= lo);
        let Some(&hi) = distinct.get(pos) else {
            continue;
        };
        let b = midpoint(lo, hi);
        if out.last().is_none_or(|&last| b > last) {
            out.push(b);
        }
    }
    out
}

pub fn bin_of(boundaries: &[f64], x: f64) -> usize {
    boundaries.partition_point(|&b| b < x)
}

/// Column-major bin indices.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    rows: usize,
    cols: usize,
    bins: Vec<u8>,
    boundaries: Vec<Vec<f64>>,
    offsets: Vec<usize>,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix, boundaries: Vec<Vec<f64>>) -> Self {
        assert_eq!(boundaries.len(), x.cols());
        assert!(boundaries.iter().all(|b| b.len() < MAX_BINS));
        let (rows, cols) = (x.rows(), x.cols());
        let mut bins = vec![0u8; rows * cols];
        bins.par_chunks_mut(rows.max(1))
            .zip(boundaries.par_iter())
            .enumerate()
            .for_each(|(f, (col, bounds))| {
                for (r, b) in col.iter_mut().enumerate() {
                    *b = bin_of(bounds, x.get(r, f)) as u8;
                }
            });
        let mut offsets = Vec::with_capacity(cols + 1);
        offsets.push(0);
        for b in &boundaries {
            offsets.push(offsets.last().unwrap() + b.len() + 1);
        }
        BinnedMatrix {
            rows,
            cols,
            bins,
            boundaries,
            offsets,
        }
    }

    pub fn from_matrix(x: &Matrix, num_bins: usize) -> Self {
        BinnedMatrix::new(x, build_bins(x, num_bins))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, f: usize) -> &[u8] {
        &self.bins[f * self.rows..(f + 1) * self.rows]
    }

    pub fn num_bins(&self, f: usize) -> usize {
        self.boundaries[f].len() + 1
    }

    pub fn max_bins(&self) -> usize {
        (0..self.cols).map(|f| self.num_bins(f)).max().unwrap_or(1)
    }

    /// Start of each feature's block in a packed histogram; the last entry
    /// is the total bin count.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn boundaries(&self) -> &[Vec<f64>] {
        &self.boundaries
    }

    pub fn into_boundaries(self) -> Vec<Vec<f64>> {
        self.boundaries
    }
}
