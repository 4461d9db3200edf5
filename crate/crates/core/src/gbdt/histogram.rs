//! Histogram growth: per-node gradient histograms over pre-binned features,
//! with the larger child derived as parent minus the smaller sibling.

use rayon::prelude::*;

use super::binning::BinnedMatrix;
use super::split::{accept, fold_best, node_totals, score, Scanner, Split, SplitParams};
use super::tree::{TreeBuilder, TreeNode};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Bin {
    pub g: f64,
    pub h: f64,
    pub count: u32,
}

/// One block of `num_bins(f)` bins per feature, packed at `offsets()`.
pub(crate) fn build_hist(binned: &BinnedMatrix, rows: &[u32], g: &[f64], h: &[f64]) -> Vec<Bin> {
    let offsets = binned.offsets();
    let mut bins = vec![Bin::default(); offsets[binned.cols()]];
    let mut blocks = Vec::with_capacity(binned.cols());
    let mut rest = &mut bins[..];
    for w in offsets.windows(2) {
        let (block, tail) = rest.split_at_mut(w[1] - w[0]);
        blocks.push(block);
        rest = tail;
    }
    blocks.into_par_iter().enumerate().for_each(|(f, hb)| {
        let col = binned.column(f);
        for &r in rows {
            let r = r as usize;
            let b = &mut hb[col[r] as usize];
            b.g += g[r];
            b.h += h[r];
            b.count += 1;
        }
    });
    bins
}

fn subtract(parent: &mut [Bin], child: &[Bin]) {
    for (p, c) in parent.iter_mut().zip(child) {
        p.g -= c.g;
        p.h -= c.h;
        p.count -= c.count;
    }
}

fn scan(
    hist: &[Bin],
    binned: &BinnedMatrix,
    totals: (f64, f64, usize),
    params: SplitParams,
) -> Option<Split> {
    let (gt, ht, n) = totals;
    let parent = score(gt, ht, params.lambda);
    let offsets = binned.offsets();
    let per_feature: Vec<Option<Split>> = (0..binned.cols())
        .into_par_iter()
        .map(|f| {
            let bounds = &binned.boundaries()[f];
            let hb = &hist[offsets[f]..offsets[f + 1]];
            let mut sc = Scanner::new(gt, ht, n, params);
            let mut prev: Option<usize> = None;
            for (b, bin) in hb.iter().enumerate() {
                if bin.count == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    sc.offer(f, bounds[p], Some(p as u16));
                }
                sc.add(bin.g, bin.h, bin.count as usize);
                prev = Some(b);
            }
            sc.take_best()
        })
        .collect();
    let best = per_feature.into_iter().fold(None, |acc, s| fold_best(acc, s, parent));
    accept(best, parent)
}

/// Best split of one node over the bin boundaries of every feature.
pub fn best_split_histogram(
    rows: &[usize],
    binned: &BinnedMatrix,
    g: &[f64],
    h: &[f64],
    params: SplitParams,
) -> Option<Split> {
    let mut sorted: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    sorted.sort_unstable();
    let totals = node_totals(sorted.iter().map(|&r| r as usize), g, h);
    let hist = build_hist(binned, &sorted, g, h);
    scan(&hist, binned, totals, params)
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    g: &'a [f64],
    h: &'a [f64],
    params: SplitParams,
    max_depth: usize,
    rows: Vec<u32>,
    builder: TreeBuilder,
    out: Vec<f64>,
}

pub(crate) fn grow(
    binned: &BinnedMatrix,
    g: &[f64],
    h: &[f64],
    params: SplitParams,
    max_depth: usize,
) -> (TreeNode, Vec<f64>) {
    let n = binned.rows();
    let mut gr = Grower {
        binned,
        g,
        h,
        params,
        max_depth,
        rows: (0..n as u32).collect(),
        builder: TreeBuilder::default(),
        out: vec![0.0; n],
    };
    let root = gr.builder.add();
    let totals = node_totals(0..n, g, h);
    let hist = (max_depth > 0).then(|| build_hist(binned, &gr.rows, g, h));
    gr.grow_node(root, 0, n, 0, totals, hist);
    (gr.builder.finish(), gr.out)
}

impl Grower<'_> {
    fn leaf(&mut self, id: usize, start: usize, end: usize, totals: (f64, f64, usize)) {
        let w = -totals.0 / (totals.1 + self.params.lambda);
        self.builder.set_leaf(id, w);
        for &r in &self.rows[start..end] {
            self.out[r as usize] = w;
        }
    }

    fn grow_node(
        &mut self,
        id: usize,
        start: usize,
        end: usize,
        depth: usize,
        totals: (f64, f64, usize),
        hist: Option<Vec<Bin>>,
    ) {
        let Some(mut hist) = hist.filter(|_| depth < self.max_depth) else {
            return self.leaf(id, start, end, totals);
        };
        let Some(split) = scan(&hist, self.binned, totals, self.params) else {
            return self.leaf(id, start, end, totals);
        };
        let bin = split.bin.expect("histogram split carries its bin");
        let col = self.binned.column(split.feature);
        let (left, right): (Vec<u32>, Vec<u32>) = self.rows[start..end]
            .iter()
            .partition(|&&r| u16::from(col[r as usize]) <= bin);
        let mid = start + left.len();
        self.rows[start..mid].copy_from_slice(&left);
        self.rows[mid..end].copy_from_slice(&right);

        let lt = node_totals(left.iter().map(|&r| r as usize), self.g, self.h);
        let rt = node_totals(right.iter().map(|&r| r as usize), self.g, self.h);
        let (lh, rh) = if depth + 1 < self.max_depth {
            let small_left = left.len() <= right.len();
            let small = build_hist(
                self.binned,
                if small_left { &left } else { &right },
                self.g,
                self.h,
            );
            subtract(&mut hist, &small);
            if small_left {
                (Some(small), Some(hist))
            } else {
                (Some(hist), Some(small))
            }
        } else {
            (None, None)
        };
        let (lid, rid) = self
            .builder
            .set_split(id, split.feature, split.threshold, Some(bin));
        self.grow_node(lid, start, mid, depth + 1, lt, lh);
        self.grow_node(rid, mid, end, depth + 1, rt, rh);
    }
}
