//! Exact greedy growth: every feature is presorted once and each tree level
//! is found with one pass over every sorted column.

use rayon::prelude::*;

use super::split::{accept, fold_best, midpoint, node_totals, Scanner, Split, SplitParams};
use super::tree::{TreeBuilder, TreeNode};
use crate::matrix::Matrix;

const DONE: u32 = u32::MAX;

pub(crate) struct Presorted {
    /// Rows of each feature ordered by (value, row).
    order: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let (order, values) = (0..x.cols())
            .into_par_iter()
            .map(|f| {
                let mut rows: Vec<u32> = (0..x.rows() as u32).collect();
                rows.sort_by(|&a, &b| {
                    x.get(a as usize, f)
                        .total_cmp(&x.get(b as usize, f))
                        .then(a.cmp(&b))
                });
                let vals = rows.iter().map(|&r| x.get(r as usize, f)).collect();
                (rows, vals)
            })
            .unzip();
        Presorted { order, values }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LevelNode {
    id: usize,
    g: f64,
    h: f64,
    count: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Group {
    last: f64,
    g: f64,
    h: f64,
    count: usize,
}

enum Decision {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left_slot: u32 },
}

/// Grow one tree; returns it with the leaf weight reached by every row.
pub(crate) fn grow(
    x: &Matrix,
    pre: &Presorted,
    g: &[f64],
    h: &[f64],
    params: SplitParams,
    max_depth: usize,
) -> (TreeNode, Vec<f64>) {
    let n = x.rows();
    let mut slot = vec![0u32; n];
    let mut out = vec![0.0; n];
    let mut builder = TreeBuilder::default();
    let root = builder.add();
    let (g0, h0, c0) = node_totals(0..n, g, h);
    let mut level = vec![LevelNode {
        id: root,
        g: g0,
        h: h0,
        count: c0,
    }];

    for depth in 0..=max_depth {
        if level.is_empty() {
            break;
        }
        let bests = if depth < max_depth {
            find_level_splits(pre, &slot, &level, g, h, params)
        } else {
            vec![None; level.len()]
        };

        let mut next = Vec::new();
        let decisions: Vec<Decision> = level
            .iter()
            .zip(bests)
            .map(|(node, best)| match best {
                Some(s) => {
                    let (l, r) = builder.set_split(node.id, s.feature, s.threshold, None);
                    let left_slot = next.len() as u32;
                    next.push(LevelNode { id: l, ..Default::default() });
                    next.push(LevelNode { id: r, ..Default::default() });
                    Decision::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left_slot,
                    }
                }
                None => {
                    let w = -node.g / (node.h + params.lambda);
                    builder.set_leaf(node.id, w);
                    Decision::Leaf(w)
                }
            })
            .collect();

        for row in 0..n {
            let s = slot[row];
            if s == DONE {
                continue;
            }
            match decisions[s as usize] {
                Decision::Leaf(w) => {
                    out[row] = w;
                    slot[row] = DONE;
                }
                Decision::Split {
                    feature,
                    threshold,
                    left_slot,
                } => {
                    let child = if x.get(row, feature) <= threshold {
                        left_slot
                    } else {
                        left_slot + 1
                    };
                    slot[row] = child;
                    let c = &mut next[child as usize];
                    c.g += g[row];
                    c.h += h[row];
                    c.count += 1;
                }
            }
        }
        level = next;
    }
    (builder.finish(), out)
}

fn find_level_splits(
    pre: &Presorted,
    slot: &[u32],
    level: &[LevelNode],
    g: &[f64],
    h: &[f64],
    params: SplitParams,
) -> Vec<Option<Split>> {
    let per_feature: Vec<Vec<Option<Split>>> = (0..pre.order.len())
        .into_par_iter()
        .map(|f| {
            let mut scanners: Vec<Scanner> = level
                .iter()
                .map(|nd| Scanner::new(nd.g, nd.h, nd.count, params))
                .collect();
            let mut groups = vec![Group::default(); level.len()];
            for (&row, &v) in pre.order[f].iter().zip(&pre.values[f]) {
                let s = slot[row as usize];
                if s == DONE {
                    continue;
                }
                let grp = &mut groups[s as usize];
                if grp.count > 0 && v != grp.last {
                    let sc = &mut scanners[s as usize];
                    sc.add(grp.g, grp.h, grp.count);
                    sc.offer(f, midpoint(grp.last, v), None);
                    *grp = Group::default();
                }
                grp.last = v;
                grp.g += g[row as usize];
                grp.h += h[row as usize];
                grp.count += 1;
            }
            scanners.iter_mut().map(Scanner::take_best).collect()
        })
        .collect();

    level
        .iter()
        .enumerate()
        .map(|(s, node)| {
            let parent = super::split::score(node.g, node.h, params.lambda);
            let best = per_feature
                .iter()
                .fold(None, |acc, feat| fold_best(acc, feat[s], parent));
            accept(best, parent)
        })
        .collect()
}
