//! Split gain, tie rules and the prefix scanner shared by both strategies.

use crate::matrix::Matrix;

/// Relative slack under which two gains count as tied.
pub const TIE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
}

/// Rows with `x[feature] <= threshold` go left. For histogram splits `bin`
/// is the last bin on the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub bin: Option<u16>,
    pub gain: f64,
    pub left_g: f64,
    pub left_h: f64,
    pub left_count: usize,
}

pub fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Loss reduction of splitting `(g, h)` into `(gl, hl)` and the remainder.
pub fn gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(g, h, lambda)) - gamma
}

/// Whether `candidate` beats `best` by more than the tie slack. Candidates are
/// offered in (feature, threshold) order, so ties keep the earlier one.
pub fn improves(candidate: f64, best: f64, parent_score: f64) -> bool {
    candidate > best + TIE_EPS * (best.abs() + parent_score)
}

/// Midpoint that always satisfies `a <= m < b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Running left-prefix sums over the groups of one node.
#[derive(Debug, Clone)]
pub(crate) struct Scanner {
    g: f64,
    h: f64,
    count: usize,
    parent_score: f64,
    params: SplitParams,
    gl: f64,
    hl: f64,
    cl: usize,
    best: Option<Split>,
}

impl Scanner {
    pub fn new(g: f64, h: f64, count: usize, params: SplitParams) -> Self {
        Scanner {
            g,
            h,
            count,
            parent_score: score(g, h, params.lambda),
            params,
            gl: 0.0,
            hl: 0.0,
            cl: 0,
            best: None,
        }
    }

    pub fn start_feature(&mut self) {
        self.gl = 0.0;
        self.hl = 0.0;
        self.cl = 0;
    }

    pub fn has_left(&self) -> bool {
        self.cl > 0
    }

    /// Consider splitting after everything added so far.
    pub fn offer(&mut self, feature: usize, threshold: f64, bin: Option<u16>) {
        if self.cl == 0 || self.cl >= self.count {
            return;
        }
        let mch = self.params.min_child_hessian;
        if self.hl < mch || self.h - self.hl < mch {
            return;
        }
        let gain = gain(self.gl, self.hl, self.g, self.h, self.params.lambda, self.params.gamma);
        let better = match &self.best {
            None => true,
            Some(b) => improves(gain, b.gain, self.parent_score),
        };
        if better {
            self.best = Some(Split {
                feature,
                threshold,
                bin,
                gain,
                left_g: self.gl,
                left_h: self.hl,
                left_count: self.cl,
            });
        }
    }

    pub fn add(&mut self, g: f64, h: f64, count: usize) {
        self.gl += g;
        self.hl += h;
        self.cl += count;
    }

    pub fn parent_score(&self) -> f64 {
        self.parent_score
    }

    pub fn take_best(&mut self) -> Option<Split> {
        self.best.take()
    }
}

/// Keep `a` unless `b` is strictly better; `a` must come from earlier features.
pub fn fold_best(a: Option<Split>, b: Option<Split>, parent_score: f64) -> Option<Split> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if improves(b.gain, a.gain, parent_score) { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Drop splits that do not reduce the loss.
pub fn accept(best: Option<Split>, parent_score: f64) -> Option<Split> {
    best.filter(|s| s.gain > 0.0 && s.gain > TIE_EPS * parent_score)
}

/// Sum of `g` and `h` over `rows` in ascending row order.
pub fn node_totals(rows: impl IntoIterator<Item = usize>, g: &[f64], h: &[f64]) -> (f64, f64, usize) {
    let (mut gs, mut hs, mut c) = (0.0, 0.0, 0);
    for r in rows {
        gs += g[r];
        hs += h[r];
        c += 1;
    }
    (gs, hs, c)
}

/// Best split of one node over every midpoint between consecutive distinct
/// values of every feature.
pub fn best_split_exact(
    rows: &[usize],
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    params: SplitParams,
) -> Option<Split> {
    let mut sorted_rows = rows.to_vec();
    sorted_rows.sort_unstable();
    let (gt, ht, n) = node_totals(sorted_rows.iter().copied(), g, h);
    let mut scanner = Scanner::new(gt, ht, n, params);
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    for f in 0..x.cols() {
        pairs.clear();
        pairs.extend(sorted_rows.iter().map(|&r| (x.get(r, f), r)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scan_sorted(&mut scanner, f, &pairs, g, h);
    }
    accept(scanner.take_best(), scanner.parent_score())
}

/// Scan `(value, row)` pairs sorted by value then row.
pub(crate) fn scan_sorted(scanner: &mut Scanner, feature: usize, pairs: &[(f64, usize)], g: &[f64], h: &[f64]) {
    scanner.start_feature();
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        let (mut gs, mut hs, mut c) = (0.0, 0.0, 0);
        while i < pairs.len() && pairs[i].0 == v {
            let r = pairs[i].1;
            gs += g[r];
            hs += h[r];
            c += 1;
            i += 1;
        }
        if scanner.has_left() {
            // previous group ended at pairs[i - c - 1]
            scanner.offer(feature, midpoint(pairs[i - c - 1].0, v), None);
        }
        scanner.add(gs, hs, c);
    }
}
