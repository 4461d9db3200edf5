//! Multiclass softmax cross-entropy.

pub const MIN_HESSIAN: f64 = 1e-16;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Gradient and diagonal hessian of the log loss w.r.t. the logits.
pub fn softmax_grad_hess(logits: &[f64], true_class: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let g = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk - if k == true_class { 1.0 } else { 0.0 })
        .collect();
    let h = p.iter().map(|&pk| (pk * (1.0 - pk)).max(MIN_HESSIAN)).collect();
    (g, h)
}

/// Mean negative log-likelihood over rows of a row-major `n x k` logit table.
pub fn log_loss(logits: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    let mut p = vec![0.0; k];
    for (row, &y) in logits.chunks_exact(k).zip(labels) {
        p.copy_from_slice(row);
        softmax_in_place(&mut p);
        total -= p[y].max(1e-300).ln();
    }
    total / labels.len().max(1) as f64
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (g, h) = softmax_grad_hess(&[0.0, 0.0, 0.0], 0);
        assert_abs_diff_eq!(g[0], -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[0], 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn saturated_logits() {
        let (g, h) = softmax_grad_hess(&[100.0, 0.0, 0.0], 0);
        assert!(g.iter().all(|x| x.abs() < 1e-40));
        assert!(h.iter().all(|&x| x == MIN_HESSIAN));
    }

    #[test]
    fn hand_evaluated_softmax() {
        // oracle: scalar evaluation of e^z / sum e^z
        let z = [1.0f64, 2.0, 3.0];
        let s: f64 = z.iter().map(|v| v.exp()).sum();
        let p: Vec<f64> = z.iter().map(|v| v.exp() / s).collect();
        let (g, _) = softmax_grad_hess(&z, 2);
        assert_abs_diff_eq!(p[0], 0.09003, epsilon = 1e-5);
        assert_abs_diff_eq!(p[1], 0.24473, epsilon = 1e-5);
        assert_abs_diff_eq!(p[2], 0.66524, epsilon = 1e-5);
        assert_abs_diff_eq!(g[0], p[0], epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], p[1], epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], p[2] - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], -0.33476, epsilon = 1e-5);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
    }

    proptest! {
        #[test]
        fn gradients_sum_to_zero(z in proptest::collection::vec(-30.0f64..30.0, 2..6), y in 0usize..6) {
            let y = y % z.len();
            let (g, h) = softmax_grad_hess(&z, y);
            prop_assert!(g.iter().sum::<f64>().abs() < 1e-12);
            prop_assert!(h.iter().all(|&x| (MIN_HESSIAN..=0.25).contains(&x)));
            prop_assert!(g[y] <= 0.0);
        }
    }
}
