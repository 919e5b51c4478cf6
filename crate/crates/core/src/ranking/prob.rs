//! Plackett-Luce permutation probabilities and top-one (softmax) probabilities.

use super::Permutation;
use crate::error::{Error, Result};

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `out[j] = log Σ_{t ≥ j} exp(ranked[t])`
pub(crate) fn suffix_log_sum_exp(ranked: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ranked.len()];
    let mut acc = f64::NEG_INFINITY;
    for j in (0..ranked.len()).rev() {
        acc = log_add_exp(acc, ranked[j]);
        out[j] = acc;
    }
    out
}

fn check_scores(scores: &[f64], perm: &Permutation) -> Result<()> {
    if scores.is_empty() || scores.len() != perm.len() {
        return Err(Error::Input(format!(
            "{} scores for a permutation of length {}",
            scores.len(),
            perm.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("non-finite score".into()));
    }
    Ok(())
}

/// `log P_z(π)`, summed factor by factor in log space.
pub fn log_permutation_probability(scores: &[f64], perm: &Permutation) -> Result<f64> {
    check_scores(scores, perm)?;
    let ranked = perm.apply(scores);
    let lse = suffix_log_sum_exp(&ranked);
    Ok(ranked.iter().zip(&lse).map(|(s, z)| s - z).sum())
}

pub fn permutation_probability(scores: &[f64], perm: &Permutation) -> Result<f64> {
    let p = log_permutation_probability(scores, perm)?.exp();
    if p > 0.0 && p.is_finite() {
        Ok(p.min(1.0))
    } else {
        Err(Error::Numeric(format!(
            "permutation probability underflows for k = {}",
            scores.len()
        )))
    }
}

/// Probability that item `j` is ranked first: the softmax of `scores` at `j`.
pub fn top_one_probability(scores: &[f64], j: usize) -> Result<f64> {
    if j >= scores.len() {
        return Err(Error::Input(format!("index {j} out of range for {} scores", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("non-finite score".into()));
    }
    Ok(softmax(scores)[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_item_has_probability_one() {
        assert_eq!(permutation_probability(&[3.7], &Permutation::identity(1)).unwrap(), 1.0);
    }

    #[test]
    fn uniform_scores_give_inverse_factorial() {
        let p = permutation_probability(&[0.5; 4], &Permutation::from_order(vec![2, 0, 3, 1]).unwrap()).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 24.0, epsilon = 1e-15);
    }

    #[test]
    fn two_item_arithmetic() {
        let p = permutation_probability(&[2f64.ln(), 0.0], &Permutation::identity(2)).unwrap();
        assert_abs_diff_eq!(p, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let scores: Vec<f64> = (0..50).map(|i| 800.0 - i as f64).collect();
        let p = permutation_probability(&scores, &Permutation::identity(50)).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn huge_uniform_list_underflows_to_error() {
        assert!(permutation_probability(&[0.0; 200], &Permutation::identity(200)).is_err());
        let lp = log_permutation_probability(&[0.0; 200], &Permutation::identity(200)).unwrap();
        assert!(lp.is_finite());
    }

    #[test]
    fn top_one_values() {
        assert_abs_diff_eq!(top_one_probability(&[1.0; 5], 3).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(top_one_probability(&[3f64.ln(), 0.0], 0).unwrap(), 0.75, epsilon = 1e-15);
        let a = top_one_probability(&[0.3, -1.2, 2.0], 2).unwrap();
        let b = top_one_probability(&[100.3, 98.8, 102.0], 2).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert!(top_one_probability(&[1.0], 1).is_err());
    }

    #[test]
    fn log_add_exp_matches_direct() {
        assert_abs_diff_eq!(log_add_exp(1.0, 2.0), (1f64.exp() + 2f64.exp()).ln(), epsilon = 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 0.5), 0.5);
    }
}
