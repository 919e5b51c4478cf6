//! Top-rank enhanced ListNet by exhaustive enumeration of all k! rankings.
//!
//! Only usable for very short lists; the optimizer never calls it. The
//! permutation weight is the Plackett-Luce probability of the ranking under
//! eval scores.

use super::loss::position_costs;
use super::prob::suffix_log_sum_exp;
use super::{log_permutation_probability, KBestList, Permutation};
use crate::error::{Error, Result};
use crate::features::WeightVector;

pub const LISTNET_TE_MAX_K: usize = 8;

/// `-Σ_π P_eval(π) Σ_j c(j) log q_j(π)` over every permutation of the list.
pub fn listnet_te_loss_exact(list: &KBestList, w: &WeightVector) -> Result<f64> {
    let k = list.len();
    if k > LISTNET_TE_MAX_K {
        return Err(Error::Capability(format!(
            "exact top-rank enhanced ListNet enumerates k! rankings and is capped at k = {LISTNET_TE_MAX_K}, got k = {k}"
        )));
    }
    let eval = list.eval_scores();
    let model = list.model_scores(w)?;
    let costs = position_costs(k);

    let mut total = 0.0;
    for_each_permutation(k, |order| {
        let perm = Permutation(order.to_vec());
        let p_eval = log_permutation_probability(&eval, &perm)
            .expect("lengths agree and scores are finite")
            .exp();
        let ranked = perm.apply(&model);
        let lse = suffix_log_sum_exp(&ranked);
        let weighted: f64 = costs
            .iter()
            .zip(ranked.iter().zip(&lse))
            .map(|(c, (s, z))| c * (s - z))
            .sum();
        total -= p_eval * weighted;
    });
    Ok(total)
}

/// Heap's algorithm over `0..k`.
fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut order: Vec<usize> = (0..k).collect();
    let mut counters = vec![0usize; k];
    visit(&order);
    let mut i = 1;
    while i < k {
        if counters[i] < i {
            let swap_with = if i % 2 == 0 { 0 } else { counters[i] };
            order.swap(swap_with, i);
            visit(&order);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::one_hot_list;
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashSet;

    #[test]
    fn heap_visits_every_permutation_once() {
        for k in 0..=5 {
            let mut seen = HashSet::new();
            for_each_permutation(k, |o| {
                assert!(seen.insert(o.to_vec()));
            });
            let fact: usize = (1..=k).product();
            assert_eq!(seen.len(), fact.max(1));
        }
    }

    #[test]
    fn single_item_is_zero() {
        let l = one_hot_list(&[0.5]);
        assert_abs_diff_eq!(
            listnet_te_loss_exact(&l, &WeightVector::from_dense(vec![1.0])).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_item_hand_enumeration() {
        // eval (1, 0), model (0, 0): both orders have q_1 = 1/2, q_2 = 1, c = (2/3, 1/3),
        // so the loss is (2/3) ln 2 regardless of the eval weights summing to one.
        let l = one_hot_list(&[1.0, 0.0]);
        let got = listnet_te_loss_exact(&l, &WeightVector::zeros()).unwrap();
        assert_abs_diff_eq!(got, 2.0 / 3.0 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn cap_is_enforced() {
        let l = one_hot_list(&[0.1; 9]);
        let err = listnet_te_loss_exact(&l, &WeightVector::zeros()).unwrap_err();
        assert_eq!(err.class(), "capability");
        assert!(err.to_string().contains("k = 8"));
    }
}
