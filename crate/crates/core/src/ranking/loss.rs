//! Listwise losses over one k-best list and their analytic gradients.
//!
//! Every loss is a function of the model scores `s_i = w · h_i`, so each
//! gradient is computed as `Σ_i (∂L/∂s_i) h_i` and returned sparse over the
//! union of the list's feature supports.

use std::fmt;
use std::str::FromStr;

use super::prob::{log_add_exp, softmax, suffix_log_sum_exp};
use super::{eval_permutation, KBestList, Permutation};
use crate::error::{Error, Result};
use crate::features::{SparseVector, WeightVector};

/// Losses usable by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Top-one ListNet cross entropy.
    ListNet,
    ListMle,
    /// ListMLE restricted to the first `n` ranks.
    ListMleTopN(usize),
    /// ListMLE with every rank weighted by [`position_cost`].
    ListMleTe,
}

impl LossKind {
    pub fn name(&self) -> String {
        match self {
            LossKind::ListNet => "listnet".into(),
            LossKind::ListMle => "listmle".into(),
            LossKind::ListMleTopN(n) => format!("listmle-top{n}"),
            LossKind::ListMleTe => "listmle-te".into(),
        }
    }

    pub fn loss(&self, list: &KBestList, w: &WeightVector) -> Result<f64> {
        Ok(self.score_terms(list, w, false)?.0)
    }

    pub fn gradient(&self, list: &KBestList, w: &WeightVector) -> Result<SparseVector> {
        self.loss_and_gradient(list, w).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(&self, list: &KBestList, w: &WeightVector) -> Result<(f64, SparseVector)> {
        let (loss, coefs) = self.score_terms(list, w, true)?;
        Ok((loss, contract(list, &coefs)))
    }

    /// Loss and `∂L/∂s_i` per list entry.
    fn score_terms(&self, list: &KBestList, w: &WeightVector, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let scores = list.model_scores(w)?;
        let k = scores.len();
        match *self {
            LossKind::ListNet => Ok(listnet_terms(&list.eval_scores(), &scores)),
            LossKind::ListMle => Ok(positional_terms(&scores, &eval_permutation(list), &vec![1.0; k], with_grad)),
            LossKind::ListMleTe => Ok(positional_terms(
                &scores,
                &eval_permutation(list),
                &position_costs(k),
                with_grad,
            )),
            LossKind::ListMleTopN(n) => {
                if n == 0 {
                    return Err(Error::Config("top-n ListMLE needs n ≥ 1".into()));
                }
                // Lists shorter than n (small merged pools) use every rank.
                let weights: Vec<f64> = (0..k).map(|j| if j < n { 1.0 } else { 0.0 }).collect();
                Ok(positional_terms(&scores, &eval_permutation(list), &weights, with_grad))
            }
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "listnet" => Ok(LossKind::ListNet),
            "listmle" => Ok(LossKind::ListMle),
            "listmle-te" => Ok(LossKind::ListMleTe),
            other => match other.strip_prefix("listmle-top").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 1 => Ok(LossKind::ListMleTopN(n)),
                _ => Err(Error::Usage(format!("unknown loss '{other}'"))),
            },
        }
    }
}

fn contract(list: &KBestList, coefs: &[f64]) -> SparseVector {
    SparseVector::linear_combination(list.hyps().iter().zip(coefs).map(|(h, &c)| (&h.features, c)))
}

/// ListNet top-one loss `-Σ_j P'_eval(j) log P'_s(j)` and, per item,
/// `∂L/∂s_i = -P'_eval(i) + (Σ_j P'_eval(j)) P'_s(i)`.
fn listnet_terms(eval: &[f64], scores: &[f64]) -> (f64, Vec<f64>) {
    let p_eval = softmax(eval);
    let p_model = softmax(scores);
    let lse = super::log_sum_exp(scores);
    let loss = -p_eval.iter().zip(scores).map(|(pe, s)| pe * (s - lse)).sum::<f64>();
    let mass: f64 = p_eval.iter().sum();
    let coefs = p_eval.iter().zip(&p_model).map(|(pe, ps)| -pe + mass * ps).collect();
    (loss, coefs)
}

/// Position-weighted Plackett-Luce negative log-likelihood
/// `-Σ_j c_j (s_{π(j)} - log Σ_{t≥j} exp s_{π(t)})`.
///
/// The item at rank `t` collects `-c_t + Σ_{j≤t} c_j softmax_{≥j}(t)`; the
/// inner sum is accumulated in log space as a running prefix so the whole
/// gradient is linear in `k`.
fn positional_terms(scores: &[f64], perm: &Permutation, weights: &[f64], with_grad: bool) -> (f64, Vec<f64>) {
    let ranked = perm.apply(scores);
    let lse = suffix_log_sum_exp(&ranked);
    let loss = -weights
        .iter()
        .zip(ranked.iter().zip(&lse))
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, (s, z))| c * (s - z))
        .sum::<f64>();
    if !with_grad {
        return (loss, Vec::new());
    }
    let mut coefs = vec![0.0; scores.len()];
    let mut prefix = f64::NEG_INFINITY;
    for (t, &item) in perm.order().iter().enumerate() {
        if weights[t] > 0.0 {
            prefix = log_add_exp(prefix, weights[t].ln() - lse[t]);
        }
        coefs[item] = -weights[t] + (ranked[t] + prefix).exp();
    }
    (loss, coefs)
}

/// Rank weight `c(j) = (k - j + 1) / (k(k+1)/2)` for 1-based rank `j`.
pub fn position_cost(j: usize, k: usize) -> Result<f64> {
    if j == 0 || j > k {
        return Err(Error::Input(format!("rank {j} outside 1..={k}")));
    }
    Ok(position_cost_unchecked(j, k))
}

fn position_cost_unchecked(j: usize, k: usize) -> f64 {
    let (j, k) = (j as f64, k as f64);
    (k - j + 1.0) / (k * (k + 1.0) / 2.0)
}

pub(crate) fn position_costs(k: usize) -> Vec<f64> {
    (1..=k).map(|j| position_cost_unchecked(j, k)).collect()
}

pub fn listnet_top1_loss(list: &KBestList, w: &WeightVector) -> Result<f64> {
    LossKind::ListNet.loss(list, w)
}

pub fn listnet_top1_gradient(list: &KBestList, w: &WeightVector) -> Result<SparseVector> {
    LossKind::ListNet.gradient(list, w)
}

pub fn listmle_loss(list: &KBestList, w: &WeightVector) -> Result<f64> {
    LossKind::ListMle.loss(list, w)
}

pub fn listmle_gradient(list: &KBestList, w: &WeightVector) -> Result<SparseVector> {
    LossKind::ListMle.gradient(list, w)
}

pub fn listmle_te_loss(list: &KBestList, w: &WeightVector) -> Result<f64> {
    LossKind::ListMleTe.loss(list, w)
}

pub fn listmle_te_gradient(list: &KBestList, w: &WeightVector) -> Result<SparseVector> {
    LossKind::ListMleTe.gradient(list, w)
}

fn check_top_n(list: &KBestList, n: usize) -> Result<()> {
    if n == 0 || n > list.len() {
        return Err(Error::Input(format!("top-n requires 1 ≤ n ≤ k, got n = {n}, k = {}", list.len())));
    }
    Ok(())
}

pub fn listmle_topn_loss(list: &KBestList, w: &WeightVector, n: usize) -> Result<f64> {
    check_top_n(list, n)?;
    LossKind::ListMleTopN(n).loss(list, w)
}

pub fn listmle_topn_gradient(list: &KBestList, w: &WeightVector, n: usize) -> Result<SparseVector> {
    check_top_n(list, n)?;
    LossKind::ListMleTopN(n).gradient(list, w)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::features::FeatureId;
    use approx::assert_abs_diff_eq;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::from_dense(v.to_vec())
    }

    fn ln_factorial(k: usize) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn single_item_losses_vanish() {
        let l = one_hot_list(&[0.4]);
        let w = w(&[2.0]);
        for kind in [LossKind::ListNet, LossKind::ListMle, LossKind::ListMleTe, LossKind::ListMleTopN(1)] {
            let (loss, g) = kind.loss_and_gradient(&l, &w).unwrap();
            assert_abs_diff_eq!(loss, 0.0, epsilon = 1e-15);
            assert!(g.iter().all(|(_, v)| v.abs() < 1e-15), "{kind}");
        }
    }

    #[test]
    fn listnet_uniform_model_is_log_k() {
        let l = one_hot_list(&[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(listnet_top1_loss(&l, &w(&[0.0; 3])).unwrap(), 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn listnet_hand_values() {
        // eval (1, 0, 0), model (1, 0, -1) via one-hot weights
        let l = one_hot_list(&[1.0, 0.0, 0.0]);
        let e = std::f64::consts::E;
        let pe = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        let z = e + 1.0 + 1.0 / e;
        let ps = [e / z, 1.0 / z, (1.0 / e) / z];
        let expected: f64 = -(0..3).map(|i| pe[i] * ps[i].ln()).sum::<f64>();
        assert_abs_diff_eq!(listnet_top1_loss(&l, &w(&[1.0, 0.0, -1.0])).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn listnet_minimum_is_eval_entropy() {
        let eval = [0.7, 0.2, 0.45, 0.1];
        let l = one_hot_list(&eval);
        // model scores equal to eval shifted by a constant
        let shifted: Vec<f64> = eval.iter().map(|e| e + 3.0).collect();
        let pe = softmax(&eval);
        let entropy: f64 = -pe.iter().map(|p| p * p.ln()).sum::<f64>();
        assert_abs_diff_eq!(listnet_top1_loss(&l, &w(&shifted)).unwrap(), entropy, epsilon = 1e-12);
        let g = listnet_top1_gradient(&l, &w(&shifted)).unwrap();
        assert!(g.iter().all(|(_, v)| v.abs() < 1e-12));
    }

    #[test]
    fn listmle_hand_values() {
        let l = one_hot_list(&[0.9, 0.5, 0.1]);
        let e = std::f64::consts::E;
        // -[(3 - ln(e³+e²+e)) + (2 - ln(e²+e)) + 0]
        let expected = (1.0 + 1.0 / e + 1.0 / (e * e)).ln() + (1.0 + 1.0 / e).ln();
        assert_abs_diff_eq!(listmle_loss(&l, &w(&[3.0, 2.0, 1.0])).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(listmle_loss(&l, &w(&[0.0; 3])).unwrap(), ln_factorial(3), epsilon = 1e-14);
    }

    #[test]
    fn listmle_te_uniform_closed_form() {
        let k = 7;
        let eval: Vec<f64> = (0..k).map(|i| i as f64 / 10.0).collect();
        let l = one_hot_list(&eval);
        let expected: f64 = (1..=k)
            .map(|j| position_cost(j, k).unwrap() * ((k - j + 1) as f64).ln())
            .sum();
        assert_abs_diff_eq!(listmle_te_loss(&l, &w(&[0.0; 7])).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn topn_edge_values() {
        let eval = [0.2, 0.8, 0.5, 0.3];
        let l = one_hot_list(&eval);
        let wv = w(&[0.3, -0.7, 1.1, 0.05]);
        assert_abs_diff_eq!(
            listmle_topn_loss(&l, &wv, 4).unwrap(),
            listmle_loss(&l, &wv).unwrap(),
            epsilon = 1e-12
        );
        let top = eval_permutation(&l).order()[0];
        let p1 = super::super::top_one_probability(&[0.3, -0.7, 1.1, 0.05], top).unwrap();
        assert_abs_diff_eq!(listmle_topn_loss(&l, &wv, 1).unwrap(), -p1.ln(), epsilon = 1e-14);
        assert!(listmle_topn_loss(&l, &wv, 0).is_err());
        assert!(listmle_topn_loss(&l, &wv, 5).is_err());
        assert!(listmle_topn_gradient(&l, &wv, 5).is_err());
    }

    #[test]
    fn position_cost_values() {
        assert_eq!(position_cost(1, 1).unwrap(), 1.0);
        assert_abs_diff_eq!(position_cost(1, 3).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(position_cost(2, 3).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(position_cost(3, 3).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert!(position_cost(0, 3).is_err());
        assert!(position_cost(4, 3).is_err());
        let costs = position_costs(50);
        assert!(costs.windows(2).all(|p| p[0] > p[1]));
        assert_abs_diff_eq!(costs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shared_constant_feature_has_zero_gradient() {
        let rows = vec![vec![1.0, 0.3, 2.0], vec![1.0, -0.4, 0.5], vec![1.0, 0.9, -1.0]];
        let l = list_from(&[0.3, 0.6, 0.1], &rows);
        let wv = w(&[0.5, 1.5, -0.2]);
        for kind in [LossKind::ListNet, LossKind::ListMle, LossKind::ListMleTe, LossKind::ListMleTopN(2)] {
            let g = kind.gradient(&l, &wv).unwrap();
            assert!(g.get(FeatureId(0)).abs() < 1e-14, "{kind}");
        }
    }

    #[test]
    fn loss_names_round_trip() {
        for kind in [LossKind::ListNet, LossKind::ListMle, LossKind::ListMleTe, LossKind::ListMleTopN(5)] {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("listmle-top0".parse::<LossKind>().is_err());
        assert!("pro".parse::<LossKind>().is_err());
    }
}
