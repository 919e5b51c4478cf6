//! Hypotheses, k-best lists, the permutation probability model and the
//! listwise losses built on top of it.

mod exact;
mod loss;
mod prob;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{SparseVector, WeightVector};
use crate::metrics::{collect_stats, BleuStats, Smoothing, TokenSeq};

pub use exact::{listnet_te_loss_exact, LISTNET_TE_MAX_K};
pub use loss::{
    listmle_gradient, listmle_loss, listmle_te_gradient, listmle_te_loss, listmle_topn_gradient,
    listmle_topn_loss, listnet_top1_gradient, listnet_top1_loss, position_cost, LossKind,
};
pub use prob::{
    log_permutation_probability, log_sum_exp, permutation_probability, softmax, top_one_probability,
};

/// A candidate output with its features and cached quality score.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub features: SparseVector,
    pub tokens: TokenSeq,
    stats: BleuStats,
    eval_score: f64,
}

impl Hypothesis {
    /// Scores `tokens` against `reference` with smoothed sentence BLEU.
    pub fn new(features: SparseVector, tokens: TokenSeq, reference: &TokenSeq) -> Result<Self> {
        let stats = collect_stats(&tokens, reference);
        Self::from_stats(features, tokens, stats)
    }

    pub fn from_stats(features: SparseVector, tokens: TokenSeq, stats: BleuStats) -> Result<Self> {
        let eval_score = stats.smoothed_bleu(Smoothing::HigherOrder);
        Self::with_eval_score(features, tokens, stats, eval_score)
    }

    /// Uses a caller-supplied quality score instead of sentence BLEU.
    pub fn with_eval_score(
        features: SparseVector,
        tokens: TokenSeq,
        stats: BleuStats,
        eval_score: f64,
    ) -> Result<Self> {
        if !features.is_finite() {
            return Err(Error::Input("hypothesis has non-finite feature values".into()));
        }
        if !eval_score.is_finite() {
            return Err(Error::Input("hypothesis has a non-finite eval score".into()));
        }
        Ok(Self {
            features,
            tokens,
            stats,
            eval_score,
        })
    }

    pub fn eval_score(&self) -> f64 {
        self.eval_score
    }

    pub fn stats(&self) -> &BleuStats {
        &self.stats
    }
}

/// `w · h(e|f)`
pub fn model_score(hyp: &Hypothesis, w: &WeightVector) -> Result<f64> {
    let s = w.dot(&hyp.features);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Numeric("model score is not finite".into()))
    }
}

/// One k-best list: the training instance for one sentence at one iteration.
#[derive(Debug, Clone)]
pub struct KBestList {
    pub source_id: String,
    pub iteration: usize,
    hyps: Vec<Arc<Hypothesis>>,
}

impl KBestList {
    pub fn new(source_id: impl Into<String>, iteration: usize, hyps: Vec<Arc<Hypothesis>>) -> Result<Self> {
        if hyps.is_empty() {
            return Err(Error::Input("a k-best list needs at least one hypothesis".into()));
        }
        Ok(Self {
            source_id: source_id.into(),
            iteration,
            hyps,
        })
    }

    pub fn from_hypotheses(
        source_id: impl Into<String>,
        iteration: usize,
        hyps: impl IntoIterator<Item = Hypothesis>,
    ) -> Result<Self> {
        Self::new(source_id, iteration, hyps.into_iter().map(Arc::new).collect())
    }

    pub fn hyps(&self) -> &[Arc<Hypothesis>] {
        &self.hyps
    }

    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    pub(crate) fn push(&mut self, hyp: Arc<Hypothesis>) {
        self.hyps.push(hyp);
    }

    pub fn eval_scores(&self) -> Vec<f64> {
        self.hyps.iter().map(|h| h.eval_score).collect()
    }

    pub fn model_scores(&self, w: &WeightVector) -> Result<Vec<f64>> {
        self.hyps.iter().map(|h| model_score(h, w)).collect()
    }

    /// Index of the highest-scoring hypothesis under `w`; ties go to the
    /// earliest entry.
    pub fn top1_index(&self, w: &WeightVector) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, h) in self.hyps.iter().enumerate() {
            let s = w.dot(&h.features);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }

    pub fn top1(&self, w: &WeightVector) -> &Hypothesis {
        &self.hyps[self.top1_index(w)]
    }
}

/// A ranking of list positions: `order()[j]` is the index of the hypothesis
/// placed at rank `j` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation((0..k).collect())
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Input(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Permutation(order))
    }

    /// Indices sorting `scores` descending; ties keep ascending index order.
    pub fn sort_descending(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Permutation(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Applies the permutation to a score vector: `out[j] = scores[order[j]]`.
    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| scores[i]).collect()
    }
}

/// The reference ranking π_eval: eval score descending, ties by list index.
pub fn eval_permutation(list: &KBestList) -> Permutation {
    Permutation::sort_descending(&list.eval_scores())
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::features::FeatureId;

    /// A list with explicit eval scores and dense feature rows.
    pub fn list_from(eval: &[f64], rows: &[Vec<f64>]) -> KBestList {
        let hyps = eval.iter().zip(rows).map(|(&e, row)| {
            let features =
                SparseVector::from_pairs(row.iter().enumerate().map(|(i, &v)| (FeatureId(i as u32), v)));
            Hypothesis::with_eval_score(features, TokenSeq::default(), BleuStats::default(), e).unwrap()
        });
        KBestList::from_hypotheses("t", 0, hyps).unwrap()
    }

    /// One-hot feature per hypothesis so `w_i` is exactly the score of item `i`.
    pub fn one_hot_list(eval: &[f64]) -> KBestList {
        let k = eval.len();
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        list_from(eval, &rows)
    }
}
