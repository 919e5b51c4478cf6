//! Pairwise ranking optimization (PRO).
//!
//! From each k-best list, `samples` index pairs are drawn uniformly with
//! replacement; pairs whose sentence-BLEU gap is below `min_gap` are dropped,
//! the rest are sorted by gap and the `keep` largest retained. A linear
//! classifier on feature differences is then trained with the logistic loss
//! through the shared AdaDelta optimizer.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decoder::SyntheticCorpus;
use crate::error::{Error, Result};
use crate::features::{SparseVector, WeightVector};
use crate::optimizer::Objective;
use crate::ranking::{Hypothesis, KBestList};
use crate::tuning::{tune, Method, TuneOutcome, TuningConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ProConfig {
    /// Γ: candidate pairs drawn per list.
    pub samples: usize,
    /// Ξ: pairs kept per list.
    pub keep: usize,
    pub min_gap: f64,
    /// Classifier epochs per outer iteration.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ProConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            keep: 50,
            min_gap: 0.05,
            epochs: 100,
            seed: 0,
        }
    }
}

impl ProConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.keep == 0 {
            return Err(Error::Config("PRO sample and keep counts must be positive".into()));
        }
        if self.keep > self.samples {
            return Err(Error::Config("PRO keep count cannot exceed the sample count".into()));
        }
        if self.min_gap.is_nan() || self.min_gap < 0.0 {
            return Err(Error::Config("PRO minimum BLEU gap must be non-negative".into()));
        }
        Ok(())
    }
}

pub type OrientedPair = (Arc<Hypothesis>, Arc<Hypothesis>);

/// Samples, filters and orients pairs from one list; `better` always has the
/// strictly higher eval score.
pub fn pro_sample_pairs(list: &KBestList, cfg: &ProConfig, seed: u64) -> Vec<OrientedPair> {
    let k = list.len();
    if k < 2 {
        return Vec::new();
    }
    let hyps = list.hyps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for _ in 0..cfg.samples {
        let i = rng.random_range(0..k);
        let j = rng.random_range(0..k);
        let (ei, ej) = (hyps[i].eval_score(), hyps[j].eval_score());
        let gap = (ei - ej).abs();
        if gap == 0.0 || gap < cfg.min_gap {
            continue;
        }
        let (better, worse) = if ei > ej { (i, j) } else { (j, i) };
        candidates.push((gap, better, worse));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates
        .into_iter()
        .take(cfg.keep)
        .map(|(_, b, w)| (Arc::clone(&hyps[b]), Arc::clone(&hyps[w])))
        .collect()
}

/// Feature differences `h(better) - h(worse)` for one list's pairs.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub diffs: Vec<SparseVector>,
}

impl PairSet {
    pub fn from_pairs(pairs: &[OrientedPair]) -> Self {
        Self {
            diffs: pairs
                .iter()
                .map(|(b, w)| SparseVector::linear_combination([(&b.features, 1.0), (&w.features, -1.0)]))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }
}

/// Pair sets for every list; list `i` samples with sub-seed `(seed, i)`.
pub fn sample_pool(lists: &[KBestList], cfg: &ProConfig, seed: u64) -> Vec<PairSet> {
    lists
        .iter()
        .enumerate()
        .map(|(i, l)| PairSet::from_pairs(&pro_sample_pairs(l, cfg, crate::mix_seed(seed, i as u64))))
        .collect()
}

/// `Σ log(1 + exp(-w · d))` over a pair set.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Objective for Logistic {
    type Instance = PairSet;

    fn name(&self) -> String {
        "pro".into()
    }

    fn loss_and_gradient(&self, pairs: &PairSet, w: &WeightVector) -> Result<(f64, SparseVector)> {
        let mut loss = 0.0;
        let mut terms = Vec::with_capacity(pairs.len());
        for d in &pairs.diffs {
            let margin = w.dot(d);
            loss += softplus(-margin);
            terms.push((d, -sigmoid(-margin)));
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("logistic loss is not finite".into()));
        }
        Ok((loss, SparseVector::linear_combination(terms)))
    }

    fn loss(&self, pairs: &PairSet, w: &WeightVector) -> Result<f64> {
        Ok(pairs.diffs.iter().map(|d| softplus(-w.dot(d))).sum())
    }
}

/// Fraction of pairs ordered correctly (`w · d > 0`).
pub fn pair_accuracy<'a>(sets: impl IntoIterator<Item = &'a PairSet>, w: &WeightVector) -> f64 {
    let (mut right, mut total) = (0usize, 0usize);
    for set in sets {
        for d in &set.diffs {
            total += 1;
            right += usize::from(w.dot(d) > 0.0);
        }
    }
    if total == 0 {
        0.0
    } else {
        right as f64 / total as f64
    }
}

/// The tuning loop with PRO as the inner optimizer.
pub fn pro_tune(corpus: &SyntheticCorpus, cfg: &TuningConfig, pro: &ProConfig) -> Result<TuneOutcome> {
    let cfg = TuningConfig {
        method: Method::Pro(pro.clone()),
        ..cfg.clone()
    };
    tune(corpus, &cfg)
}
