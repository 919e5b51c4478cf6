//! BLEU at sentence and corpus level, and paired bootstrap resampling.
//!
//! All scores are 4-gram BLEU on case-folded tokens against a single
//! reference. Sentence-level scores use add-one smoothing on the higher-order
//! precisions by default; see [`Smoothing`].

mod bootstrap;

use std::collections::HashMap;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{paired_bootstrap, paired_bootstrap_stats};

pub const MAX_ORDER: usize = 4;

/// A case-folded token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        TokenSeq(tokens.into_iter().map(|t| t.as_ref().to_lowercase()).collect())
    }

    /// Splits on ASCII/Unicode whitespace.
    pub fn from_line(line: &str) -> Self {
        Self::new(line.split_whitespace())
    }

    /// Wraps tokens that are known to be folded already.
    pub(crate) fn from_folded(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Sufficient statistics for BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u32; MAX_ORDER],
    pub totals: [u32; MAX_ORDER],
    pub hyp_len: u32,
    pub ref_len: u32,
}

impl Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, rhs: BleuStats) -> BleuStats {
        self += rhs;
        self
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += rhs.matches[n];
            self.totals[n] += rhs.totals[n];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

impl std::iter::Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> Self {
        iter.fold(BleuStats::default(), |a, b| a + b)
    }
}

impl<'a> std::iter::Sum<&'a BleuStats> for BleuStats {
    fn sum<I: Iterator<Item = &'a BleuStats>>(iter: I) -> Self {
        iter.fold(BleuStats::default(), |a, b| a + *b)
    }
}

/// Which precisions receive add-one smoothing at sentence level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// `(m_n + 1) / (t_n + 1)` for n ≥ 2; unigram precision is left raw.
    #[default]
    HigherOrder,
    /// `(m_n + 1) / (t_n + 1)` for every order including unigrams.
    AllOrders,
}

fn brevity_penalty(hyp_len: u32, ref_len: u32) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
}

impl BleuStats {
    /// Sentence-level BLEU with the given smoothing.
    pub fn smoothed_bleu(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let (m, t) = (self.matches[n] as f64, self.totals[n] as f64);
            let smooth = n > 0 || smoothing == Smoothing::AllOrders;
            let p = if smooth { (m + 1.0) / (t + 1.0) } else { m / t };
            if p <= 0.0 {
                return 0.0;
            }
            log_sum += p.ln();
        }
        brevity_penalty(self.hyp_len, self.ref_len) * (log_sum / MAX_ORDER as f64).exp()
    }

    /// Unsmoothed BLEU over these (usually pooled) statistics.
    pub fn bleu(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            if self.matches[n] == 0 || self.totals[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
        }
        brevity_penalty(self.hyp_len, self.ref_len) * (log_sum / MAX_ORDER as f64).exp()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u32> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram match counts of `hyp` against `reference`.
pub fn collect_stats(hyp: &TokenSeq, reference: &TokenSeq) -> BleuStats {
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u32,
        ref_len: reference.len() as u32,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp.tokens(), n);
        let ref_counts = ngram_counts(reference.tokens(), n);
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u32;
    }
    stats
}

/// Add-one smoothed sentence BLEU (higher orders only).
pub fn sentence_bleu(hyp: &TokenSeq, reference: &TokenSeq) -> f64 {
    collect_stats(hyp, reference).smoothed_bleu(Smoothing::HigherOrder)
}

/// Corpus BLEU from summed statistics.
pub fn corpus_bleu<'a>(pairs: impl IntoIterator<Item = (&'a TokenSeq, &'a TokenSeq)>) -> Result<f64> {
    let mut any = false;
    let stats: BleuStats = pairs
        .into_iter()
        .map(|(h, r)| {
            any = true;
            collect_stats(h, r)
        })
        .sum();
    if !any {
        return Err(Error::Input("corpus BLEU of an empty corpus".into()));
    }
    Ok(stats.bleu())
}

/// Reads one pre-tokenized sentence per line.
pub fn read_token_file(path: impl AsRef<Path>) -> Result<Vec<TokenSeq>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(text.lines().map(TokenSeq::from_line).collect())
}
