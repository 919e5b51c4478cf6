//! Synthetic corpora with fixed per-sentence hypothesis pools, and k-best
//! extraction by model score.
//!
//! Every sentence gets a Zipf-distributed reference and `pool_size`
//! hypotheses made by editing the reference (substitution, deletion,
//! insertion) at a per-hypothesis rate. Features per hypothesis:
//!
//! * `tm0..`: a redundant group of noisy copies of the negated edit fraction.
//! * `lm`: a sharp quality signal up to the edit fraction `lm_saturation`.
//!   Beyond it the feature turns with slope `lm_tail_slope`, so it ranks good
//!   hypotheses well and misranks poor ones.
//! * `wp`: hypothesis/reference length ratio.
//! * `w:<token>`: relative frequency of each of the most frequent tokens.
//! * `noise0..`: standard normal noise.
//!
//! The planted weight vector puts `planted_magnitude` on the quality features
//! (`tm*`, `lm`) and zero everywhere else.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSpace, SparseVector, WeightVector};
use crate::metrics::{collect_stats, TokenSeq};
use crate::ranking::{Hypothesis, KBestList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

#[derive(Debug, Clone)]
pub struct SentencePool {
    pub source_id: String,
    pub split: Split,
    pub reference: TokenSeq,
    pub hypotheses: Vec<Arc<Hypothesis>>,
    /// Realized edit fraction per hypothesis; empty for corpora read from disk.
    pub corruption: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub features: FeatureSpace,
    pub sentences: Vec<SentencePool>,
}

impl SyntheticCorpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SentencePool> {
        self.sentences.iter().filter(move |s| s.split == split)
    }

    pub fn min_pool_size(&self) -> usize {
        self.sentences.iter().map(|s| s.hypotheses.len()).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub pool_size: usize,
    pub ref_len_min: usize,
    pub ref_len_max: usize,
    pub vocab_size: usize,
    /// Size of the correlated `tm*` group.
    pub dense_features: usize,
    /// Number of frequent-token indicator features.
    pub sparse_features: usize,
    pub noise_features: usize,
    pub planted_magnitude: f64,
    /// Standard deviation of the noise on the `tm*` group.
    pub noise: f64,
    /// Noise on `lm`, relative to `noise`.
    pub lm_noise_ratio: f64,
    /// Edit fraction beyond which `lm` stops improving.
    pub lm_saturation: f64,
    /// Noise on `lm` beyond the saturation point, relative to `noise`.
    pub lm_tail_noise: f64,
    /// Slope of `lm` in the edit fraction beyond the saturation point.
    pub lm_tail_slope: f64,
    pub min_corruption: f64,
    pub max_corruption: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            dev_sentences: 200,
            test_sentences: 200,
            pool_size: 200,
            ref_len_min: 8,
            ref_len_max: 25,
            vocab_size: 200,
            dense_features: 8,
            sparse_features: 20,
            noise_features: 10,
            planted_magnitude: 1.0,
            noise: 0.3,
            lm_noise_ratio: 0.1,
            lm_saturation: 0.35,
            lm_tail_noise: 0.15,
            lm_tail_slope: 1.0,
            min_corruption: 0.25,
            max_corruption: 0.8,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dev_sentences + test_sentences", self.dev_sentences + self.test_sentences),
            ("pool_size", self.pool_size),
            ("ref_len_min", self.ref_len_min),
            ("vocab_size", self.vocab_size),
            ("dense_features", self.dense_features),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.ref_len_max < self.ref_len_min {
            return Err(Error::Config("ref_len_max must be ≥ ref_len_min".into()));
        }
        if self.sparse_features > self.vocab_size {
            return Err(Error::Config("sparse_features cannot exceed vocab_size".into()));
        }
        if !(self.noise >= 0.0 && self.lm_noise_ratio >= 0.0 && self.lm_tail_noise >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if !(0.0 <= self.min_corruption && self.min_corruption <= self.max_corruption && self.max_corruption <= 1.0) {
            return Err(Error::Config("corruption rates must satisfy 0 ≤ min ≤ max ≤ 1".into()));
        }
        if !(self.planted_magnitude.is_finite() && self.lm_tail_slope.is_finite() && self.lm_saturation > 0.0) {
            return Err(Error::Config("planted_magnitude must be finite and lm_saturation positive".into()));
        }
        // Keeps the planted score strictly decreasing in the edit fraction.
        if self.lm_tail_slope >= self.dense_features as f64 {
            return Err(Error::Config("lm_tail_slope must be below dense_features".into()));
        }
        Ok(())
    }
}

struct FeatureLayout {
    tm: Vec<FeatureId>,
    lm: FeatureId,
    wp: FeatureId,
    tokens: Vec<FeatureId>,
    noise: Vec<FeatureId>,
}

impl FeatureLayout {
    fn new(cfg: &GeneratorConfig, space: &mut FeatureSpace) -> Self {
        Self {
            tm: (0..cfg.dense_features).map(|i| space.intern(&format!("tm{i}"))).collect(),
            lm: space.intern("lm"),
            wp: space.intern("wp"),
            tokens: (0..cfg.sparse_features).map(|i| space.intern(&format!("w:{}", token(i)))).collect(),
            noise: (0..cfg.noise_features).map(|i| space.intern(&format!("noise{i}"))).collect(),
        }
    }
}

fn token(i: usize) -> String {
    format!("t{i}")
}

/// Builds a corpus and the planted weight vector. Deterministic in `cfg.seed`.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<(SyntheticCorpus, WeightVector)> {
    cfg.validate()?;
    let mut space = FeatureSpace::new();
    let layout = FeatureLayout::new(cfg, &mut space);
    let zipf = WeightedIndex::new((0..cfg.vocab_size).map(|i| 1.0 / (i as f64 + 1.0)))
        .map_err(|e| Error::Config(format!("vocabulary weights: {e}")))?;

    let n = cfg.dev_sentences + cfg.test_sentences;
    let mut sentences = Vec::with_capacity(n);
    for idx in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(cfg.seed, idx as u64));
        let split = if idx < cfg.dev_sentences { Split::Dev } else { Split::Test };
        sentences.push(generate_sentence(cfg, &layout, &zipf, idx, split, &mut rng)?);
    }

    let mut planted = WeightVector::zeros();
    let quality_mass = cfg.planted_magnitude / (cfg.dense_features as f64 + 1.0);
    for &id in &layout.tm {
        planted.set(id, quality_mass);
    }
    planted.set(layout.lm, quality_mass);
    planted.ensure_dim(space.len());

    Ok((
        SyntheticCorpus {
            features: space,
            sentences,
        },
        planted,
    ))
}

fn generate_sentence(
    cfg: &GeneratorConfig,
    layout: &FeatureLayout,
    zipf: &WeightedIndex<f64>,
    idx: usize,
    split: Split,
    rng: &mut ChaCha8Rng,
) -> Result<SentencePool> {
    let len = rng.random_range(cfg.ref_len_min..=cfg.ref_len_max);
    let reference: Vec<usize> = (0..len).map(|_| zipf.sample(rng)).collect();
    let reference_seq = TokenSeq::from_folded(reference.iter().map(|&t| token(t)).collect());

    let mut hypotheses = Vec::with_capacity(cfg.pool_size);
    let mut corruption = Vec::with_capacity(cfg.pool_size);
    for _ in 0..cfg.pool_size {
        let rate = rng.random_range(cfg.min_corruption..=cfg.max_corruption);
        let (tokens, edits) = corrupt(&reference, rate, zipf, rng);
        let edit_fraction = edits as f64 / len as f64;

        let mut features = Vec::new();
        for &id in &layout.tm {
            let eps: f64 = rng.sample(StandardNormal);
            features.push((id, -edit_fraction + cfg.noise * eps));
        }
        let eps: f64 = rng.sample(StandardNormal);
        let lm_sd = if edit_fraction <= cfg.lm_saturation {
            cfg.noise * cfg.lm_noise_ratio
        } else {
            cfg.noise * cfg.lm_tail_noise
        };
        let lm = -edit_fraction.min(cfg.lm_saturation)
            + cfg.lm_tail_slope * (edit_fraction - cfg.lm_saturation).max(0.0)
            + lm_sd * eps;
        features.push((layout.lm, lm));
        features.push((layout.wp, tokens.len() as f64 / len as f64));
        if !tokens.is_empty() {
            let mut counts = vec![0usize; layout.tokens.len()];
            for &t in &tokens {
                if t < counts.len() {
                    counts[t] += 1;
                }
            }
            for (c, &id) in counts.iter().zip(&layout.tokens) {
                if *c > 0 {
                    features.push((id, *c as f64 / tokens.len() as f64));
                }
            }
        }
        for &id in &layout.noise {
            let eps: f64 = rng.sample(StandardNormal);
            features.push((id, eps));
        }

        let tokens = TokenSeq::from_folded(tokens.into_iter().map(token).collect());
        let stats = collect_stats(&tokens, &reference_seq);
        hypotheses.push(Arc::new(Hypothesis::from_stats(
            SparseVector::from_pairs(features),
            tokens,
            stats,
        )?));
        corruption.push(edit_fraction);
    }

    Ok(SentencePool {
        source_id: format!("s{idx:05}"),
        split,
        reference: reference_seq,
        hypotheses,
        corruption,
    })
}

/// Applies per-token edits with probability `rate`; returns the edited
/// sequence and the number of edits.
fn corrupt(reference: &[usize], rate: f64, zipf: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let mut out = Vec::with_capacity(reference.len() + 4);
    let mut edits = 0;
    for &t in reference {
        if rng.random::<f64>() >= rate {
            out.push(t);
            continue;
        }
        edits += 1;
        let op: f64 = rng.random();
        if op < 0.5 {
            let mut sub = zipf.sample(rng);
            if sub == t {
                sub = (t + 1 + rng.random_range(0..7)) % zipf_len(zipf);
            }
            out.push(sub);
        } else if op < 0.75 {
            // deletion
        } else {
            out.push(t);
            out.push(zipf.sample(rng));
        }
    }
    (out, edits)
}

fn zipf_len(zipf: &WeightedIndex<f64>) -> usize {
    zipf.weights().count()
}

/// Top `min(k, M)` hypotheses by descending model score; ties by pool index.
pub fn kbest_decode(pool: &SentencePool, w: &WeightVector, k: usize, iteration: usize) -> Result<KBestList> {
    if pool.hypotheses.is_empty() {
        return Err(Error::Input(format!("sentence {} has an empty hypothesis pool", pool.source_id)));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let order = ranked_indices(pool, w)?;
    let hyps = order.into_iter().take(k).map(|i| Arc::clone(&pool.hypotheses[i])).collect();
    KBestList::new(pool.source_id.clone(), iteration, hyps)
}

/// Full pool ordering by descending model score, ties by pool index.
pub fn ranked_indices(pool: &SentencePool, w: &WeightVector) -> Result<Vec<usize>> {
    let scores: Vec<f64> = pool.hypotheses.iter().map(|h| w.dot(&h.features)).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite model score in {}", pool.source_id)));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order)
}

/// Top-1 hypothesis of every sentence in `sentences` under `w`.
pub fn decode_top1<'a>(sentences: impl IntoIterator<Item = &'a SentencePool>, w: &WeightVector) -> Vec<&'a Hypothesis> {
    sentences
        .into_iter()
        .map(|pool| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, h) in pool.hypotheses.iter().enumerate() {
                let s = w.dot(&h.features);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            pool.hypotheses[best].as_ref()
        })
        .collect()
}

/// Corpus BLEU of the top-1 decode over the given sentences.
pub fn corpus_top1_bleu<'a>(sentences: impl IntoIterator<Item = &'a SentencePool>, w: &WeightVector) -> f64 {
    decode_top1(sentences, w).iter().map(|h| *h.stats()).sum::<crate::metrics::BleuStats>().bleu()
}

#[derive(Serialize, Deserialize)]
struct HypothesisRecord {
    tokens: Vec<String>,
    features: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct PoolRecord {
    source_id: String,
    split: Split,
    reference: Vec<String>,
    hypotheses: Vec<HypothesisRecord>,
}

/// Writes one JSON object per sentence pool.
pub fn write_corpus(corpus: &SyntheticCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for pool in &corpus.sentences {
        let record = PoolRecord {
            source_id: pool.source_id.clone(),
            split: pool.split,
            reference: pool.reference.tokens().to_vec(),
            hypotheses: pool
                .hypotheses
                .iter()
                .map(|h| HypothesisRecord {
                    tokens: h.tokens.tokens().to_vec(),
                    features: h.features.iter().map(|(id, v)| (corpus.features.name(id).to_owned(), v)).collect(),
                })
                .collect(),
        };
        let line = serde_json::to_string(&record).map_err(|e| Error::Input(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSONL corpus. Eval scores are recomputed from the tokens.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<SyntheticCorpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut features = FeatureSpace::new();
    let mut sentences = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), lineno + 1);
        let record: PoolRecord = serde_json::from_str(&line).map_err(|e| Error::parse(&location, e.to_string()))?;
        if record.hypotheses.is_empty() {
            return Err(Error::parse(&location, "empty hypothesis pool"));
        }
        let reference = TokenSeq::new(&record.reference);
        let mut hypotheses = Vec::with_capacity(record.hypotheses.len());
        for h in record.hypotheses {
            let fv = SparseVector::from_pairs(h.features.iter().map(|(name, &v)| (features.intern(name), v)));
            let hyp = Hypothesis::new(fv, TokenSeq::new(&h.tokens), &reference)
                .map_err(|e| Error::parse(&location, e.to_string()))?;
            hypotheses.push(Arc::new(hyp));
        }
        sentences.push(SentencePool {
            source_id: record.source_id,
            split: record.split,
            reference,
            hypotheses,
            corruption: Vec::new(),
        });
    }
    if sentences.is_empty() {
        return Err(Error::Input(format!("{} contains no sentences", path.display())));
    }
    Ok(SyntheticCorpus { features, sentences })
}
