//! The iterative tuning loop: decode every dev sentence with the current
//! weights, add the k-best lists to the training pool, re-optimize starting
//! from the current weights, and finally return the iteration snapshot with
//! the best dev BLEU.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decoder::{corpus_top1_bleu, decode_top1, kbest_decode, Split, SyntheticCorpus};
use crate::error::{Error, Result};
use crate::features::WeightVector;
use crate::metrics::{paired_bootstrap_stats, BleuStats, TokenSeq};
use crate::optimizer::{optimize_objective, total_loss, OptimizeOptions, OptimizerConfig};
use crate::pro::{self, ProConfig};
use crate::ranking::{Hypothesis, KBestList, LossKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolMode {
    /// Every (sentence, iteration) k-best list is its own training instance.
    Aggregating,
    /// One list per sentence holding the union of all its k-best lists.
    Merging,
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Aggregating => "aggregate",
            PoolMode::Merging => "merge",
        })
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggregate" | "aggregating" => Ok(PoolMode::Aggregating),
            "merge" | "merging" => Ok(PoolMode::Merging),
            other => Err(Error::Usage(format!("unknown pool mode '{other}'"))),
        }
    }
}

/// The training set `T`.
#[derive(Debug, Clone)]
pub struct TrainingPool {
    mode: PoolMode,
    instances: Vec<KBestList>,
    /// Merging mode: source id → (instance index, token sequences present).
    merged: HashMap<String, (usize, HashSet<TokenSeq>)>,
}

impl TrainingPool {
    pub fn new(mode: PoolMode) -> Self {
        Self {
            mode,
            instances: Vec::new(),
            merged: HashMap::new(),
        }
    }

    pub fn mode(&self) -> PoolMode {
        self.mode
    }

    pub fn instances(&self) -> &[KBestList] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Total number of hypotheses across all instances.
    pub fn hypothesis_count(&self) -> usize {
        self.instances.iter().map(KBestList::len).sum()
    }

    pub fn add_lists(&mut self, lists: impl IntoIterator<Item = KBestList>) {
        for list in lists {
            match self.mode {
                PoolMode::Aggregating => self.instances.push(list),
                PoolMode::Merging => self.merge(list),
            }
        }
    }

    fn merge(&mut self, list: KBestList) {
        match self.merged.get_mut(&list.source_id) {
            Some((idx, seen)) => {
                let target = &mut self.instances[*idx];
                for hyp in list.hyps() {
                    if seen.insert(hyp.tokens.clone()) {
                        target.push(Arc::clone(hyp));
                    }
                }
                target.iteration = list.iteration;
            }
            None => {
                let mut seen = HashSet::new();
                let mut unique = Vec::with_capacity(list.len());
                for hyp in list.hyps() {
                    if seen.insert(hyp.tokens.clone()) {
                        unique.push(Arc::clone(hyp));
                    }
                }
                let merged = KBestList::new(list.source_id.clone(), list.iteration, unique)
                    .expect("a non-empty list stays non-empty after deduplication");
                self.merged.insert(list.source_id.clone(), (self.instances.len(), seen));
                self.instances.push(merged);
            }
        }
    }
}

/// How the inner optimization is carried out.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Listwise(LossKind),
    Pro(ProConfig),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Listwise(kind) => kind.name(),
            Method::Pro(_) => "pro".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialWeights {
    Zero,
    /// Independent N(0, scale²) per feature, drawn from the tuning seed.
    Random { scale: f64 },
    Given(WeightVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub outer_iterations: usize,
    pub k: usize,
    pub pool_mode: PoolMode,
    pub method: Method,
    pub optimizer: OptimizerConfig,
    pub init: InitialWeights,
    pub seed: u64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 40,
            k: 20,
            pool_mode: PoolMode::Aggregating,
            method: Method::Listwise(LossKind::ListMleTe),
            optimizer: OptimizerConfig::default(),
            init: InitialWeights::Zero,
            seed: 0,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self, corpus: &SyntheticCorpus) -> Result<()> {
        if self.outer_iterations == 0 {
            return Err(Error::Config("outer iterations must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.optimizer.validate()?;
        if let Method::Pro(p) = &self.method {
            p.validate()?;
        }
        let m = corpus.min_pool_size();
        if self.k > m {
            return Err(Error::Capability(format!(
                "k = {} exceeds the smallest hypothesis pool in the corpus (M = {m})",
                self.k
            )));
        }
        if corpus.split(Split::Dev).next().is_none() {
            return Err(Error::Input("corpus has no dev sentences".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 0-based outer iteration.
    pub iteration: usize,
    pub weights: WeightVector,
    pub dev_bleu: f64,
    /// Training instances after this iteration's lists were added.
    pub pool_size: usize,
    pub pool_hypotheses: usize,
    pub loss_name: String,
    /// Total training loss at the returned inner snapshot.
    pub final_loss: f64,
    pub best_epoch: usize,
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub weights: WeightVector,
    pub best_iteration: usize,
    pub initial_dev_bleu: f64,
    pub records: Vec<IterationRecord>,
    pub decode_calls: usize,
}

/// Starting weights for a tuning run.
pub fn initial_weights_for(corpus: &SyntheticCorpus, cfg: &TuningConfig) -> WeightVector {
    match &cfg.init {
        InitialWeights::Zero => WeightVector::zeros(),
        InitialWeights::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(cfg.seed, u64::MAX));
            let values = (0..corpus.features.len())
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            WeightVector::from_dense(values)
        }
        InitialWeights::Given(w) => w.clone(),
    }
}

/// Runs the outer tuning loop on the dev split of `corpus`.
pub fn tune(corpus: &SyntheticCorpus, cfg: &TuningConfig) -> Result<TuneOutcome> {
    cfg.validate(corpus)?;
    let dev: Vec<_> = corpus.split(Split::Dev).collect();
    let mut w = initial_weights_for(corpus, cfg);
    let initial_dev_bleu = corpus_top1_bleu(dev.iter().copied(), &w);
    let mut pool = TrainingPool::new(cfg.pool_mode);
    let mut records = Vec::with_capacity(cfg.outer_iterations);
    let mut decode_calls = 0;

    for iteration in 0..cfg.outer_iterations {
        let started = Instant::now();
        let lists = dev
            .par_iter()
            .map(|s| kbest_decode(s, &w, cfg.k, iteration))
            .collect::<Result<Vec<_>>>()?;
        decode_calls += lists.len();
        pool.add_lists(lists);

        let mut opt = cfg.optimizer.clone();
        opt.seed = crate::mix_seed(cfg.seed, iteration as u64);
        let (next, final_loss, best_epoch) = match &cfg.method {
            Method::Listwise(kind) => {
                let out = optimize_objective(pool.instances(), pool.instances(), &w, kind, &opt, OptimizeOptions::default())?;
                let loss = total_loss(kind, pool.instances(), &out.weights)?;
                (out.weights, loss, out.best_epoch)
            }
            Method::Pro(pro_cfg) => {
                let instances = pro::sample_pool(pool.instances(), pro_cfg, crate::mix_seed(pro_cfg.seed ^ cfg.seed, iteration as u64));
                let objective = pro::Logistic;
                let pro_opt = OptimizerConfig {
                    epochs: pro_cfg.epochs,
                    ..opt
                };
                if instances.iter().all(|i| i.is_empty()) {
                    (w.clone(), 0.0, 0)
                } else {
                    let out = optimize_objective(&instances, pool.instances(), &w, &objective, &pro_opt, OptimizeOptions::default())?;
                    let loss = total_loss(&objective, &instances, &out.weights)?;
                    (out.weights, loss, out.best_epoch)
                }
            }
        };
        w = next;

        records.push(IterationRecord {
            iteration,
            weights: w.clone(),
            dev_bleu: corpus_top1_bleu(dev.iter().copied(), &w),
            pool_size: pool.len(),
            pool_hypotheses: pool.hypothesis_count(),
            loss_name: cfg.method.name(),
            final_loss,
            best_epoch,
            wall_time_ms: started.elapsed().as_millis(),
        });
    }

    let mut best = 0;
    for (i, r) in records.iter().enumerate() {
        if r.dev_bleu > records[best].dev_bleu {
            best = i;
        }
    }
    Ok(TuneOutcome {
        weights: records[best].weights.clone(),
        best_iteration: best,
        initial_dev_bleu,
        records,
        decode_calls,
    })
}

/// A labelled tuning configuration to compare.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub label: String,
    pub config: TuningConfig,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub dev_bleu: f64,
    pub test_bleu: f64,
    pub weights: WeightVector,
    /// Per-sentence test statistics of the top-1 decode, for significance tests.
    pub test_stats: Vec<BleuStats>,
}

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub label: String,
    pub per_seed: Vec<SeedResult>,
    pub mean_dev: f64,
    pub mean_test: f64,
    /// Paired bootstrap p-value against the baseline, per seed.
    pub p_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<MethodRow>,
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct BootstrapOptions {
    pub baseline: Option<String>,
    pub samples: usize,
    pub seed: u64,
}

fn test_stats(corpus: &SyntheticCorpus, w: &WeightVector) -> Vec<BleuStats> {
    decode_top1(corpus.split(Split::Test), w)
        .into_iter()
        .map(|h: &Hypothesis| *h.stats())
        .collect()
}

/// Tunes every method under every seed and reports dev/test corpus BLEU.
///
/// Runs are independent and executed in parallel; each is a deterministic
/// function of its (method, seed) pair.
pub fn compare_methods(
    corpus: &SyntheticCorpus,
    methods: &[MethodSpec],
    seeds: &[u64],
    bootstrap: &BootstrapOptions,
) -> Result<CompareReport> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::Config("comparison needs at least one method and one seed".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..methods.len()).flat_map(|m| seeds.iter().map(move |&s| (m, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(m, seed)| {
            let cfg = TuningConfig {
                seed,
                ..methods[m].config.clone()
            };
            let outcome = tune(corpus, &cfg)?;
            let stats = test_stats(corpus, &outcome.weights);
            Ok(SeedResult {
                seed,
                dev_bleu: corpus_top1_bleu(corpus.split(Split::Dev), &outcome.weights),
                test_bleu: stats.iter().sum::<BleuStats>().bleu(),
                weights: outcome.weights,
                test_stats: stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<MethodRow> = methods
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let per_seed: Vec<SeedResult> = results[m * seeds.len()..(m + 1) * seeds.len()].to_vec();
            let n = per_seed.len() as f64;
            MethodRow {
                label: spec.label.clone(),
                mean_dev: per_seed.iter().map(|r| r.dev_bleu).sum::<f64>() / n,
                mean_test: per_seed.iter().map(|r| r.test_bleu).sum::<f64>() / n,
                per_seed,
                p_values: None,
            }
        })
        .collect();

    if let Some(base) = &bootstrap.baseline {
        let base_row = rows
            .iter()
            .find(|r| &r.label == base)
            .cloned()
            .ok_or_else(|| Error::Usage(format!("baseline '{base}' is not among the compared methods")))?;
        for row in &mut rows {
            let p = row
                .per_seed
                .iter()
                .zip(&base_row.per_seed)
                .map(|(a, b)| paired_bootstrap_stats(&a.test_stats, &b.test_stats, bootstrap.samples, bootstrap.seed))
                .collect::<Result<Vec<_>>>()?;
            row.p_values = Some(p);
        }
    }
    Ok(CompareReport {
        rows,
        baseline: bootstrap.baseline.clone(),
    })
}
