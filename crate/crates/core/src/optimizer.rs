//! Minibatch stochastic gradient descent with AdaDelta step sizes.
//!
//! Each epoch shuffles the training instances with a ChaCha8 stream keyed by
//! `(seed, epoch)`, walks them in batches of `batch_size` (the last batch may
//! be short), sums the per-instance gradients in batch order and applies one
//! AdaDelta step per batch. After every epoch the current weights are scored
//! by the corpus BLEU of the top-1 hypothesis of every selection list; the
//! best snapshot is returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{SparseVector, WeightVector};
use crate::metrics::BleuStats;
use crate::ranking::{KBestList, LossKind};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            epochs: 100,
            rho: DEFAULT_RHO,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Decayed accumulators of squared gradients and squared updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDelta {
    avg_sq_grad: Vec<f64>,
    avg_sq_update: Vec<f64>,
    rho: f64,
    epsilon: f64,
}

impl AdaDelta {
    pub fn new(rho: f64, epsilon: f64) -> Result<Self> {
        OptimizerConfig {
            rho,
            epsilon,
            ..Default::default()
        }
        .validate()?;
        Ok(Self {
            avg_sq_grad: Vec::new(),
            avg_sq_update: Vec::new(),
            rho,
            epsilon,
        })
    }

    pub fn avg_sq_grad(&self, i: usize) -> f64 {
        self.avg_sq_grad.get(i).copied().unwrap_or(0.0)
    }

    pub fn avg_sq_update(&self, i: usize) -> f64 {
        self.avg_sq_update.get(i).copied().unwrap_or(0.0)
    }

    /// Returns the update `Δx` for `grad` and advances the accumulators.
    pub fn step(&mut self, grad: &WeightVector) -> Result<WeightVector> {
        if !grad.is_finite() {
            return Err(Error::Numeric("AdaDelta received a non-finite gradient".into()));
        }
        let dim = grad.dim().max(self.avg_sq_grad.len());
        self.avg_sq_grad.resize(dim, 0.0);
        self.avg_sq_update.resize(dim, 0.0);
        let (rho, eps) = (self.rho, self.epsilon);
        let mut update = vec![0.0; dim];
        for (i, u) in update.iter_mut().enumerate() {
            let g = grad.as_slice().get(i).copied().unwrap_or(0.0);
            let eg = rho * self.avg_sq_grad[i] + (1.0 - rho) * g * g;
            let dx = -((self.avg_sq_update[i] + eps).sqrt() / (eg + eps).sqrt()) * g;
            self.avg_sq_grad[i] = eg;
            self.avg_sq_update[i] = rho * self.avg_sq_update[i] + (1.0 - rho) * dx * dx;
            *u = dx;
        }
        let update = WeightVector::from_dense(update);
        update.check_finite("AdaDelta update")?;
        Ok(update)
    }
}

/// A differentiable per-instance training objective.
pub trait Objective: Sync {
    type Instance: Sync;

    fn name(&self) -> String;

    fn loss_and_gradient(&self, instance: &Self::Instance, w: &WeightVector) -> Result<(f64, SparseVector)>;

    fn loss(&self, instance: &Self::Instance, w: &WeightVector) -> Result<f64> {
        self.loss_and_gradient(instance, w).map(|(l, _)| l)
    }
}

impl Objective for LossKind {
    type Instance = KBestList;

    fn name(&self) -> String {
        LossKind::name(self)
    }

    fn loss_and_gradient(&self, list: &KBestList, w: &WeightVector) -> Result<(f64, SparseVector)> {
        LossKind::loss_and_gradient(self, list, w)
    }

    fn loss(&self, list: &KBestList, w: &WeightVector) -> Result<f64> {
        LossKind::loss(self, list, w)
    }
}

/// Sum of the objective over all instances, in instance order.
pub fn total_loss<O: Objective>(objective: &O, instances: &[O::Instance], w: &WeightVector) -> Result<f64> {
    instances.iter().map(|inst| objective.loss(inst, w)).sum()
}

/// Corpus BLEU of the top-1 hypothesis of every list under `w`.
pub fn top1_corpus_bleu(lists: &[KBestList], w: &WeightVector) -> f64 {
    let stats: BleuStats = lists.iter().map(|l| *l.top1(w).stats()).sum();
    stats.bleu()
}

/// Instance visiting order for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Sizes of the batches an epoch over `n` instances is split into.
pub fn batch_sizes(n: usize, batch_size: usize) -> Vec<usize> {
    let order: Vec<usize> = (0..n).collect();
    order.chunks(batch_size.max(1)).map(<[usize]>::len).collect()
}

/// One pass over the instances; returns the updated weights and the number
/// of AdaDelta steps taken.
pub fn run_epoch<O: Objective>(
    instances: &[O::Instance],
    w: &WeightVector,
    state: &mut AdaDelta,
    objective: &O,
    cfg: &OptimizerConfig,
    epoch: usize,
) -> Result<(WeightVector, usize)> {
    if instances.is_empty() {
        return Err(Error::Input("cannot run an epoch over an empty training pool".into()));
    }
    cfg.validate()?;
    let mut w = w.clone();
    let mut steps = 0;
    let order = epoch_order(instances.len(), cfg.seed, epoch);
    for batch in order.chunks(cfg.batch_size) {
        let mut grad = WeightVector::zeros();
        for &i in batch {
            let (_, g) = objective.loss_and_gradient(&instances[i], &w)?;
            grad.add_scaled(&g, 1.0);
        }
        let update = state.step(&grad)?;
        w.add_dense_scaled(&update, 1.0);
        steps += 1;
    }
    w.check_finite("weights")?;
    Ok((w, steps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub top1_bleu: f64,
    /// Total instance loss after the epoch, when requested.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub weights: WeightVector,
    /// Epoch whose snapshot was returned (1-based; 0 when no epoch ran).
    pub best_epoch: usize,
    pub best_bleu: f64,
    pub trace: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OptimizeOptions {
    /// Record the total loss after every epoch.
    pub track_loss: bool,
}

/// Runs `cfg.epochs` epochs and returns the best-BLEU snapshot.
///
/// Ties in BLEU go to the earliest epoch. With zero epochs the starting
/// weights are returned unchanged.
pub fn optimize_objective<O: Objective>(
    instances: &[O::Instance],
    selection: &[KBestList],
    w0: &WeightVector,
    objective: &O,
    cfg: &OptimizerConfig,
    opts: OptimizeOptions,
) -> Result<OptimizeOutcome> {
    if instances.is_empty() {
        return Err(Error::Input("cannot optimize over an empty training pool".into()));
    }
    cfg.validate()?;
    let mut state = AdaDelta::new(cfg.rho, cfg.epsilon)?;
    let mut w = w0.clone();
    let mut best = OptimizeOutcome {
        weights: w0.clone(),
        best_epoch: 0,
        best_bleu: f64::NEG_INFINITY,
        trace: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let (next, _) = run_epoch(instances, &w, &mut state, objective, cfg, epoch)?;
        w = next;
        let bleu = top1_corpus_bleu(selection, &w);
        let loss = if opts.track_loss {
            Some(total_loss(objective, instances, &w)?)
        } else {
            None
        };
        best.trace.push(EpochRecord {
            epoch: epoch + 1,
            top1_bleu: bleu,
            loss,
        });
        if bleu > best.best_bleu {
            best.best_bleu = bleu;
            best.best_epoch = epoch + 1;
            best.weights = w.clone();
        }
    }
    if cfg.epochs == 0 {
        best.best_bleu = top1_corpus_bleu(selection, w0);
    }
    Ok(best)
}

/// Listwise optimization where the training lists are also the selection lists.
pub fn optimize(pool: &[KBestList], w0: &WeightVector, loss: LossKind, cfg: &OptimizerConfig) -> Result<WeightVector> {
    optimize_objective(pool, pool, w0, &loss, cfg, OptimizeOptions::default()).map(|o| o.weights)
}
