//! Paired bootstrap resampling over corpus BLEU.
//!
//! Resample `s` draws its indices from a ChaCha8 stream keyed by `seed` with
//! stream number `s`, so samples are independent of evaluation order and the
//! parallel loop is bit-identical to a sequential one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{collect_stats, BleuStats, TokenSeq};
use crate::error::{Error, Result};

/// RNG for resample number `sample`.
pub(crate) fn resample_rng(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

/// Fraction of resampled corpora in which system A scores ≤ system B.
pub fn paired_bootstrap_stats(a: &[BleuStats], b: &[BleuStats], samples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "paired bootstrap needs equal-length systems, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if samples == 0 {
        return Err(Error::Config("bootstrap sample count must be positive".into()));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::Input("paired bootstrap over an empty corpus".into()));
    }
    let not_better: usize = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = resample_rng(seed, s);
            let mut sa = BleuStats::default();
            let mut sb = BleuStats::default();
            for _ in 0..n {
                let i = rng.random_range(0..n);
                sa += a[i];
                sb += b[i];
            }
            usize::from(sa.bleu() <= sb.bleu())
        })
        .sum();
    Ok(not_better as f64 / samples as f64)
}

/// Paired bootstrap p-value for "A is better than B" on tokenized outputs.
pub fn paired_bootstrap(
    sys_a: &[TokenSeq],
    sys_b: &[TokenSeq],
    refs: &[TokenSeq],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if sys_a.len() != refs.len() || sys_b.len() != refs.len() {
        return Err(Error::Input(format!(
            "paired bootstrap length mismatch: A={}, B={}, refs={}",
            sys_a.len(),
            sys_b.len(),
            refs.len()
        )));
    }
    let a: Vec<BleuStats> = sys_a.iter().zip(refs).map(|(h, r)| collect_stats(h, r)).collect();
    let b: Vec<BleuStats> = sys_b.iter().zip(refs).map(|(h, r)| collect_stats(h, r)).collect();
    paired_bootstrap_stats(&a, &b, samples, seed)
}
