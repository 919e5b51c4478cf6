//! Listwise learning-to-rank tuning for linear k-best reranking models.
//!
//! The crate is organised bottom-up:
//!
//! * [`metrics`]: sentence/corpus BLEU and paired bootstrap resampling.
//! * [`ranking`]: hypotheses, k-best lists, Plackett-Luce probabilities and
//!   the listwise losses with their gradients.
//! * [`optimizer`]: minibatch AdaDelta with best-BLEU snapshot selection.
//! * [`decoder`]: synthetic corpora and k-best extraction by model score.
//! * [`tuning`]: the iterative decode/aggregate/optimize loop.
//! * [`pro`]: pairwise ranking optimization on the same machinery.
//! * [`cli`]: file formats and the command-line front end.

pub mod cli;
pub mod decoder;
pub mod error;
pub mod features;
pub mod metrics;
pub mod optimizer;
pub mod pro;
pub mod ranking;
pub mod tuning;

pub use error::{Error, Result};
pub use features::{FeatureId, FeatureSpace, SparseVector, WeightVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
