//! Standalone numerical checks of the method's mathematical claims.

pub mod ig_inequality;
pub mod kl_invariance;
pub mod mult_count;
pub mod probe;

pub use ig_inequality::{run_ig_inequality, IgReport, IgTrial, UpdateKind};
pub use kl_invariance::{kl_affine_invariance, kl_full, run_kl_invariance, AffineMap, FullGaussian, InvarianceReport};
pub use mult_count::{mult_count, MultCountMode};
pub use probe::{read_probe, summarize_probe, ProbeRow, ProbeSummary, PROBE_FILE};

use crate::Rng;

/// Generator for trial `index` of an analysis seeded with `seed`. Trials are
/// independent of each other and of evaluation order.
pub(crate) fn trial_rng(seed: u64, index: u64) -> Rng {
    let mut rng = crate::seeded_rng(seed);
    rng.set_stream(index);
    rng
}
