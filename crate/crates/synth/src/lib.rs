//! Procedural shape families with correlated part styles, plus the
//! part-recombination attack used to probe part-aware metrics.
//!
//! Every generator derives one RNG stream per cloud index from the configured
//! seed, so output depends only on `(seed, index)`.

mod attack;
mod baseline;
mod error;
mod family;
mod split;

pub use attack::{contact_centroid, recombine_attack, Alignment, AttackConfig, DEFAULT_CONTACT_FRACTION};
pub use baseline::gaussian_baseline;
pub use error::{Result, SynthError};
pub use family::{sample_styles, synth_set, Family, ShapeFamilyConfig, StyleRange};
pub use split::split_set;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for item `index` of a stream seeded by `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
