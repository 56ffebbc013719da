use pcgen_core::PointCloudSet;
use rand::seq::SliceRandom;

use crate::error::{Result, SynthError};
use crate::item_rng;

/// Random partition into `(train, test)` with `round(fraction * len)` training
/// clouds. Both halves keep the input's relative order.
pub fn split_set(set: &PointCloudSet, fraction: f64, seed: u64) -> Result<(PointCloudSet, PointCloudSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SynthError::BadConfig(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut item_rng(seed, 0));
    let n_train = (fraction * set.len() as f64).round() as usize;
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        set.select(format!("{}-train", set.name()), train),
        set.select(format!("{}-test", set.name()), test),
    ))
}
