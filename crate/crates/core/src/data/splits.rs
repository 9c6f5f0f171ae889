use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Hex digest of the index lists; equal digests mean identical splits.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (tag, idx) in [(b"train", &self.train), (b"test\0", &self.test)] {
            h.update(tag);
            for i in idx.iter() {
                h.update((*i as u64).to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub num_repeats: usize,
    pub train_fraction: f64,
    pub splits: Vec<Split>,
}

/// The default protocol: ten 80/20 splits.
pub fn make_splits(n: usize, seed: u64) -> Result<SplitPlan> {
    make_splits_with(n, seed, DEFAULT_REPEATS, DEFAULT_TRAIN_FRACTION)
}

/// Split `k` shuffles `0..n` with a stream seeded by `seed + k`; the first
/// `round(fraction·n)` shuffled indices train, the rest test. Both lists are
/// returned sorted.
pub fn make_splits_with(n: usize, seed: u64, repeats: usize, fraction: f64) -> Result<SplitPlan> {
    if n < 5 {
        return Err(Error::Config(format!("need at least 5 samples to split, got {n}")));
    }
    if repeats == 0 || !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "invalid split protocol: {repeats} repeats, train fraction {fraction}"
        )));
    }
    let n_train = (fraction * n as f64).round() as usize;
    let splits = (0..repeats as u64)
        .map(|k| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(k)));
            let mut train = order[..n_train].to_vec();
            let mut test = order[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        num_repeats: repeats,
        train_fraction: fraction,
        splits,
    })
}
