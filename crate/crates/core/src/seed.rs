//! Deterministic seed splitting and replication.
//!
//! Every random task gets its own ChaCha8 stream: the generator is keyed by
//! the master seed and the stream id is `(purpose << 40) | index`. Results
//! are collected by index, so merges do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default master seed when neither a flag nor `MIXBOUND_SEED` is given.
pub const DEFAULT_SEED: u64 = 7;

/// Stream purposes. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Path = 1,
    Replica = 2,
    Tau = 3,
    Moment = 4,
    Means = 5,
    Experiment = 6,
    Test = 7,
}

pub fn rng_for(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 40) | (index & ((1 << 40) - 1)));
    rng
}

/// Derive a child master seed (SplitMix64 finalizer), used when one task
/// spawns a nested family of streams.
pub fn derive(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `reps` independent tasks on at most `workers` threads and return the
/// results in replication order.
pub fn replicate<T, F>(workers: usize, reps: usize, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || reps <= 1 {
        return (0..reps).map(&task).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..reps).into_par_iter().map(&task).collect()),
        Err(_) => (0..reps).map(&task).collect(),
    }
}
