//! Deterministic random substreams.
//!
//! A 64-bit master seed is expanded into a ChaCha8 key by splitmix64, mixed
//! with a per-experiment label. Each replica (or fixed-size block of
//! samples) then reads from its own ChaCha stream, selected by the replica
//! index through the cipher's 64-bit stream id. The mapping
//! `(seed, label, index) -> stream` is part of the stable interface:
//! changing it changes every published number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a stream label.
pub fn label_hash(label: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// The generator for substream `index` of experiment `label` under `seed`.
pub fn substream(seed: u64, label: &str, index: u64) -> SimRng {
    let mut state = seed ^ label_hash(label).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Runs replicas on disjoint substreams and returns their results in
/// replica-index order. The worker count only changes wall-clock time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Replicator {
    pub seed: u64,
    pub workers: usize,
}

impl Replicator {
    pub fn new(seed: u64) -> Self {
        Self { seed, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn rng(&self, label: &str, index: u64) -> SimRng {
        substream(self.seed, label, index)
    }

    pub fn run<T, F>(&self, label: &str, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &mut SimRng) -> T + Sync + Send,
    {
        let job = |i: u64| {
            let mut rng = substream(self.seed, label, i);
            f(i, &mut rng)
        };
        if self.workers <= 1 || n <= 1 {
            return (0..n).map(job).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(job).collect()),
            Err(_) => (0..n).map(job).collect(),
        }
    }

    /// Splits `n` samples into fixed blocks of `block` samples; block `i`
    /// uses substream `i`, so the partition never depends on `workers`.
    pub fn run_blocks<T, F>(&self, label: &str, n: u64, block: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &mut SimRng) -> T + Sync + Send,
    {
        let block = block.max(1);
        let n_blocks = n.div_ceil(block);
        self.run(label, n_blocks, |i, rng| {
            let len = block.min(n - i * block);
            f(len, rng)
        })
    }
}
