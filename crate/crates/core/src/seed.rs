//! Seed derivation. Every random draw in a run comes from a generator seeded
//! by `(run seed, stream, ids…)`, so results never depend on call order or
//! on how clients are spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent random streams within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    ModelInit = 1,
    Partition = 2,
    Selection = 3,
    Batches = 4,
    EvalSplit = 5,
    Blobs = 6,
    BlobCenters = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, ids: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ splitmix64(stream as u64));
    for &id in ids {
        h = splitmix64(h ^ splitmix64(id.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn rng_for(base: u64, stream: Stream, ids: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, stream, ids))
}
