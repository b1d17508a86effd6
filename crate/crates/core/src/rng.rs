//! Seed derivation.
//!
//! Every random stream in a campaign is a ChaCha8 stream keyed by the master
//! seed and addressed by `(replica, purpose)`. Two strategies run on the same
//! replica index therefore see the same epidemic randomness, while strategy
//! randomness lives on a separate stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for within one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Initial infection draw.
    Init = 0,
    /// Event times and event nodes of the epidemic.
    Epidemic = 1,
    /// Initial allocation, samples and arrival orders.
    Control = 2,
    /// Anything else (graph construction, cutoff tables).
    Aux = 3,
}

const STREAMS_PER_REPLICA: u64 = 4;

pub fn stream_rng(master_seed: u64, replica: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(
        replica
            .wrapping_mul(STREAMS_PER_REPLICA)
            .wrapping_add(purpose as u64),
    );
    rng
}

/// SplitMix64 finalizer, used to turn structured keys into seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
