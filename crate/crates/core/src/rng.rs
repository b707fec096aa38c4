//! Seeded random streams.
//!
//! Every consumer of randomness derives its generator from the run seed and
//! a fixed stream id, so adding a new consumer never shifts another one's
//! sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_SPLIT: u64 = 3;
pub const STREAM_VALIDATION: u64 = 4;
pub const STREAM_BOOTSTRAP: u64 = 5;
pub const STREAM_SYNTHETIC: u64 = 6;
pub const STREAM_VALIDATION_NEGATIVES: u64 = 7;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
