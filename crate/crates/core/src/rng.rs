//! Seeded random streams.
//!
//! One run seed feeds several independent ChaCha streams, one per purpose,
//! so that changing how many numbers one consumer draws never shifts what
//! another consumer sees. Two fusion variants trained from the same seed
//! therefore see the same batch order and dropout seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    FusionInit = 1,
    HeadInit = 2,
    Shuffle = 3,
    Dropout = 4,
    Split = 5,
    Synth = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
