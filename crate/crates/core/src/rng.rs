//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream so
//! that, for example, the ensemble's keys never shift the weight draws. This
//! is what lets a one-member ensemble and the tanh baseline start from the
//! same weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Keys = 1,
    Weights = 2,
    ClassOrder = 3,
    Sampling = 4,
    Synthetic = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
