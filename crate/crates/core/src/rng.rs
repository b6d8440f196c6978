//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! `(seed, stream)`, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub mod streams {
    pub const TRIP_LENGTH: u64 = 1;
    pub const PENALTIES: u64 = 2;
    pub const DESIRED_ARRIVAL: u64 = 3;
    pub const CHOICE_PERSISTENT: u64 = 10;
    pub const TASTE: u64 = 11;
    pub const CHOICE_DAILY: u64 = 12;
    pub const LHS: u64 = 20;
    pub const DROPOUT: u64 = 21;
    pub const ACQUISITION: u64 = 22;
    pub const HYPERPARAMETERS: u64 = 23;
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
