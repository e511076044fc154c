//! Seeded random streams. Every stochastic routine draws from a ChaCha8
//! stream selected by `(master seed, stream id)`, so parallel work is
//! reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
