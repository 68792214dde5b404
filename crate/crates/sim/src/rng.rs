//! Counter-based random streams.
//!
//! Every random decision draws from a stream keyed by what it is about
//! (run seed, purpose, entity, epoch) rather than from one shared sequence.
//! Two runs that differ only in a drop rate therefore see the same uniforms
//! for the same deliveries, which makes loss monotonicity exact.

use hbhc_core::crypto;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, purpose: &str, a: u64, b: u64) -> ChaCha8Rng {
    let key = crypto::hash_parts(&[
        b"sim-stream",
        &seed.to_be_bytes(),
        purpose.as_bytes(),
        &[0],
        &a.to_be_bytes(),
        &b.to_be_bytes(),
    ]);
    ChaCha8Rng::from_seed(*key.as_bytes())
}
