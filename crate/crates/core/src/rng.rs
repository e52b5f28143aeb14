//! Named, independent random streams derived from a single 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for the stream `name` under `seed`. Different names give
/// statistically independent streams; the same pair always gives the same one.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}
