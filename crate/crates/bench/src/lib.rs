//! Seeded inputs shared by the benchmarks.

use kdebias::{DefiningSets, EmbeddingTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` uniform random words in `[-1, 1]^d`, named `w0..`.
pub fn random_table(seed: u64, n: usize, d: usize) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| (format!("w{i}"), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    EmbeddingTable::from_rows(rows).expect("distinct names, finite values")
}

/// The first `2 * pairs` rows paired as `(w0, w1), (w2, w3), ...`.
pub fn leading_pairs(table: &EmbeddingTable, pairs: usize) -> DefiningSets {
    DefiningSets::new((0..pairs).map(|i| (2 * i, 2 * i + 1)).collect(), table).expect("rows exist")
}
