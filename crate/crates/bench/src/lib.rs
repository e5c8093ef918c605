//! Shared instance builders for the benchmark suite.

use bnedge_core::mobius::{LatticeTable, LogWeight};
use bnedge_core::model::{Dataset, PriorSpec};
use bnedge_core::study::{generate_network, sample_dataset};

/// A network-sampled dataset and the matching default analysis prior.
pub fn synthetic_instance(n: usize, k: usize, r: u32, m: usize, seed: u64) -> (Dataset, PriorSpec) {
    let net = generate_network(n, k, r, seed).expect("valid dims");
    let data = sample_dataset(&net, m, seed.wrapping_add(1));
    (data, PriorSpec::default_with_k(k))
}

/// A dense lattice table with reproducible pseudo-random log weights.
pub fn random_table(n: usize, seed: u64) -> LatticeTable {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(11);
    let entries = (0..1usize << n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            LogWeight::from_ln(((state >> 11) as f64 / (1u64 << 53) as f64) * 12.0 - 6.0)
        })
        .collect();
    LatticeTable::from_entries(n, entries)
}

/// The same table with all mass above cardinality `k` removed.
pub fn truncated_support_table(n: usize, k: usize, seed: u64) -> LatticeTable {
    let mut table = random_table(n, seed);
    for mask in 0..table.len() {
        if mask.count_ones() as usize > k {
            table[mask] = LogWeight::ZERO;
        }
    }
    table
}
