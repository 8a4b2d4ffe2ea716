//! Counter-based seed splitting.
//!
//! Every random stream is keyed by `(base seed, domain, counters…)`. The key
//! is folded through SplitMix64 and the result seeds a ChaCha8 generator, so
//! replicate `r` of experiment `n` gets the same numbers no matter which
//! worker thread draws it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

/// Separates streams that share a base seed but serve different purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    /// Finite-n replicate paths.
    Replicate = 0x5245_504c,
    /// Long calibration orbits for tabulated reference CDFs.
    Calibration = 0x4341_4c49,
    /// Gaussian draws for the limit functional.
    Limit = 0x4c49_4d49,
    /// Long paths feeding the dependent covariance estimate.
    Covariance = 0x434f_5641,
    /// Brownian-bridge oracle draws.
    Oracle = 0x4f52_4143,
}

/// One SplitMix64 output step.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed from a base seed, a domain and any number of counters.
pub fn derive_seed(base: u64, domain: Domain, counters: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ splitmix64(domain as u64));
    for &c in counters {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

/// Generator for the stream `(base, domain, counters)`.
pub fn stream(base: u64, domain: Domain, counters: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, domain, counters))
}

/// Generator seeded directly, for callers that already hold a derived seed.
pub fn from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator started at 0.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn seeds_differ_across_domains_and_counters() {
        let mut seen = BTreeSet::new();
        for d in [
            Domain::Replicate,
            Domain::Calibration,
            Domain::Limit,
            Domain::Covariance,
            Domain::Oracle,
        ] {
            for n in 0..20u64 {
                for r in 0..50u64 {
                    assert!(seen.insert(derive_seed(42, d, &[n, r])));
                }
            }
        }
        assert_ne!(derive_seed(1, Domain::Limit, &[]), derive_seed(2, Domain::Limit, &[]));
        assert_ne!(
            derive_seed(1, Domain::Limit, &[0, 1]),
            derive_seed(1, Domain::Limit, &[1, 0])
        );
    }

    #[test]
    fn streams_are_reproducible() {
        let a: u64 = stream(7, Domain::Replicate, &[3]).random();
        let b: u64 = stream(7, Domain::Replicate, &[3]).random();
        assert_eq!(a, b);
    }
}
