//! Derivation of independent sub-seeds from one master seed.
//!
//! `derive_seed(master, stream, index)` runs SplitMix64 over the master seed
//! mixed first with the stream tag and then with the counter, so every
//! consumer (k-means fits, holdout splits, bootstrap iterations, synthetic
//! participants) draws from its own reproducible stream.

/// Consumers of derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    HoldoutSplit = 1,
    KMeans = 2,
    Bootstrap = 3,
    Participant = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream as u64)) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_and_indices_differ() {
        let a = derive_seed(7, Stream::Bootstrap, 0);
        assert_eq!(a, derive_seed(7, Stream::Bootstrap, 0));
        assert_ne!(a, derive_seed(7, Stream::Bootstrap, 1));
        assert_ne!(a, derive_seed(7, Stream::KMeans, 0));
        assert_ne!(a, derive_seed(8, Stream::Bootstrap, 0));
    }
}
