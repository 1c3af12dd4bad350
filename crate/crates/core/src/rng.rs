//! Seed derivation and counter-based random streams.
//!
//! All randomness descends from one root seed. A [`SeedPath`] names a
//! sub-purpose (replicate, field, spectral draw) by mixing labels into the
//! seed; [`SeedPath::stream`] then opens a ChaCha8 keystream whose 64-bit
//! stream id picks an independent block of output. Work split across
//! threads draws from per-item streams, so results are independent of the
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn root(seed: u64) -> Self {
        SeedPath(mix(seed))
    }

    /// Child node for `label`; distinct labels give unrelated seeds.
    pub fn child(self, label: u64) -> Self {
        SeedPath(mix(self.0 ^ mix(label.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn key(self) -> u64 {
        self.0
    }

    /// Keystream `stream` of this node.
    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        for (k, chunk) in seed.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&mix(self.0.wrapping_add(k as u64)).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng
    }
}

/// Labels used for the well-known branches of the seed tree.
pub mod labels {
    pub const NOISE: u64 = 1;
    pub const SPECTRAL: u64 = 2;
    pub const REPLICATE: u64 = 3;
    pub const TARGET: u64 = 4;
}
