//! Deterministic seed derivation.
//!
//! Every random quantity in the crate is addressed by a [`SeedLineage`]: a
//! master seed plus a derived stream key. Lineages form a tree (`derive`) so
//! that trials, draws and paths each own an independent stream which can be
//! regenerated without replaying any other stream. Randomness within a stream
//! is further split into fixed-size blocks of grid cells, each block being a
//! separate ChaCha stream, so any cell range can be generated independently
//! of the order in which ranges are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    /// Key accumulated from the chain of derivation indices.
    pub stream: u64,
}

impl SeedLineage {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    /// Child lineage for index `idx`. Distinct indices give unrelated streams.
    pub fn derive(&self, idx: u64) -> Self {
        Self {
            master: self.master,
            stream: mix64(self.stream ^ mix64(idx.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// Convenience for a two-level derivation `derive(a).derive(b)`.
    pub fn derive2(&self, a: u64, b: u64) -> Self {
        self.derive(a).derive(b)
    }

    /// RNG for block `block` of this lineage. Blocks are addressed by signed
    /// absolute index so that negative-time cells get their own streams.
    pub fn block_rng(&self, block: i64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut z = self.master;
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            z = mix64(z ^ self.stream.rotate_left(16 * i as u32));
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(block as u64);
        rng
    }

    /// A plain RNG for the lineage itself (block 0 of a reserved child).
    pub fn rng(&self) -> ChaCha8Rng {
        self.derive(u64::MAX).block_rng(0)
    }
}
