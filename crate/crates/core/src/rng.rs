//! Seed lineage. Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(master seed, path id, channel, index)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent random channels within one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Channel {
    Schrodinger = 1,
    Kdv = 2,
    InitialData = 3,
    Probe = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub path_id: u64,
    pub channel: Channel,
}

impl SeedLineage {
    pub fn new(master: u64, path_id: u64, channel: Channel) -> Self {
        Self { master, path_id, channel }
    }

    pub fn with_channel(self, channel: Channel) -> Self {
        Self { channel, ..self }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        stream(self.master, self.path_id, self.channel as u64, index)
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: u64, channel: u64, index: u64) -> u64 {
    let mut h = splitmix64(master);
    for part in [path, channel, index] {
        h = splitmix64(h ^ splitmix64(part));
    }
    h
}

pub fn stream(master: u64, path: u64, channel: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path, channel, index))
}
