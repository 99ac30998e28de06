//! Random streams for reproducible parallel Monte Carlo.
//!
//! Every stream is a ChaCha8 keystream whose key comes from the master seed and
//! whose 64-bit stream id is a hash of a path such as
//! `("ulln", n_index, replication)`. A replication's draws therefore depend only
//! on its path, never on which worker thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to turn stage labels into path components.
pub fn label(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// A node in the stream tree: master seed plus a hashed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    master: u64,
    path: u64,
}

impl Stream {
    pub fn root(master: u64) -> Self {
        Self { master, path: splitmix64(0) }
    }

    pub fn stage(self, tag: &str) -> Self {
        self.index(label(tag))
    }

    pub fn index(self, i: u64) -> Self {
        Self { master: self.master, path: splitmix64(self.path ^ splitmix64(i)) }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stable identifier of this stream, recorded in run manifests.
    pub fn id(&self) -> u64 {
        self.path
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.path);
        rng
    }

    /// Derive a plain u64 seed (for APIs that take a seed rather than a stream).
    pub fn seed(&self) -> u64 {
        splitmix64(self.master ^ self.path)
    }
}
