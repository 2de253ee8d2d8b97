//! Splittable, reproducible random streams for parallel replicates.
//!
//! A stream is a pure function of `(master_seed, stream_id)`: ChaCha's
//! 64-bit stream counter gives 2^64 independent streams per seed, so
//! replicates can be scheduled in any order on any number of workers and
//! still draw identical sequences.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream for a sub-experiment, offset into a disjoint block.
    pub fn substream(&self, offset: u64) -> RngStream {
        RngStream::new(self.master_seed, self.stream_id.wrapping_add(offset))
    }
}
