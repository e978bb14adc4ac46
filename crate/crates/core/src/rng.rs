//! Reproducible random streams.
//!
//! One root seed fans out into counter-addressed ChaCha substreams, so any
//! rollout can be replayed from `(root_seed, stream_id)` alone and parallel
//! runs never share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    root_seed: u64,
}

impl RngStreams {
    pub fn new(root_seed: u64) -> Self {
        Self { root_seed }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn stream(&self, stream_id: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(stream_id);
        rng
    }
}

/// Draws an index from a discrete distribution by inverse-CDF scan.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw above the accumulated total.
pub fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
