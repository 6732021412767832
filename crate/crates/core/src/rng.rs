//! Reproducible random streams keyed by `(seed, stream)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Child stream identified by a label and an index. Children of distinct
    /// `(label, index)` pairs do not overlap with each other or the parent.
    pub fn substream(&self, label: &str, index: u64) -> RngStream {
        let mut h = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c909);
        h = splitmix64(h ^ self.stream);
        for b in label.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        h = splitmix64(h ^ index);
        RngStream {
            seed: h,
            stream: self.stream,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn draw(s: RngStream) -> Vec<u64> {
        let mut rng = s.rng();
        (0..8).map(|_| rng.random()).collect()
    }

    #[test]
    fn same_stream_same_sequence() {
        assert_eq!(draw(RngStream::new(7, 3)), draw(RngStream::new(7, 3)));
    }

    #[test]
    fn streams_differ() {
        assert_ne!(draw(RngStream::new(7, 3)), draw(RngStream::new(7, 4)));
        assert_ne!(draw(RngStream::new(7, 3)), draw(RngStream::new(8, 3)));
        let s = RngStream::new(7, 3);
        assert_ne!(draw(s.substream("pool", 0)), draw(s.substream("pool", 1)));
        assert_ne!(draw(s.substream("pool", 0)), draw(s.substream("fit", 0)));
        assert_eq!(draw(s.substream("pool", 5)), draw(s.substream("pool", 5)));
    }
}
