use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Seeded generator that serializes as `(seed, word_pos)` so a saved graph
/// resumes the exact random stream it stopped at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RngState", into = "RngState")]
pub struct SynthRng {
    seed: u64,
    inner: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    word_pos: u128,
}

impl From<RngState> for SynthRng {
    fn from(s: RngState) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(s.seed);
        inner.set_word_pos(s.word_pos);
        Self { seed: s.seed, inner }
    }
}

impl From<SynthRng> for RngState {
    fn from(r: SynthRng) -> Self {
        Self {
            seed: r.seed,
            word_pos: r.inner.get_word_pos(),
        }
    }
}

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}
