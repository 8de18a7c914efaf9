//! Counter-based random streams.
//!
//! Every draw is addressed by `(master seed, replication, lane, round)`. The
//! ChaCha key comes from the master seed, the 64-bit ChaCha nonce encodes the
//! replication and lane, and the block counter is positioned at a fixed window
//! per round. Draws for round `t` therefore never depend on how many values
//! were consumed in earlier rounds or on which thread ran the replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream reserved for each round (2^20 u32 words).
const ROUND_WINDOW_BITS: u32 = 20;
const LANES: u64 = 4;

/// Independent consumers of randomness inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Reward noise drawn by stochastic environments.
    Environment = 0,
    /// Randomized choices made by the player.
    Policy = 1,
    /// Construction of adversarial reward tables.
    Adversary = 2,
    /// Anything else a caller needs (instance generation in tests, etc.).
    Auxiliary = 3,
}

/// The random stream of one replication.
#[derive(Debug, Clone)]
pub struct ReplicationStream {
    seed: u64,
    replication: u64,
    base: ChaCha8Rng,
}

impl ReplicationStream {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self {
            seed,
            replication,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    /// Generator for `round` on `lane`. Rounds are 0-based.
    pub fn at(&self, lane: Lane, round: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(self.replication.wrapping_mul(LANES).wrapping_add(lane as u64));
        rng.set_word_pos(u128::from(round) << ROUND_WINDOW_BITS);
        rng
    }

    /// Generator for a whole lane when per-round addressing is not needed.
    pub fn lane(&self, lane: Lane) -> ChaCha8Rng {
        self.at(lane, 0)
    }
}
