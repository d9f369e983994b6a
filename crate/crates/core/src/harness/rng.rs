//! Hierarchical RNG substreams: `(master seed, rep, user, purpose)`.
//!
//! The master seed keys a ChaCha8 generator and the other three coordinates
//! select one of its 2^64 independent streams, so every user draw is
//! reproducible regardless of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const MAX_REPS: u64 = 1 << 20;
pub const MAX_USERS: u64 = 1 << 40;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Population = 0,
    Client = 1,
}

#[derive(Debug, Clone)]
pub struct SeedTree {
    base: ChaCha8Rng,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        SeedTree {
            base: ChaCha8Rng::seed_from_u64(master),
        }
    }

    pub fn stream(&self, rep: u64, user: u64, purpose: Purpose) -> Result<ChaCha8Rng> {
        if rep >= MAX_REPS || user >= MAX_USERS {
            return Err(Error::Capacity {
                what: "rep/user substream index",
                value: rep.max(user) as usize,
                limit: if rep >= MAX_REPS { MAX_REPS } else { MAX_USERS } as usize,
            });
        }
        let mut rng = self.base.clone();
        rng.set_stream(rep << 44 | user << 4 | purpose as u64);
        Ok(rng)
    }
}
