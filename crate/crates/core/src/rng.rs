//! Deterministic random streams.
//!
//! A `(seed, stream)` pair always yields the same ChaCha8 sequence; distinct
//! streams under one seed are independent.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

/// What a stream is used for within one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Scenario,
    Protocol(u8),
    Calibration(u32),
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Stream for `purpose` in replicate `replicate`.
    pub fn for_replicate(seed: u64, replicate: u64, purpose: Purpose) -> Self {
        let tag = match purpose {
            Purpose::Scenario => 0,
            Purpose::Protocol(k) => 1 + k as u64,
            Purpose::Calibration(k) => 0x1_0000 + k as u64,
        };
        RngStream::new(seed, (replicate << 24) | tag)
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Hands out random bits a few at a time from 64-bit draws.
pub struct BitPool<'a, R: RngCore> {
    rng: &'a mut R,
    buf: u64,
    left: u32,
}

impl<'a, R: RngCore> BitPool<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        BitPool {
            rng,
            buf: 0,
            left: 0,
        }
    }

    /// `k` fresh uniform bits, `k <= 64`.
    pub fn take(&mut self, k: u32) -> u64 {
        debug_assert!(k <= 64);
        if k == 0 {
            return 0;
        }
        if k <= self.left {
            let out = if k == 64 { self.buf } else { self.buf & ((1u64 << k) - 1) };
            self.buf = if k == 64 { 0 } else { self.buf >> k };
            self.left -= k;
            return out;
        }
        let have = self.left;
        let low = self.buf;
        let fresh = self.rng.next_u64();
        let need = k - have;
        let high = if need == 64 { fresh } else { fresh & ((1u64 << need) - 1) };
        self.buf = if need == 64 { 0 } else { fresh >> need };
        self.left = 64 - need;
        low | if have == 64 { 0 } else { high << have }
    }

    /// Bernoulli(2^-k).
    pub fn one_in_pow2(&mut self, k: u32) -> bool {
        debug_assert!(k <= 64);
        let bits = self.take(k);
        if k == 64 {
            bits == u64::MAX
        } else {
            bits == (1u64 << k) - 1
        }
    }
}
