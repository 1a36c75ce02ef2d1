//! Counter-based Gaussian draws keyed by `(seed, stream_id, mode, step)`.
//!
//! The ChaCha key is `seed ‖ stream_id`, the ChaCha stream is the mode key and
//! the word position is `4·step`, so any draw can be regenerated in isolation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct ModeStream {
    rng: ChaCha8Rng,
}

impl ModeStream {
    pub fn new(seed: u64, stream_id: u64, mode_key: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&stream_id.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(mode_key);
        Self { rng }
    }

    /// Positions the stream at `step`.
    pub fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(4 * step as u128);
    }

    /// Two independent standard normals (Box–Muller), consuming one step.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Packs a wavevector into a stream key independent of the lattice size.
pub fn mode_key(k: &[i64; 3]) -> u64 {
    k.iter()
        .enumerate()
        .fold(0u64, |acc, (a, &c)| acc | (((c + (1 << 20)) as u64 & 0x1f_ffff) << (21 * a)))
}

/// Standard normals for replica-level scalars (not tied to a mode).
pub fn scalar_stream(seed: u64, stream_id: u64) -> ModeStream {
    ModeStream::new(seed, stream_id, u64::MAX)
}
