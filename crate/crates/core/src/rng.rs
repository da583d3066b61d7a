//! Seeded innovation streams.
//!
//! Each `(seed, stream)` pair selects an independent ChaCha20 keystream, so
//! replications never share random numbers. Draws are consumed strictly in
//! order, which gives the prefix property: the first `m` innovations of a
//! length-`n` path equal those of a length-`m` path with the same seed.
//!
//! Normals come from the Box–Muller transform applied to pairs of 53-bit
//! uniforms on (0, 1]; both outputs of each pair are used (cosine first).

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct InnovationStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl InnovationStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on (0, 1], never zero so `ln` is always finite.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}
