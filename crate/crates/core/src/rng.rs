//! Counter-based random streams.
//!
//! Every stream is addressed by a `(seed, index)` pair: the seed keys a
//! ChaCha8 generator and the index selects its 64-bit stream id, so the
//! numbers drawn for realization `index` never depend on how many other
//! realizations were drawn before it, or in which order. Gaussian variates
//! use the inverse normal CDF so that each consumes exactly one uniform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

/// Random stream for one `(seed, index)` address.
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Uniform variate in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// `n` standard normal variates drawn from stream `(seed, index)`.
///
/// The first `k` values of a draw of length `n ≥ k` equal a draw of length `k`.
pub fn standard_normals(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut stream = Stream::new(seed, index);
    (0..n).map(|_| stream.standard_normal()).collect()
}

fn standard() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}
