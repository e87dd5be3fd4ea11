//! Competitive learning vector quantization.
//!
//! For each streamed point `x`, the nearest centroid `η̂` moves toward it by
//! the homothety `η̂ ← η̂ - γ_t (η̂ - x)` with `γ_t = γ₀ a / (a + t)`.

use super::kmeans::{map_samples, minmax_seeds};
use super::{nearest, Codebook, Method, SquaredEuclidean, T2Map};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClvqOptions {
    pub init_seed: u64,
    pub gamma0: f64,
    /// Schedule constant `a`; `None` means one tenth of the stream length.
    pub schedule_a: Option<f64>,
    pub passes: usize,
}

impl Default for ClvqOptions {
    fn default() -> Self {
        Self { init_seed: 0, gamma0: 0.5, schedule_a: None, passes: 1 }
    }
}

impl ClvqOptions {
    pub fn learning_rate(&self, step: usize, stream_len: usize) -> f64 {
        let a = self.schedule_a.unwrap_or(stream_len as f64 / 10.0);
        self.gamma0 * a / (a + step as f64)
    }
}

pub fn clvq(samples: &[Vec<f64>], t2: &T2Map, p: usize, options: &ClvqOptions) -> Result<Codebook> {
    let m = t2.dim();
    let points = map_samples(samples, t2)?;
    let n = samples.len();
    if p == 0 {
        return Err(Error::InvalidCodebook("CLVQ needs at least one centroid".into()));
    }
    if n < p {
        return Err(Error::InsufficientSamples { available: n, requested: p });
    }
    let mut centroids = minmax_seeds(&points, m, p, options.init_seed)?;
    if m > 0 {
        let mut step = 0;
        for _ in 0..options.passes.max(1) {
            for x in points.chunks_exact(m) {
                let gamma = options.learning_rate(step, n);
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::InvalidLearningRate { gamma, step });
                }
                let (c, _) = nearest(&SquaredEuclidean, &centroids, m, x);
                for (ck, xk) in centroids[c * m..(c + 1) * m].iter_mut().zip(x) {
                    *ck -= gamma * (*ck - xk);
                }
                step += 1;
            }
        }
    }
    let rows = if m == 0 { vec![Vec::new()] } else { centroids.chunks_exact(m).map(<[f64]>::to_vec).collect() };
    Codebook::new(rows, t2.clone(), Method::Clvq, options.init_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::MapKind;

    #[test]
    fn constant_stream_contracts() {
        let t2 = T2Map::new(MapKind::Scale, vec![1.0, 1.0]).unwrap();
        // first point seeds the centroid; the rest pull it toward x0
        let mut samples = vec![vec![5.0, -5.0]];
        samples.extend(std::iter::repeat(vec![1.0, 2.0]).take(50));
        let opts = ClvqOptions { gamma0: 0.3, schedule_a: Some(1e9), ..ClvqOptions::default() };
        let mut last = f64::INFINITY;
        for len in 2..samples.len() {
            let book = clvq(&samples[..len], &t2, 1, &opts).unwrap();
            let c = book.centroid(0);
            let d = ((c[0] - 1.0).powi(2) + (c[1] - 2.0).powi(2)).sqrt();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn unit_rate_jumps_to_sample() {
        let t2 = T2Map::new(MapKind::Scale, vec![1.0]).unwrap();
        let samples = vec![vec![0.0], vec![3.0]];
        let opts = ClvqOptions { gamma0: 1.0, schedule_a: Some(1e300), ..ClvqOptions::default() };
        // seeded at either point; after the stream the centroid sits on the last sample
        let book = clvq(&samples, &t2, 1, &opts).unwrap();
        assert_eq!(book.centroid(0), &[3.0]);
    }

    #[test]
    fn rejects_bad_learning_rate() {
        let t2 = T2Map::new(MapKind::Scale, vec![1.0]).unwrap();
        let samples = vec![vec![0.0], vec![1.0]];
        for gamma0 in [0.0, 1.5, f64::NAN] {
            let opts = ClvqOptions { gamma0, ..ClvqOptions::default() };
            assert!(matches!(clvq(&samples, &t2, 1, &opts), Err(Error::InvalidLearningRate { step: 0, .. })));
        }
    }
}
