//! Deterministic grid codebooks: the origin plus the `2^m` vertices of the
//! centered hypercube `{-s, +s}^m`, with `s = 2 F⁻¹(2/3)` so that for `m = 1`
//! each of the three cells carries probability 1/3.

use super::{Codebook, Method, T2Map};
use crate::error::{Error, Result};
use crate::rng::normal_quantile;

pub const MAX_GRID_DIM: usize = 20;

/// Half side of the hypercube, `2 F⁻¹(2/3) ≈ 0.8614`.
pub fn grid_parameter() -> f64 {
    2.0 * normal_quantile(2.0 / 3.0)
}

/// Centroid 0 is `T₂⁻¹(0)`; centroid `1 + v` is the vertex whose component
/// `k` is `+s` when bit `k` of `v` is set and `-s` otherwise.
pub fn grid_codebook(t2: &T2Map) -> Result<Codebook> {
    let m = t2.dim();
    if m > MAX_GRID_DIM {
        return Err(Error::InvalidConfig(format!("grid dimension {m} exceeds {MAX_GRID_DIM}")));
    }
    let s = grid_parameter();
    let mut latent = vec![vec![0.0; m]];
    for v in 0..(1usize << m) * usize::from(m > 0) {
        latent.push((0..m).map(|k| if (v >> k) & 1 == 1 { s } else { -s }).collect());
    }
    let centroids = latent.iter().map(|xi| t2.to_quantization_space(xi)).collect::<Result<Vec<_>>>()?;
    Codebook::new(centroids, t2.clone(), Method::Grid, 0)
}
