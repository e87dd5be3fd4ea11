//! Fixed-rate vector quantization of the latent Gaussian coordinates.
//!
//! Latent vectors `ξ ∈ ℝ^m` are mapped into a quantization space by the
//! inverse transport `T₂⁻¹` ([`T2Map`]), where centroids live and distortion
//! is measured. Codebooks come from Lloyd iterations ([`kmeans`]), online
//! competitive learning ([`clvq`]) or deterministic hypercube grids
//! ([`grid_codebook`]).

mod clvq;
mod distortion;
mod grid;
mod io;
mod kmeans;

use serde::{Deserialize, Serialize};

pub use clvq::{clvq, ClvqOptions};
pub use distortion::{empirical_distortion, labelled_distortion, DistortionReport};
pub use grid::{grid_codebook, grid_parameter, MAX_GRID_DIM};
pub use kmeans::{kmeans, KMeansFit, KMeansOptions};

use crate::error::{check_len, Error, Result};
use crate::field::{transport, KlBasis};
use crate::rng::{normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// `T₂⁻¹(χ) = Λ^{1/2} χ`
    Scale,
    /// `T₂⁻¹(χ) = Λ^{1/2} F(χ)` with `F` the standard normal CDF.
    ScaledCdf,
}

impl std::str::FromStr for MapKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "scale" => Ok(Self::Scale),
            "cdf" | "scaled_cdf" | "scaled-cdf" => Ok(Self::ScaledCdf),
            other => Err(format!("unknown map `{other}`")),
        }
    }
}

/// Map between latent coordinates and the quantization space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Map {
    kind: MapKind,
    lambdas: Vec<f64>,
}

impl T2Map {
    pub fn new(kind: MapKind, lambdas: Vec<f64>) -> Result<Self> {
        if let Some((i, &l)) = lambdas.iter().enumerate().find(|(_, &l)| !(l > 0.0 && l.is_finite())) {
            return Err(Error::DegenerateMode { index: i, value: l });
        }
        Ok(Self { kind, lambdas })
    }

    /// Map built on the first `m` eigenvalues of a basis.
    pub fn from_basis(kind: MapKind, basis: &KlBasis, m: usize) -> Result<Self> {
        if m > basis.n_kl() {
            return Err(Error::ModeCountOutOfRange { m, n_kl: basis.n_kl() });
        }
        Self::new(kind, basis.eigenvalues()[..m].to_vec())
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// `T₂⁻¹`: latent coordinates to quantization space.
    pub fn to_quantization_space(&self, chi: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), chi.len())?;
        if let Some(i) = chi.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidLatent(i));
        }
        Ok(self.map_unchecked(chi))
    }

    fn map_unchecked(&self, chi: &[f64]) -> Vec<f64> {
        match self.kind {
            MapKind::Scale => chi.iter().zip(&self.lambdas).map(|(x, l)| l.sqrt() * x).collect(),
            MapKind::ScaledCdf => chi
                .iter()
                .zip(&self.lambdas)
                .map(|(&x, &l)| {
                    let top = l.sqrt();
                    // keep the image inside the open box (0, √λ) despite rounding
                    let y = top * normal_cdf(x).max(f64::MIN_POSITIVE);
                    if y >= top {
                        top.next_down()
                    } else {
                        y
                    }
                })
                .collect(),
        }
    }

    /// `T₂`: quantization space back to latent coordinates.
    pub fn to_latent(&self, eta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), eta.len())?;
        eta.iter()
            .zip(&self.lambdas)
            .enumerate()
            .map(|(i, (&y, &l))| {
                let top = l.sqrt();
                match self.kind {
                    MapKind::Scale if y.is_finite() => Ok(y / top),
                    MapKind::ScaledCdf if y > 0.0 && y < top => Ok(normal_quantile(y / top)),
                    _ => Err(Error::OutsideMapRange { index: i, value: y }),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KMeans,
    Clvq,
    Grid,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kmeans" | "k_means" => Ok(Self::KMeans),
            "clvq" => Ok(Self::Clvq),
            "grid" => Ok(Self::Grid),
            other => Err(format!("unknown quantizer method `{other}`")),
        }
    }
}

/// Pluggable divergence between two points of the quantization space.
pub trait Divergence {
    fn divergence(&self, x: &[f64], y: &[f64]) -> f64;
}

/// `‖x - y‖²`, the Bregman divergence generated by `φ = ‖·‖²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredEuclidean;

impl Divergence for SquaredEuclidean {
    #[inline]
    fn divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Index of the nearest row of `points` (flat, `dim` columns); smallest index wins ties.
pub(crate) fn nearest<D: Divergence>(d: &D, points: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    if dim == 0 {
        return (0, 0.0);
    }
    let mut best = (0, f64::INFINITY);
    for (p, c) in points.chunks_exact(dim).enumerate() {
        let dist = d.divergence(c, x);
        if dist < best.1 {
            best = (p, dist);
        }
    }
    best
}

/// Codebook of `P` centroids in the quantization space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// Row-major `P × m`.
    centroids: Vec<f64>,
    /// Points compared against during assignment: the centroids themselves,
    /// or their latent pre-images for grid codebooks.
    assignment_points: Vec<f64>,
    p: usize,
    t2: T2Map,
    method: Method,
    seed: u64,
}

impl Codebook {
    /// Validates the centroids: at least one, the right length, finite and
    /// pairwise distinct.
    pub fn new(centroids: Vec<Vec<f64>>, t2: T2Map, method: Method, seed: u64) -> Result<Self> {
        let m = t2.dim();
        let p = centroids.len();
        if p == 0 {
            return Err(Error::InvalidCodebook("a codebook needs at least one centroid".into()));
        }
        for c in &centroids {
            check_len(m, c.len())?;
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidCodebook("non-finite centroid".into()));
            }
        }
        let flat: Vec<f64> = centroids.into_iter().flatten().collect();
        if m > 0 || p > 1 {
            for i in 0..p {
                for j in 0..i {
                    if SquaredEuclidean.divergence(&flat[i * m..(i + 1) * m], &flat[j * m..(j + 1) * m]) == 0.0 {
                        return Err(Error::InvalidCodebook(format!("centroids {j} and {i} coincide")));
                    }
                }
            }
        }
        let assignment_points = match method {
            Method::Grid => flat
                .chunks_exact(m.max(1))
                .take(p)
                .map(|c| if m == 0 { Ok(Vec::new()) } else { t2.to_latent(c) })
                .collect::<Result<Vec<_>>>()?
                .concat(),
            _ => flat.clone(),
        };
        Ok(Self { centroids: flat, assignment_points, p, t2, method, seed })
    }

    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    pub fn dim(&self) -> usize {
        self.t2.dim()
    }

    pub fn t2(&self) -> &T2Map {
        &self.t2
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centroid(&self, p: usize) -> &[f64] {
        let m = self.dim();
        &self.centroids[p * m..(p + 1) * m]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.p).map(move |p| self.centroid(p))
    }

    /// Euclidean norm of centroid `p` in the quantization space.
    pub fn centroid_norm(&self, p: usize) -> f64 {
        self.centroid(p).iter().fold(0.0, |a, x| a + x * x).sqrt()
    }

    /// Nearest cell of a latent vector. k-means and CLVQ codebooks compare in
    /// the quantization space; grid codebooks compare latent vectors directly.
    pub fn assign(&self, xi: &[f64]) -> Result<usize> {
        self.assign_with(&SquaredEuclidean, xi)
    }

    pub fn assign_with<D: Divergence>(&self, d: &D, xi: &[f64]) -> Result<usize> {
        check_len(self.dim(), xi.len())?;
        if let Some(i) = xi.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidLatent(i));
        }
        let point = match self.method {
            Method::Grid => xi.to_vec(),
            _ => self.t2.map_unchecked(xi),
        };
        Ok(nearest(d, &self.assignment_points, self.dim(), &point).0)
    }

    /// Coefficient `exp(lift(T₂(η̂_p)))` of centroid `p` at the mesh nodes.
    pub fn centroid_coefficient(&self, p: usize, basis: &KlBasis) -> Result<Vec<f64>> {
        if p >= self.p {
            return Err(Error::InvalidCodebook(format!("no centroid {p} in a codebook of {}", self.p)));
        }
        let chi = self.t2.to_latent(self.centroid(p))?;
        transport(&basis.lift(&chi)?)
    }
}
