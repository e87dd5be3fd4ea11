//! Lloyd iterations with minmax seeding.

use super::{nearest, Codebook, Divergence, Method, SquaredEuclidean, T2Map};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub init_seed: u64,
    pub max_iter: usize,
    /// Stop once the relative distortion decrease falls below this value.
    pub rel_tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { init_seed: 0, max_iter: 200, rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Distortion of the Voronoi partition at each iteration, before the
    /// centroid update.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// True when the partition stopped changing.
    pub stable: bool,
}

/// Fits `p` centroids to the mapped sample `T₂⁻¹(ξ_s)`.
pub fn kmeans(samples: &[Vec<f64>], t2: &T2Map, p: usize, options: &KMeansOptions) -> Result<KMeansFit> {
    let m = t2.dim();
    let points = map_samples(samples, t2)?;
    let n = samples.len();
    if p == 0 {
        return Err(Error::InvalidCodebook("k-means needs at least one centroid".into()));
    }
    if n < p {
        return Err(Error::InsufficientSamples { available: n, requested: p });
    }
    let mut centroids = minmax_seeds(&points, m, p, options.init_seed)?;
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut stable = false;
    let mut iterations = 0;

    while iterations < options.max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for (s, x) in points.chunks_exact(m.max(1)).enumerate().take(n) {
            let (label, d) = if m == 0 { (0, 0.0) } else { nearest(&SquaredEuclidean, &centroids, m, x) };
            changed |= labels[s] != label;
            labels[s] = label;
            dists[s] = d;
        }
        let distortion = dists.iter().sum::<f64>() / n as f64;
        let previous = history.last().copied();
        history.push(distortion);
        if !changed {
            stable = true;
            break;
        }
        update_means(&points, m, &labels, &mut centroids, &mut dists);
        if let Some(prev) = previous {
            if distortion == 0.0 || (prev - distortion) <= options.rel_tol * prev {
                break;
            }
        }
    }
    if !stable {
        // leave the codebook at the conditional means of its last partition
        update_means(&points, m, &labels, &mut centroids, &mut dists);
    }
    let codebook = Codebook::new(
        centroids.chunks_exact(m.max(1)).take(p).map(|c| c[..m].to_vec()).collect(),
        t2.clone(),
        Method::KMeans,
        options.init_seed,
    )?;
    Ok(KMeansFit { codebook, history, iterations, stable })
}

pub(crate) fn map_samples(samples: &[Vec<f64>], t2: &T2Map) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut points = Vec::with_capacity(samples.len() * t2.dim());
    for xi in samples {
        points.extend(t2.to_quantization_space(xi)?);
    }
    Ok(points)
}

/// First seed drawn at random, each next one the point farthest from the
/// seeds chosen so far.
pub(crate) fn minmax_seeds(points: &[f64], m: usize, p: usize, seed: u64) -> Result<Vec<f64>> {
    let n = if m == 0 { usize::MAX } else { points.len() / m };
    if m == 0 {
        return if p == 1 { Ok(Vec::new()) } else { Err(Error::InsufficientSamples { available: 1, requested: p }) };
    }
    let first = Stream::new(seed, u64::MAX).below(n);
    let mut centroids = points[first * m..(first + 1) * m].to_vec();
    let mut min_dist: Vec<f64> = points.chunks_exact(m).map(|x| SquaredEuclidean.divergence(x, &centroids)).collect();
    for _ in 1..p {
        let (far, &d) =
            min_dist
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(d > 0.0) {
            return Err(Error::InsufficientSamples { available: centroids.len() / m, requested: p });
        }
        let c = &points[far * m..(far + 1) * m];
        centroids.extend_from_slice(c);
        for (md, x) in min_dist.iter_mut().zip(points.chunks_exact(m)) {
            *md = md.min(SquaredEuclidean.divergence(x, c));
        }
    }
    Ok(centroids)
}

/// Moves every centroid to the mean of its cell. An empty cell takes the
/// point farthest from its current centroid, which is then excluded from
/// further repairs.
fn update_means(points: &[f64], m: usize, labels: &[usize], centroids: &mut [f64], dists: &mut [f64]) {
    if m == 0 {
        return;
    }
    let p = centroids.len() / m;
    let mut sums = vec![0.0; p * m];
    let mut counts = vec![0usize; p];
    for (x, &l) in points.chunks_exact(m).zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * m..(l + 1) * m].iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..p {
        if counts[c] > 0 {
            for k in 0..m {
                centroids[c * m + k] = sums[c * m + k] / counts[c] as f64;
            }
        }
    }
    for c in (0..p).filter(|&c| counts[c] == 0) {
        let far = dists
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
            .0;
        log::debug!("k-means: repairing empty cell {c} with sample {far}");
        centroids[c * m..(c + 1) * m].copy_from_slice(&points[far * m..(far + 1) * m]);
        dists[far] = f64::NEG_INFINITY;
    }
}
