use super::{Codebook, Divergence, SquaredEuclidean};
use crate::error::{Error, Result};

/// Empirical distortion of a codebook over a latent sample, measured in the
/// quantization space.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub total: f64,
    /// Mean distortion inside each cell, 0 for empty cells.
    pub per_cell: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub counts: Vec<usize>,
    pub n_s: usize,
}

/// Distortion of the nearest-centroid (Voronoi) partition.
pub fn empirical_distortion(codebook: &Codebook, samples: &[Vec<f64>]) -> Result<DistortionReport> {
    let labels = samples.iter().map(|xi| codebook.assign(xi)).collect::<Result<Vec<_>>>()?;
    labelled_distortion(codebook, samples, &labels)
}

/// Distortion of an arbitrary labelling of the samples onto the codebook's centroids.
pub fn labelled_distortion(codebook: &Codebook, samples: &[Vec<f64>], labels: &[usize]) -> Result<DistortionReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    crate::error::check_len(samples.len(), labels.len())?;
    let p = codebook.len();
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (xi, &label) in samples.iter().zip(labels) {
        if label >= p {
            return Err(Error::InvalidCodebook(format!("label {label} out of range")));
        }
        let eta = codebook.t2().to_quantization_space(xi)?;
        sums[label] += SquaredEuclidean.divergence(codebook.centroid(label), &eta);
        counts[label] += 1;
    }
    let n_s = samples.len();
    let per_cell = sums.iter().zip(&counts).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let frequencies = counts.iter().map(|&c| c as f64 / n_s as f64).collect();
    Ok(DistortionReport { total: sums.iter().sum::<f64>() / n_s as f64, per_cell, frequencies, counts, n_s })
}
