//! Error type shared by every module of the crate.
//!
//! Each variant carries a stable kebab-case code (see [`Error::code`]) so the
//! CLI and downstream tooling can match on failures without parsing messages.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("kl-eigensolve-failed: {0}")]
    KlEigensolveFailed(String),
    #[error("rank-exceeds-dofs: requested {requested} modes but the mesh has {available} nodes")]
    RankExceedsDofs { requested: usize, available: usize },
    #[error("mode-count-out-of-range: m = {m} but the basis holds {n_kl} modes")]
    ModeCountOutOfRange { m: usize, n_kl: usize },
    #[error("degenerate-mode: eigenvalue {index} is {value:e}")]
    DegenerateMode { index: usize, value: f64 },
    #[error("coefficient-overflow: non-finite coefficient at node {0}")]
    CoefficientOverflow(usize),
    #[error("invalid-kernel: {0}")]
    InvalidKernel(String),
    #[error("dimension-mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid-latent: non-finite component {0}")]
    InvalidLatent(usize),
    #[error("empty-sample")]
    EmptySample,
    #[error("insufficient-samples: {available} distinct samples for {requested} centroids")]
    InsufficientSamples { available: usize, requested: usize },
    #[error("invalid-learning-rate: gamma = {gamma} at step {step}")]
    InvalidLearningRate { gamma: f64, step: usize },
    #[error("invalid-codebook: {0}")]
    InvalidCodebook(String),
    #[error("outside-map-range: component {index} = {value} lies outside the image of the map")]
    OutsideMapRange { index: usize, value: f64 },

    #[error("mesh-too-coarse: resolution {0} < 2")]
    MeshTooCoarse(usize),
    #[error("invalid-mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid-coefficient: coefficient {value} at node {node} is not strictly positive")]
    InvalidCoefficient { node: usize, value: f64 },

    #[error("not-spd: nonpositive pivot {pivot:e} at row {row}")]
    NotSpd { row: usize, pivot: f64 },
    #[error("pcg-breakdown: curvature {curvature:e} at iteration {iteration}")]
    PcgBreakdown { iteration: usize, curvature: f64 },
    #[error("invalid-block-count: {blocks} blocks for dimension {n}")]
    InvalidBlockCount { blocks: usize, n: usize },

    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error("artifact-not-found: {}", .0.display())]
    ArtifactNotFound(PathBuf),
    #[error("invalid-format: {0}")]
    InvalidFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code of the failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::KlEigensolveFailed(_) => "kl-eigensolve-failed",
            Error::RankExceedsDofs { .. } => "rank-exceeds-dofs",
            Error::ModeCountOutOfRange { .. } => "mode-count-out-of-range",
            Error::DegenerateMode { .. } => "degenerate-mode",
            Error::CoefficientOverflow(_) => "coefficient-overflow",
            Error::InvalidKernel(_) => "invalid-kernel",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidLatent(_) => "invalid-latent",
            Error::EmptySample => "empty-sample",
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::InvalidLearningRate { .. } => "invalid-learning-rate",
            Error::InvalidCodebook(_) => "invalid-codebook",
            Error::OutsideMapRange { .. } => "outside-map-range",
            Error::MeshTooCoarse(_) => "mesh-too-coarse",
            Error::InvalidMesh(_) => "invalid-mesh",
            Error::InvalidCoefficient { .. } => "invalid-coefficient",
            Error::NotSpd { .. } => "not-spd",
            Error::PcgBreakdown { .. } => "pcg-breakdown",
            Error::InvalidBlockCount { .. } => "invalid-block-count",
            Error::InvalidConfig(_) => "invalid-config",
            Error::ArtifactNotFound(_) => "artifact-not-found",
            Error::InvalidFormat(_) => "invalid-format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
