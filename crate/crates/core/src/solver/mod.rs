//! Preconditioned conjugate gradient and the preconditioner families built
//! from centroidal coefficients: exact sparse Cholesky, block-Jacobi and a
//! smoothed-aggregation AMG V-cycle.

pub mod amg;
pub mod block_jacobi;
pub mod cholesky;
pub mod ordering;
mod pcg;

use serde::{Deserialize, Serialize};

pub use amg::{AmgConfig, AmgHierarchy};
pub use block_jacobi::BlockJacobi;
pub use cholesky::CholeskyFactor;
pub use pcg::{pcg, pcg_observed, SolveRecord};

use crate::error::Result;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Identity,
    Cholesky,
    BlockJacobi,
    Amg,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identity" | "none" => Ok(Self::Identity),
            "cholesky" => Ok(Self::Cholesky),
            "block_jacobi" | "block-jacobi" | "bj" => Ok(Self::BlockJacobi),
            "amg" => Ok(Self::Amg),
            other => Err(format!("unknown preconditioner `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
enum Payload {
    Identity,
    Cholesky(CholeskyFactor),
    BlockJacobi(BlockJacobi),
    Amg(AmgHierarchy),
}

/// An SPD approximation of `A⁻¹`, immutable once built.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    payload: Payload,
    built_from: Option<usize>,
}

impl Preconditioner {
    pub fn identity() -> Self {
        Self { payload: Payload::Identity, built_from: None }
    }

    pub fn cholesky(a: &CsrMatrix) -> Result<Self> {
        Ok(Self { payload: Payload::Cholesky(CholeskyFactor::new(a)?), built_from: None })
    }

    pub fn block_jacobi(a: &CsrMatrix, n_blocks: usize) -> Result<Self> {
        Ok(Self { payload: Payload::BlockJacobi(BlockJacobi::new(a, n_blocks)?), built_from: None })
    }

    pub fn amg(a: &CsrMatrix) -> Result<Self> {
        Self::amg_with(a, &AmgConfig::default())
    }

    pub fn amg_with(a: &CsrMatrix, config: &AmgConfig) -> Result<Self> {
        Ok(Self { payload: Payload::Amg(AmgHierarchy::new(a, config)?), built_from: None })
    }

    /// Builds a preconditioner of the given kind with default parameters.
    pub fn build(kind: PreconditionerKind, a: &CsrMatrix) -> Result<Self> {
        match kind {
            PreconditionerKind::Identity => Ok(Self::identity()),
            PreconditionerKind::Cholesky => Self::cholesky(a),
            PreconditionerKind::BlockJacobi => Self::block_jacobi(a, block_jacobi::default_block_count(a.n_rows())),
            PreconditionerKind::Amg => Self::amg(a),
        }
    }

    /// Tags the preconditioner with the centroid it was built from.
    pub fn with_origin(mut self, p: usize) -> Self {
        self.built_from = Some(p);
        self
    }

    pub fn built_from(&self) -> Option<usize> {
        self.built_from
    }

    pub fn kind(&self) -> PreconditionerKind {
        match self.payload {
            Payload::Identity => PreconditionerKind::Identity,
            Payload::Cholesky(_) => PreconditionerKind::Cholesky,
            Payload::BlockJacobi(_) => PreconditionerKind::BlockJacobi,
            Payload::Amg(_) => PreconditionerKind::Amg,
        }
    }

    /// `z = M⁻¹ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match &self.payload {
            Payload::Identity => z.copy_from_slice(r),
            Payload::Cholesky(f) => {
                z.copy_from_slice(r);
                f.solve_in_place(z);
            }
            Payload::BlockJacobi(bj) => bj.apply(r, z),
            Payload::Amg(h) => h.apply(r, z),
        }
    }

    pub fn apply_vec(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.apply(r, &mut z);
        z
    }
}
