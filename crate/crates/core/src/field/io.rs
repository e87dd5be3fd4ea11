//! `.klb` files: JSON header line, then float64 LE eigenvalues (`n_kl`),
//! eigenvectors row-major (`n_kl × n_nodes`) and the lumped mass diagonal
//! (`n_nodes`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CovarianceKernel, KlBasis};
use crate::error::{Error, Result};
use crate::fem::TriMesh;
use crate::format::{read_artifact, write_artifact};

const FORMAT: &str = "klb/1";

#[derive(Serialize, Deserialize)]
struct KernelHeader {
    variance: f64,
    /// `null` encodes the constant kernel (infinite correlation length).
    correlation_length: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    n_nodes: usize,
    n_kl: usize,
    total_variance: f64,
    kernel: KernelHeader,
    mesh_hash: String,
}

impl KlBasis {
    pub fn save(&self, path: &Path) -> Result<()> {
        let ell = self.kernel.correlation_length();
        let header = Header {
            format: FORMAT.into(),
            n_nodes: self.n_nodes(),
            n_kl: self.n_kl(),
            total_variance: self.total_variance,
            kernel: KernelHeader {
                variance: self.kernel.variance(),
                correlation_length: ell.is_finite().then_some(ell),
            },
            mesh_hash: self.mesh_hash.clone(),
        };
        write_artifact(path, &header, &[&self.eigenvalues, &self.modes, &self.mass])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, values): (Header, _) = read_artifact(path)?;
        if header.format != FORMAT {
            return Err(Error::InvalidFormat(format!("expected {FORMAT}, found {}", header.format)));
        }
        let (n, k) = (header.n_nodes, header.n_kl);
        let expected = k + k * n + n;
        if values.len() != expected {
            return Err(Error::InvalidFormat(format!(
                "payload holds {} values, header implies {expected}",
                values.len()
            )));
        }
        let kernel =
            CovarianceKernel::new(header.kernel.variance, header.kernel.correlation_length.unwrap_or(f64::INFINITY))?;
        let eigenvalues = values[..k].to_vec();
        let modes = values[k..k + k * n].to_vec();
        let mass = values[k + k * n..].to_vec();
        KlBasis::from_parts(kernel, eigenvalues, modes, mass, header.total_variance, header.mesh_hash)
    }

    /// Fails unless the basis was computed on `mesh`.
    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if mesh.content_hash() == self.mesh_hash {
            Ok(())
        } else {
            Err(Error::InvalidConfig("basis was computed on a different mesh".into()))
        }
    }
}
