//! Log-normal random coefficient `κ = exp(G)` built from a truncated
//! Karhunen-Loève expansion of a zero-mean Gaussian field `G`.
//!
//! The covariance operator is discretized on the mesh nodes with the lumped
//! (diagonal) P1 mass matrix `M`: with `C` the node-to-node kernel matrix, the
//! symmetric matrix `M^{1/2} C M^{1/2}` is decomposed densely and its
//! eigenvectors are mapped back through `M^{-1/2}`, which makes the nodal
//! modes orthonormal in the discrete `L²(Ω)` inner product `⟨u, v⟩ = uᵀ M v`.

mod io;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fem::TriMesh;
use crate::rng;

/// Modes with `λ_k < DEGENERATE_RATIO · λ_1` are dropped from the basis.
pub const DEGENERATE_RATIO: f64 = 1e-12;

/// Squared exponential covariance `σ² exp(-|x - x'|² / ℓ²)`.
///
/// An infinite correlation length gives the constant (rank-one) kernel `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceKernel {
    variance: f64,
    correlation_length: f64,
}

impl CovarianceKernel {
    pub fn new(variance: f64, correlation_length: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidKernel(format!("variance must be positive, got {variance}")));
        }
        if !(correlation_length > 0.0) {
            return Err(Error::InvalidKernel(format!("correlation length must be positive, got {correlation_length}")));
        }
        Ok(Self { variance, correlation_length })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn correlation_length(&self) -> f64 {
        self.correlation_length
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        let ell = self.correlation_length;
        self.variance * (-d2 / (ell * ell)).exp()
    }
}

/// Dominant eigenpairs of the discretized covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBasis {
    kernel: CovarianceKernel,
    eigenvalues: Vec<f64>,
    /// Row-major `n_kl × n_nodes`.
    modes: Vec<f64>,
    mass: Vec<f64>,
    total_variance: f64,
    mesh_hash: String,
}

/// One sampled realization of the latent field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub xi: Vec<f64>,
    pub nodal_log_values: Vec<f64>,
    pub seed_index: u64,
}

impl KlBasis {
    /// Computes the `n_kl` dominant modes. Fewer are returned when the
    /// spectrum has fewer than `n_kl` nondegenerate eigenvalues.
    pub fn build(kernel: &CovarianceKernel, mesh: &TriMesh, n_kl: usize) -> Result<Self> {
        let n = mesh.n_nodes();
        if n_kl > n {
            return Err(Error::RankExceedsDofs { requested: n_kl, available: n });
        }
        let mass = mesh.lumped_mass();
        let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
        let nodes = mesh.nodes();
        let w = Mat::<f64>::from_fn(n, n, |i, j| sqrt_mass[i] * kernel.eval(nodes[i], nodes[j]) * sqrt_mass[j]);
        let eig = w.self_adjoint_eigen(Side::Lower).map_err(|e| Error::KlEigensolveFailed(format!("{e:?}")))?;
        let (s, u) = (eig.S(), eig.U());

        // faer returns eigenvalues in nondecreasing order
        let top = if n == 0 { 0.0 } else { s[n - 1] };
        if !top.is_finite() {
            return Err(Error::KlEigensolveFailed("non-finite eigenvalue".into()));
        }
        let mut eigenvalues = Vec::with_capacity(n_kl);
        let mut modes = Vec::with_capacity(n_kl * n);
        for k in 0..n_kl {
            let col = n - 1 - k;
            let lambda = s[col];
            if !(lambda >= DEGENERATE_RATIO * top) || lambda <= 0.0 {
                break;
            }
            let mut phi: Vec<f64> = (0..n).map(|i| u[(i, col)] / sqrt_mass[i]).collect();
            canonical_sign(&mut phi);
            eigenvalues.push(lambda);
            modes.extend(phi);
        }
        let total_variance = kernel.variance() * mass.iter().sum::<f64>();
        log::debug!("KL basis: {} of {} requested modes on {} nodes", eigenvalues.len(), n_kl, n);
        Ok(Self { kernel: *kernel, eigenvalues, modes, mass, total_variance, mesh_hash: mesh.content_hash() })
    }

    pub(crate) fn from_parts(
        kernel: CovarianceKernel,
        eigenvalues: Vec<f64>,
        modes: Vec<f64>,
        mass: Vec<f64>,
        total_variance: f64,
        mesh_hash: String,
    ) -> Result<Self> {
        check_len(eigenvalues.len() * mass.len(), modes.len())?;
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) || eigenvalues.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidFormat("eigenvalues must be nonnegative and nonincreasing".into()));
        }
        Ok(Self { kernel, eigenvalues, modes, mass, total_variance, mesh_hash })
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn n_kl(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Nodal values of mode `k` (0-based).
    pub fn mode(&self, k: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.modes[k * n..(k + 1) * n]
    }

    /// Diagonal of the lumped mass matrix.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Integral of the pointwise variance over the domain, `σ² |Ω|`.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn mesh_hash(&self) -> &str {
        &self.mesh_hash
    }

    /// Discrete `L²(Ω)` inner product.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    fn check_modes(&self, m: usize) -> Result<()> {
        if m > self.n_kl() {
            Err(Error::ModeCountOutOfRange { m, n_kl: self.n_kl() })
        } else {
            Ok(())
        }
    }

    /// Variance left out by keeping the first `m` modes.
    pub fn truncation_error(&self, m: usize) -> Result<f64> {
        self.check_modes(m)?;
        let kept = self.eigenvalues[..m].iter().fold(0.0, |a, l| a + l);
        Ok((self.total_variance - kept).max(0.0))
    }

    /// Fraction of the total variance captured by the first `m` modes.
    pub fn relative_energy(&self, m: usize) -> Result<f64> {
        self.check_modes(m)?;
        Ok(self.eigenvalues[..m].iter().fold(0.0, |a, l| a + l) / self.total_variance)
    }

    /// Latent coordinates `ξ_k = λ_k^{-1/2} ⟨Φ_k, h⟩` of a nodal field.
    pub fn project(&self, m: usize, nodal: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(m)?;
        check_len(self.n_nodes(), nodal.len())?;
        let cutoff = DEGENERATE_RATIO * self.eigenvalues.first().copied().unwrap_or(0.0);
        (0..m)
            .map(|k| {
                let lambda = self.eigenvalues[k];
                if !(lambda > cutoff) || lambda <= 0.0 {
                    return Err(Error::DegenerateMode { index: k, value: lambda });
                }
                Ok(self.inner(self.mode(k), nodal) / lambda.sqrt())
            })
            .collect()
    }

    /// Nodal field `Σ_k λ_k^{1/2} ξ_k Φ_k`.
    pub fn lift(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(xi.len())?;
        let mut out = vec![0.0; self.n_nodes()];
        for (k, &x) in xi.iter().enumerate() {
            let w = self.eigenvalues[k].sqrt() * x;
            for (o, &phi) in out.iter_mut().zip(self.mode(k)) {
                *o += w * phi;
            }
        }
        Ok(out)
    }

    /// Draws `ξ ~ N(0, I_m)` from stream `(seed, index)` and lifts it.
    pub fn sample_realization(&self, m: usize, seed: u64, index: u64) -> Result<FieldRealization> {
        self.check_modes(m)?;
        let xi = rng::standard_normals(seed, index, m);
        let nodal_log_values = self.lift(&xi)?;
        Ok(FieldRealization { xi, nodal_log_values, seed_index: index })
    }

    /// Truncated covariance `Σ_{k<m} λ_k Φ_k(i) Φ_k(j)` between two nodes.
    pub fn truncated_covariance(&self, m: usize, i: usize, j: usize) -> Result<f64> {
        self.check_modes(m)?;
        Ok((0..m).map(|k| self.eigenvalues[k] * self.mode(k)[i] * self.mode(k)[j]).sum())
    }
}

/// Flips the sign so that the entry of largest magnitude is positive.
fn canonical_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The transport `κ = exp(G)` applied nodewise.
pub fn transport(nodal_log_values: &[f64]) -> Result<Vec<f64>> {
    nodal_log_values
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let k = g.exp();
            if k.is_finite() && k > 0.0 {
                Ok(k)
            } else {
                Err(Error::CoefficientOverflow(i))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(r: usize, ell: f64, n_kl: usize) -> KlBasis {
        let mesh = TriMesh::structured(r).unwrap();
        KlBasis::build(&CovarianceKernel::new(1.0, ell).unwrap(), &mesh, n_kl).unwrap()
    }

    #[test]
    fn kernel_validation_and_values() {
        assert!(CovarianceKernel::new(0.0, 0.1).is_err());
        assert!(CovarianceKernel::new(1.0, -1.0).is_err());
        assert!(CovarianceKernel::new(1.0, f64::NAN).is_err());
        let k = CovarianceKernel::new(2.0, 0.1).unwrap();
        assert_eq!(k.eval([0.3, 0.4], [0.3, 0.4]), 2.0);
        let v = k.eval([0.0, 0.0], [0.1, 0.0]);
        assert!((v - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(v, k.eval([0.1, 0.0], [0.0, 0.0]));
    }

    #[test]
    fn constant_kernel_has_rank_one() {
        let mesh = TriMesh::structured(6).unwrap();
        let kernel = CovarianceKernel::new(2.5, f64::INFINITY).unwrap();
        let b = KlBasis::build(&kernel, &mesh, 5).unwrap();
        assert_eq!(b.n_kl(), 1);
        assert!((b.eigenvalues()[0] - 2.5).abs() < 1e-12);
        let phi = b.mode(0);
        assert!(phi.iter().all(|&p| (p - 1.0).abs() < 1e-10));
        assert!((b.inner(phi, phi) - 1.0).abs() < 1e-12);
        assert!(b.truncation_error(1).unwrap() < 1e-12);
    }

    #[test]
    fn rank_exceeds_dofs() {
        let mesh = TriMesh::structured(2).unwrap();
        let k = CovarianceKernel::new(1.0, 0.3).unwrap();
        assert!(matches!(KlBasis::build(&k, &mesh, 10), Err(Error::RankExceedsDofs { requested: 10, available: 9 })));
    }

    #[test]
    fn orthonormal_and_ordered() {
        let b = basis(8, 0.3, 12);
        assert_eq!(b.n_kl(), 12);
        assert!(b.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        for k in 0..b.n_kl() {
            for l in 0..b.n_kl() {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((b.inner(b.mode(k), b.mode(l)) - want).abs() < 1e-10);
            }
        }
        assert!(b.eigenvalues().iter().sum::<f64>() <= b.total_variance());
    }

    #[test]
    fn truncation_error_bounds() {
        let b = basis(6, 0.2, 10);
        assert_eq!(b.truncation_error(0).unwrap(), b.total_variance());
        assert!(matches!(b.truncation_error(11), Err(Error::ModeCountOutOfRange { m: 11, n_kl: 10 })));
        let errs: Vec<f64> = (0..=10).map(|m| b.truncation_error(m).unwrap()).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]));
        assert!(errs[10] <= b.total_variance());
        assert!((b.relative_energy(10).unwrap() + errs[10] / b.total_variance() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn project_and_lift_examples() {
        let b = basis(6, 0.2, 6);
        let l1 = b.eigenvalues()[0].sqrt();
        let h: Vec<f64> = b.mode(0).iter().map(|p| l1 * p).collect();
        let xi = b.project(4, &h).unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-10);
        assert!(xi[1..].iter().all(|x| x.abs() < 1e-10));
        assert!(b.project(4, &vec![0.0; b.n_nodes()]).unwrap().iter().all(|&x| x == 0.0));
        assert!(b.lift(&[0.0; 3]).unwrap().iter().all(|&x| x == 0.0));
        let e1 = b.lift(&[1.0]).unwrap();
        assert!(e1.iter().zip(&h).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(matches!(b.lift(&[0.0; 7]), Err(Error::ModeCountOutOfRange { .. })));
    }

    #[test]
    fn degenerate_mode_is_rejected() {
        let b = basis(4, 0.3, 3);
        let mut eig = b.eigenvalues().to_vec();
        eig[2] = 0.0;
        let broken = KlBasis::from_parts(
            *b.kernel(),
            eig,
            b.modes.clone(),
            b.mass.clone(),
            b.total_variance,
            b.mesh_hash.clone(),
        )
        .unwrap();
        assert!(matches!(broken.project(3, &vec![1.0; b.n_nodes()]), Err(Error::DegenerateMode { index: 2, .. })));
        assert!(broken.project(2, &vec![1.0; b.n_nodes()]).is_ok());
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = basis(5, 0.3, 6);
        let r1 = b.sample_realization(6, 11, 42).unwrap();
        let r2 = b.sample_realization(6, 11, 42).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.nodal_log_values, b.lift(&r1.xi).unwrap());
        assert_ne!(r1.xi, b.sample_realization(6, 11, 43).unwrap().xi);
    }

    #[test]
    fn transport_examples() {
        assert_eq!(transport(&[0.0]).unwrap(), vec![1.0]);
        assert!((transport(&[2f64.ln()]).unwrap()[0] - 2.0).abs() < 1e-15);
        assert!(matches!(transport(&[0.0, 1e3]), Err(Error::CoefficientOverflow(1))));
        let b = basis(4, 0.3, 3);
        assert!(transport(&b.lift(&[0.0; 3]).unwrap()).unwrap().iter().all(|&k| k == 1.0));
    }
}
