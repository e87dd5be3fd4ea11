//! Monte Carlo campaigns: sampling, assignment, preconditioner caching,
//! batched solves and the statistics derived from them.

mod output;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Assembler, TriMesh};
use crate::field::{transport, CovarianceKernel, KlBasis};
use crate::quantizer::{
    clvq, empirical_distortion, grid_codebook, kmeans, ClvqOptions, Codebook, KMeansOptions, MapKind, Method, T2Map,
    MAX_GRID_DIM,
};
use crate::rng::standard_normals;
use crate::solver::{pcg, Preconditioner, PreconditionerKind};

pub use output::{
    read_per_centroid, write_campaign, write_frequencies, write_ideal_sweep, FREQUENCIES_CSV, IDEAL_SWEEP_CSV,
    PER_CENTROID_CSV, REALIZATIONS_CSV, SUMMARY_JSON,
};

/// How the codebook of a campaign is obtained when none is loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSpec {
    pub method: Method,
    /// Number of centroids. Grid codebooks always have `2^m + 1`.
    #[serde(rename = "P")]
    pub p: usize,
    pub map: MapKind,
    /// Training sample size for k-means and CLVQ.
    pub n_train: usize,
    /// Seed of the training sample and of the minmax initialization.
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub gamma0: f64,
    pub schedule_a: Option<f64>,
    pub passes: usize,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self {
            method: Method::KMeans,
            p: 10,
            map: MapKind::Scale,
            n_train: 10_000,
            seed: 1,
            max_iter: 200,
            rel_tol: 1e-6,
            gamma0: 0.5,
            schedule_a: None,
            passes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Cells per side of the structured mesh.
    pub resolution: usize,
    pub variance: f64,
    /// `null` selects the constant (fully correlated) kernel.
    pub correlation_length: Option<f64>,
    pub n_kl: usize,
    /// KL modes seen by the quantizer.
    pub m: usize,
    pub quantizer: QuantizerSpec,
    pub preconditioner: PreconditionerKind,
    pub eps: f64,
    pub max_iter: usize,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    /// Precomputed `.klb` basis; built from the kernel when absent.
    pub basis: Option<PathBuf>,
    /// Precomputed `.qnt` codebook; trained from `quantizer` when absent.
    pub codebook: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            resolution: 32,
            variance: 1.0,
            correlation_length: Some(0.1),
            n_kl: 64,
            m: 8,
            quantizer: QuantizerSpec::default(),
            preconditioner: PreconditionerKind::Amg,
            eps: 1e-6,
            max_iter: 5000,
            n_realizations: 100,
            master_seed: 0,
            workers: 1,
            output_dir: None,
            basis: None,
            codebook: None,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m > self.n_kl {
            return bad(format!("m = {} exceeds n_kl = {}", self.m, self.n_kl));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} is not in (0, 1)", self.eps));
        }
        if self.n_realizations == 0 {
            return bad("n_realizations must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        let q = &self.quantizer;
        if q.method == Method::Grid {
            if self.m > MAX_GRID_DIM {
                return bad(format!("grid codebooks support m <= {MAX_GRID_DIM}"));
            }
            if q.p != grid_size(self.m) {
                return bad(format!("a grid codebook at m = {} has P = {}, not {}", self.m, grid_size(self.m), q.p));
            }
        } else if q.p == 0 {
            return bad("P must be at least 1".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<CovarianceKernel> {
        CovarianceKernel::new(self.variance, self.correlation_length.unwrap_or(f64::INFINITY))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", self.workers)))
    }
}

/// Number of centroids of the grid codebook in dimension `m`.
pub fn grid_size(m: usize) -> usize {
    if m == 0 {
        1
    } else {
        (1 << m) + 1
    }
}

/// Trains or builds the codebook described by `spec` on `m` modes of `basis`.
pub fn train_codebook(spec: &QuantizerSpec, basis: &KlBasis, m: usize) -> Result<Codebook> {
    let t2 = T2Map::from_basis(spec.map, basis, m)?;
    if spec.method == Method::Grid {
        return grid_codebook(&t2);
    }
    let samples: Vec<Vec<f64>> = (0..spec.n_train as u64).map(|i| standard_normals(spec.seed, i, m)).collect();
    match spec.method {
        Method::KMeans => {
            let options = KMeansOptions { init_seed: spec.seed, max_iter: spec.max_iter, rel_tol: spec.rel_tol };
            let fit = kmeans(&samples, &t2, spec.p, &options)?;
            log::info!(
                "k-means: P = {}, {} iterations, distortion {:e}",
                spec.p,
                fit.iterations,
                fit.history.last().copied().unwrap_or(0.0)
            );
            Ok(fit.codebook)
        }
        Method::Clvq => {
            let options = ClvqOptions {
                init_seed: spec.seed,
                gamma0: spec.gamma0,
                schedule_a: spec.schedule_a,
                passes: spec.passes,
            };
            let codebook = clvq(&samples, &t2, spec.p, &options)?;
            log::info!("clvq: P = {}, distortion {:e}", spec.p, empirical_distortion(&codebook, &samples)?.total);
            Ok(codebook)
        }
        Method::Grid => unreachable!(),
    }
}

/// One solved realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRecord {
    /// Stream index of the realization under the master seed.
    pub index: u64,
    /// Centroid whose preconditioner was used.
    pub p: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidStats {
    pub p: usize,
    pub centroid_norm: f64,
    /// Systems solved with this centroid's preconditioner.
    pub n_p: usize,
    /// `sum_j / n_p`; NaN for an empty cell.
    pub mean_j: f64,
    /// Cumulated iterations of the cell.
    pub sum_j: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub centroids: Vec<CentroidStats>,
    /// Sorted by realization index.
    pub records: Vec<RealizationRecord>,
    /// Mean iteration count over converged solves.
    pub mean_j: f64,
    pub total_iterations: usize,
    pub max_sum_j: usize,
    pub min_sum_j: usize,
    pub unconverged: usize,
}

impl SimulationReport {
    /// Aggregates records, which must reference centroids `0..norms.len()`.
    pub fn from_records(mut records: Vec<RealizationRecord>, norms: &[f64]) -> Self {
        records.sort_by_key(|r| r.index);
        let mut centroids: Vec<CentroidStats> = norms
            .iter()
            .enumerate()
            .map(|(p, &centroid_norm)| CentroidStats {
                p,
                centroid_norm,
                n_p: 0,
                mean_j: f64::NAN,
                sum_j: 0,
                unconverged: 0,
            })
            .collect();
        let (mut converged_iters, mut converged) = (0usize, 0usize);
        for r in &records {
            let c = &mut centroids[r.p];
            c.n_p += 1;
            c.sum_j += r.iterations;
            if r.converged {
                converged_iters += r.iterations;
                converged += 1;
            } else {
                c.unconverged += 1;
            }
        }
        for c in &mut centroids {
            if c.n_p > 0 {
                c.mean_j = c.sum_j as f64 / c.n_p as f64;
            }
        }
        let total_iterations = centroids.iter().map(|c| c.sum_j).sum();
        let unconverged = centroids.iter().map(|c| c.unconverged).sum();
        Self {
            max_sum_j: centroids.iter().map(|c| c.sum_j).max().unwrap_or(0),
            min_sum_j: centroids.iter().map(|c| c.sum_j).min().unwrap_or(0),
            mean_j: if converged > 0 { converged_iters as f64 / converged as f64 } else { f64::NAN },
            centroids,
            records,
            total_iterations,
            unconverged,
        }
    }

    pub fn n_realizations(&self) -> usize {
        self.records.len()
    }
}

/// Everything a campaign needs, prepared once.
pub struct Campaign {
    config: CampaignConfig,
    assembler: Assembler,
    basis: KlBasis,
    codebook: Codebook,
}

impl Campaign {
    /// Builds or loads the mesh, basis and codebook named by `config`.
    pub fn prepare(config: &CampaignConfig) -> Result<Self> {
        config.validate()?;
        let mesh = TriMesh::structured(config.resolution)?;
        let basis = match &config.basis {
            Some(path) => {
                let basis = KlBasis::load(path)?;
                basis.check_mesh(&mesh)?;
                if basis.n_kl() < config.n_kl {
                    return Err(Error::InvalidConfig(format!(
                        "basis holds {} modes, n_kl = {} requested",
                        basis.n_kl(),
                        config.n_kl
                    )));
                }
                basis
            }
            None => KlBasis::build(&config.kernel()?, &mesh, config.n_kl)?,
        };
        let n_kl = config.n_kl.min(basis.n_kl());
        if config.m > n_kl {
            return Err(Error::ModeCountOutOfRange { m: config.m, n_kl });
        }
        let codebook = match &config.codebook {
            Some(path) => {
                let codebook = Codebook::load(path)?;
                if codebook.dim() != config.m {
                    return Err(Error::InvalidConfig(format!(
                        "codebook has dimension {}, m = {}",
                        codebook.dim(),
                        config.m
                    )));
                }
                codebook
            }
            None => train_codebook(&config.quantizer, &basis, config.m)?,
        };
        let mut config = config.clone();
        config.n_kl = n_kl;
        if config.codebook.is_some() {
            config.quantizer.method = codebook.method();
            config.quantizer.p = codebook.len();
            config.quantizer.map = codebook.t2().kind();
            config.quantizer.seed = codebook.seed();
        }
        Ok(Self { assembler: Assembler::new(&mesh), config, basis, codebook })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn basis(&self) -> &KlBasis {
        &self.basis
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Latent vector of realization `index`: `n_kl` standard normals.
    pub fn latent(&self, index: u64) -> Vec<f64> {
        standard_normals(self.config.master_seed, index, self.config.n_kl)
    }

    /// Runs the configured campaign on realizations `0..n_realizations`.
    pub fn run(&self) -> Result<SimulationReport> {
        let latents: Vec<(u64, Vec<f64>)> =
            (0..self.config.n_realizations as u64).map(|i| (i, self.latent(i))).collect();
        self.run_latents(latents)
    }

    /// Runs a campaign on explicit `(index, ξ)` pairs, `ξ` of length `n_kl`.
    pub fn run_latents(&self, latents: Vec<(u64, Vec<f64>)>) -> Result<SimulationReport> {
        let pool = self.config.pool()?;
        pool.install(|| self.run_in_pool(latents))
    }

    fn run_in_pool(&self, latents: Vec<(u64, Vec<f64>)>) -> Result<SimulationReport> {
        let m = self.config.m;
        for (_, xi) in &latents {
            crate::error::check_len(self.config.n_kl, xi.len())?;
        }
        let labels: Vec<usize> =
            latents.par_iter().map(|(_, xi)| self.codebook.assign(&xi[..m])).collect::<Result<_>>()?;

        let preconditioners: Vec<Preconditioner> = (0..self.codebook.len())
            .into_par_iter()
            .map(|p| {
                let coefficient = self.codebook.centroid_coefficient(p, &self.basis)?;
                let system = self.assembler.assemble(&coefficient)?;
                Ok(Preconditioner::build(self.config.preconditioner, &system.a)?.with_origin(p))
            })
            .collect::<Result<_>>()?;

        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.codebook.len()];
        for (k, &p) in labels.iter().enumerate() {
            groups[p].push(k);
        }
        let solved: Vec<Vec<RealizationRecord>> = groups
            .par_iter()
            .enumerate()
            .map(|(p, members)| {
                members
                    .iter()
                    .map(|&k| {
                        let (index, xi) = &latents[k];
                        self.solve_one(*index, xi, p, &preconditioners[p])
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let norms: Vec<f64> = (0..self.codebook.len()).map(|p| self.codebook.centroid_norm(p)).collect();
        Ok(SimulationReport::from_records(solved.into_iter().flatten().collect(), &norms))
    }

    fn solve_one(&self, index: u64, xi: &[f64], p: usize, m: &Preconditioner) -> Result<RealizationRecord> {
        let coefficient = transport(&self.basis.lift(xi)?)?;
        let system = self.assembler.assemble(&coefficient)?;
        let (iterations, converged, residual) = solve_counted(&system, m, self.config.eps, self.config.max_iter)?;
        if !converged {
            log::warn!("realization {index} did not converge with preconditioner {p}");
        }
        Ok(RealizationRecord { index, p, iterations, converged, final_relative_residual: residual })
    }
}

/// PCG iteration count; a breakdown counts as an unconverged solve.
fn solve_counted(
    system: &crate::fem::LinearSystem,
    m: &Preconditioner,
    eps: f64,
    max_iter: usize,
) -> Result<(usize, bool, f64)> {
    match pcg(system, m, eps, max_iter) {
        Ok((_, record)) => Ok((record.iterations, record.converged, record.final_relative_residual)),
        Err(Error::PcgBreakdown { iteration, .. }) => Ok((iteration, false, f64::NAN)),
        Err(e) => Err(e),
    }
}

pub fn run_campaign(config: &CampaignConfig) -> Result<SimulationReport> {
    Campaign::prepare(config)?.run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub relative_energy: f64,
    /// Mean iterations over converged solves.
    pub mean_j: f64,
    pub unconverged: usize,
}

/// For each `m`, solves every realization with a preconditioner built from
/// its own coefficient truncated to `m` modes. The quantizer part of
/// `config` is ignored; all rows share the same realizations.
pub fn ideal_sweep(config: &CampaignConfig, m_list: &[usize]) -> Result<Vec<SweepRow>> {
    let mut config = config.clone();
    config.m = 0;
    config.validate_sweep()?;
    let mesh = TriMesh::structured(config.resolution)?;
    let basis = match &config.basis {
        Some(path) => {
            let basis = KlBasis::load(path)?;
            basis.check_mesh(&mesh)?;
            basis
        }
        None => KlBasis::build(&config.kernel()?, &mesh, config.n_kl)?,
    };
    let n_kl = config.n_kl.min(basis.n_kl());
    if let Some(&m) = m_list.iter().find(|&&m| m > n_kl) {
        return Err(Error::ModeCountOutOfRange { m, n_kl });
    }
    let assembler = Assembler::new(&mesh);
    let pool = config.pool()?;
    pool.install(|| {
        m_list
            .iter()
            .map(|&m| {
                let outcomes: Vec<(usize, bool)> = (0..config.n_realizations as u64)
                    .into_par_iter()
                    .map(|i| {
                        let xi = standard_normals(config.master_seed, i, n_kl);
                        let truncated = assembler.assemble(&transport(&basis.lift(&xi[..m])?)?)?;
                        let preconditioner = Preconditioner::build(config.preconditioner, &truncated.a)?;
                        let system = assembler.assemble(&transport(&basis.lift(&xi)?)?)?;
                        let (j, converged, _) = solve_counted(&system, &preconditioner, config.eps, config.max_iter)?;
                        Ok((j, converged))
                    })
                    .collect::<Result<_>>()?;
                let converged: Vec<usize> = outcomes.iter().filter(|o| o.1).map(|o| o.0).collect();
                let mean_j = if converged.is_empty() {
                    f64::NAN
                } else {
                    converged.iter().sum::<usize>() as f64 / converged.len() as f64
                };
                log::info!("ideal sweep: m = {m}, E[J] = {mean_j}");
                Ok(SweepRow {
                    m,
                    relative_energy: basis.relative_energy(m)?,
                    mean_j,
                    unconverged: outcomes.len() - converged.len(),
                })
            })
            .collect()
    })
}

impl CampaignConfig {
    fn validate_sweep(&self) -> Result<()> {
        let mut probe = self.clone();
        probe.quantizer = QuantizerSpec::default();
        probe.validate()
    }
}

/// Spread of the per-centroid workload.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadBalance {
    pub rows: Vec<CentroidStats>,
    /// `max_p sum_J - min_p sum_J`.
    pub sum_j_range: usize,
    pub sum_j_cv: f64,
    pub n_p_cv: f64,
}

/// Population coefficient of variation; zero for a zero mean.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub fn load_balance_report(report: &SimulationReport) -> LoadBalance {
    let sums: Vec<f64> = report.centroids.iter().map(|c| c.sum_j as f64).collect();
    let counts: Vec<f64> = report.centroids.iter().map(|c| c.n_p as f64).collect();
    LoadBalance {
        rows: report.centroids.clone(),
        sum_j_range: report.max_sum_j - report.min_sum_j,
        sum_j_cv: coefficient_of_variation(&sums),
        n_p_cv: coefficient_of_variation(&counts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyRow {
    pub p: usize,
    pub centroid_norm: f64,
    pub frequency: f64,
}

/// Attribution frequencies of `n_s` fresh latent draws from stream `seed`,
/// sorted by centroid norm (then index).
pub fn frequency_profile(codebook: &Codebook, n_s: usize, seed: u64) -> Result<Vec<FrequencyRow>> {
    if n_s == 0 {
        return Err(Error::EmptySample);
    }
    let labels: Vec<usize> = (0..n_s as u64)
        .into_par_iter()
        .map(|i| codebook.assign(&standard_normals(seed, i, codebook.dim())))
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; codebook.len()];
    for p in labels {
        counts[p] += 1;
    }
    let mut rows: Vec<FrequencyRow> = counts
        .iter()
        .enumerate()
        .map(|(p, &c)| FrequencyRow { p, centroid_norm: codebook.centroid_norm(p), frequency: c as f64 / n_s as f64 })
        .collect();
    rows.sort_by(|a, b| a.centroid_norm.total_cmp(&b.centroid_norm).then(a.p.cmp(&b.p)));
    Ok(rows)
}
