use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vqp_core::driver::{
    self, coefficient_of_variation, frequency_profile, ideal_sweep, train_codebook, Campaign, CampaignConfig,
    FREQUENCIES_CSV, IDEAL_SWEEP_CSV, PER_CENTROID_CSV,
};
use vqp_core::fem::TriMesh;
use vqp_core::field::{CovarianceKernel, KlBasis};
use vqp_core::quantizer::{Codebook, MapKind, Method};
use vqp_core::solver::PreconditionerKind;

/// Quantized preconditioning for Monte Carlo solves of -div(k grad u) = 1.
#[derive(Parser)]
#[command(name = "vqp", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Karhunen-Loeve basis and store it as `.klb`.
    Kl(KlArgs),
    /// Train a codebook on a stored basis and store it as `.qnt`.
    Quantize(QuantizeArgs),
    /// Run a campaign and write summary.json, per_centroid.csv and realizations.csv.
    Run(RunArgs),
    /// Solve with per-realization preconditioners built from m-truncated coefficients.
    IdealSweep(SweepArgs),
    /// Load-balance statistics of a finished run, or a codebook frequency profile.
    Report(ReportArgs),
}

#[derive(Args)]
struct KlArgs {
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, default_value_t = 0.1, conflicts_with = "constant")]
    correlation_length: f64,
    /// Use the constant kernel (infinite correlation length).
    #[arg(long)]
    constant: bool,
    #[arg(long, default_value_t = 64)]
    n_kl: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    basis: PathBuf,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    quantizer: QuantizerArgs,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write attribution frequencies of this many fresh draws next to the codebook.
    #[arg(long)]
    frequencies: Option<usize>,
    #[arg(long, default_value_t = 12345)]
    frequency_seed: u64,
}

#[derive(Args, Default)]
struct QuantizerArgs {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long = "P", alias = "p")]
    p: Option<usize>,
    #[arg(long)]
    map: Option<MapKind>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    quantizer_seed: Option<u64>,
    #[arg(long)]
    kmeans_max_iter: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    schedule_a: Option<f64>,
    #[arg(long)]
    passes: Option<usize>,
}

#[derive(Args)]
struct CampaignArgs {
    /// JSON file mirroring the campaign configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long)]
    correlation_length: Option<f64>,
    #[arg(long)]
    constant: bool,
    #[arg(long)]
    n_kl: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    quantizer: QuantizerArgs,
    #[arg(long)]
    preconditioner: Option<PreconditionerKind>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    n_realizations: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Stored `.klb` basis to use instead of computing one.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Stored `.qnt` codebook to use instead of training one.
    #[arg(long)]
    codebook: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Comma-separated mode counts.
    #[arg(long, value_delimiter = ',', default_value = "0,2,4,8,16,32")]
    m_list: Vec<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of `vqp run`.
    #[arg(long, required_unless_present = "codebook")]
    run_dir: Option<PathBuf>,
    /// Codebook whose attribution frequencies to estimate.
    #[arg(long, conflicts_with = "run_dir")]
    codebook: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    n_s: usize,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Where to write frequencies.csv (defaults to the working directory).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl QuantizerArgs {
    fn apply(&self, q: &mut driver::QuantizerSpec) {
        if let Some(v) = self.method {
            q.method = v;
        }
        if let Some(v) = self.p {
            q.p = v;
        }
        if let Some(v) = self.map {
            q.map = v;
        }
        if let Some(v) = self.n_train {
            q.n_train = v;
        }
        if let Some(v) = self.quantizer_seed {
            q.seed = v;
        }
        if let Some(v) = self.kmeans_max_iter {
            q.max_iter = v;
        }
        if let Some(v) = self.rel_tol {
            q.rel_tol = v;
        }
        if let Some(v) = self.gamma0 {
            q.gamma0 = v;
        }
        if self.schedule_a.is_some() {
            q.schedule_a = self.schedule_a;
        }
        if let Some(v) = self.passes {
            q.passes = v;
        }
    }
}

impl CampaignArgs {
    fn resolve(&self) -> Result<CampaignConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => vqp_core::Error::ArtifactNotFound(path.clone()),
                    _ => e.into(),
                })?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => CampaignConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(resolution, variance, n_kl, m, preconditioner, eps, max_iter, n_realizations, master_seed, workers);
        set!(output_dir, basis, codebook);
        if self.correlation_length.is_some() {
            c.correlation_length = self.correlation_length;
        }
        if self.constant {
            c.correlation_length = None;
        }
        self.quantizer.apply(&mut c.quantizer);
        if c.quantizer.method == Method::Grid && self.quantizer.p.is_none() && c.m <= 20 {
            c.quantizer.p = driver::grid_size(c.m);
        }
        Ok(c)
    }
}

fn output_dir(c: &CampaignConfig) -> PathBuf {
    c.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn kl(args: &KlArgs) -> Result<()> {
    let ell = if args.constant { f64::INFINITY } else { args.correlation_length };
    let mesh = TriMesh::structured(args.resolution)?;
    let basis = KlBasis::build(&CovarianceKernel::new(args.variance, ell)?, &mesh, args.n_kl)?;
    basis.save(&args.output)?;
    println!("wrote {} modes on {} nodes to {}", basis.n_kl(), basis.n_nodes(), args.output.display());
    Ok(())
}

fn quantize(args: &QuantizeArgs) -> Result<()> {
    let basis = KlBasis::load(&args.basis)?;
    let mut spec = driver::QuantizerSpec::default();
    args.quantizer.apply(&mut spec);
    let codebook = train_codebook(&spec, &basis, args.m)?;
    codebook.save(&args.output)?;
    println!("wrote {} centroids in dimension {} to {}", codebook.len(), codebook.dim(), args.output.display());
    if let Some(n_s) = args.frequencies {
        let rows = frequency_profile(&codebook, n_s, args.frequency_seed)?;
        let path = sibling(&args.output, FREQUENCIES_CSV);
        driver::write_frequencies(&path, &rows)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

fn run(args: &RunArgs) -> Result<()> {
    let config = args.campaign.resolve()?;
    let campaign = Campaign::prepare(&config)?;
    let report = campaign.run()?;
    let dir = output_dir(&config);
    driver::write_campaign(&dir, campaign.config(), &report)?;
    println!(
        "E[J] = {:.6} over {} realizations, {} unconverged, sum_J in [{}, {}]; outputs in {}",
        report.mean_j,
        report.n_realizations(),
        report.unconverged,
        report.min_sum_j,
        report.max_sum_j,
        dir.display()
    );
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let config = args.campaign.resolve()?;
    let rows = ideal_sweep(&config, &args.m_list)?;
    let dir = output_dir(&config);
    fs::create_dir_all(&dir)?;
    driver::write_ideal_sweep(&dir.join(IDEAL_SWEEP_CSV), &rows)?;
    for r in &rows {
        println!("m = {:>3}  energy = {:.4}  E[J] = {:.4}", r.m, r.relative_energy, r.mean_j);
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    if let Some(path) = &args.codebook {
        let codebook = Codebook::load(path)?;
        let rows = frequency_profile(&codebook, args.n_s, args.seed)?;
        let out = args.output.clone().unwrap_or_else(|| PathBuf::from(FREQUENCIES_CSV));
        driver::write_frequencies(&out, &rows)?;
        let f: Vec<f64> = rows.iter().map(|r| r.frequency).collect();
        println!("P = {}, frequency CV = {:.6}; wrote {}", rows.len(), coefficient_of_variation(&f), out.display());
        return Ok(());
    }
    let Some(dir) = &args.run_dir else { bail!("either --run-dir or --codebook is required") };
    let rows = driver::read_per_centroid(&dir.join(PER_CENTROID_CSV))?;
    let sums: Vec<f64> = rows.iter().map(|r| r.sum_j as f64).collect();
    let counts: Vec<f64> = rows.iter().map(|r| r.n_p as f64).collect();
    let max = rows.iter().map(|r| r.sum_j).max().unwrap_or(0);
    let min = rows.iter().map(|r| r.sum_j).min().unwrap_or(0);
    println!("P = {}", rows.len());
    println!("realizations = {}", counts.iter().sum::<f64>());
    println!("total iterations = {}", sums.iter().sum::<f64>());
    println!("sum_J range = {} ({} .. {})", max - min, min, max);
    println!("sum_J CV = {:.6}", coefficient_of_variation(&sums));
    println!("n_p CV = {:.6}", coefficient_of_variation(&counts));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Kl(a) => kl(a),
        Command::Quantize(a) => quantize(a),
        Command::Run(a) => run(a),
        Command::IdealSweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
