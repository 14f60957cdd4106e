//! Command-line front end. The only part of the crate that touches files.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::selection::{
    default_gammas, estimate_sigma, universal_threshold, SelectionGrid, SelectionRule, SpectrumKernel,
    UniversalThresholdCache, DEFAULT_UNIVERSAL_SIMULATIONS,
};
use crate::shrinkers::{
    atn, hard_by_rank, hard_by_threshold, optimal_hard_coefficient, optimal_shrink, two_step, AspectRatio,
    NoiseEnergy,
};
use crate::simbench::{export_shrinker_curves, export_surface, run_scenario, summarize, CurveSpec};
use crate::spectral::{decompose, estimated_rank, reconstruct, RealMatrix};

use io::{DenoiseReport, SigmaSource};

#[derive(Debug, Parser)]
#[command(name = "svshrink", version, about = "Low-rank matrix denoising by singular value shrinkage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise a CSV matrix.
    Denoise(DenoiseArgs),
    /// Run a Monte Carlo scenario file and write a summary table.
    Benchmark(BenchmarkArgs),
    /// Print the universal threshold for an N x P pure-noise matrix.
    UniversalThreshold(UniversalArgs),
    /// Export a selection criterion over the default (tau, gamma) grid.
    Surface(SurfaceArgs),
    /// Export shrinkage curves d_hat(lambda).
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    TsvdRank,
    TsvdTau,
    Soft,
    Atn,
    Os,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Select {
    Fixed,
    Sure,
    Gsure,
    Universal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceRule {
    Sure,
    Gsure,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Parameter choice; defaults to fixed.
    #[arg(long, value_enum)]
    pub select: Option<Select>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Known noise level; omit when unknown.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Subtract column means before denoising and add them back after.
    #[arg(long)]
    pub center: bool,
    /// Two-step shrinker with c = sigma^2 instead of the spiked inflation.
    #[arg(long)]
    pub literal_energy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulations behind the universal threshold.
    #[arg(long, default_value_t = DEFAULT_UNIVERSAL_SIMULATIONS)]
    pub nsim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-replicate rows, including failures.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct UniversalArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_UNIVERSAL_SIMULATIONS)]
    pub nsim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub rule: SurfaceRule,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// True signal, adds a loss column.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    /// `hard:tau=T`, `soft:tau=T`, `atn:tau=T,gamma=G` or `os:sigma=S,n=N,p=P`.
    #[arg(long = "spec", required = true)]
    pub specs: Vec<String>,
    #[arg(long)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Denoise(a) => cmd_denoise(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::UniversalThreshold(a) => {
            let table = universal_threshold(a.n, a.p, a.sigma, a.nsim, a.seed)?;
            println!("{}", io::fmt_f64(table.tau_universal));
            Ok(())
        }
        Command::Surface(a) => cmd_surface(a),
        Command::Curves(a) => {
            let specs = a.specs.iter().map(|s| s.parse()).collect::<Result<Vec<CurveSpec>>>()?;
            let points = export_shrinker_curves(&specs, a.lambda_max, a.points)?;
            io::write_curves_csv(&a.out, &points)
        }
    }
}

fn check_sigma(sigma: Option<f64>) -> Result<Option<f64>> {
    match sigma {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            Err(Error::validation(format!("--sigma must be finite and > 0, got {s}")))
        }
        other => Ok(other),
    }
}

fn require<T>(v: Option<T>, flag: &str, context: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("{context} requires {flag}")))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::TsvdRank => "tsvd-rank",
        Method::TsvdTau => "tsvd-tau",
        Method::Soft => "soft",
        Method::Atn => "atn",
        Method::Os => "os",
        Method::TwoStep => "two-step",
    }
}

fn select_name(s: Select) -> &'static str {
    match s {
        Select::Fixed => "fixed",
        Select::Sure => "sure",
        Select::Gsure => "gsure",
        Select::Universal => "universal",
    }
}

/// Denoises `x` as requested; the report's `output` field is left empty.
pub fn denoise_matrix(x: &RealMatrix, a: &DenoiseArgs) -> Result<(RealMatrix, DenoiseReport)> {
    let sigma = check_sigma(a.sigma)?;
    let select = a.select.unwrap_or(Select::Fixed);
    let is_atn = matches!(a.method, Method::Atn | Method::Soft);
    if !is_atn && select != Select::Fixed {
        return Err(Error::validation(format!(
            "--select {} applies only to atn and soft",
            select_name(select)
        )));
    }
    if a.method == Method::Soft && a.gamma.is_some() {
        return Err(Error::validation("soft thresholding takes no --gamma"));
    }

    let means = a.center.then(|| x.column_means());
    let work = match &means {
        Some(m) => x.add_to_columns(&m.iter().map(|v| -v).collect::<Vec<_>>()),
        None => x.clone(),
    };
    let (n, p) = work.shape();
    let dec = decompose(&work)?;
    let l = dec.lambdas();
    let beta = AspectRatio::from_shape(n, p).value();

    let mut report = DenoiseReport {
        n_rows: n,
        n_cols: p,
        method: method_name(a.method).to_string(),
        selection: select_name(select).to_string(),
        tau: None,
        gamma: None,
        rank: None,
        sigma,
        sigma_source: if sigma.is_some() {
            SigmaSource::Given
        } else {
            SigmaSource::NotApplicable
        },
        centered: a.center,
        criterion: None,
        estimated_rank: 0,
        singular_values: l.to_vec(),
        shrunk_singular_values: Vec::new(),
        output: String::new(),
    };
    let sigma_or_estimate = |report: &mut DenoiseReport| -> Result<f64> {
        match sigma {
            Some(s) => Ok(s),
            None => {
                let s = estimate_sigma(l, n, p)?;
                report.sigma = Some(s);
                report.sigma_source = SigmaSource::Estimated;
                Ok(s)
            }
        }
    };

    let d_hat = match a.method {
        Method::TsvdRank => {
            let rank = require(a.rank, "--rank", "tsvd-rank")?;
            report.rank = Some(rank);
            hard_by_rank(l, rank)?
        }
        Method::TsvdTau => {
            let tau = match a.tau {
                Some(t) if sigma.is_some() => {
                    return Err(Error::validation(format!(
                        "tsvd-tau takes either --tau ({t}) or --sigma, not both"
                    )))
                }
                Some(t) => t,
                None => optimal_hard_coefficient(beta)? * (n.max(p) as f64).sqrt() * sigma_or_estimate(&mut report)?,
            };
            report.tau = Some(tau);
            hard_by_threshold(l, tau)?
        }
        Method::Os => {
            let s = sigma_or_estimate(&mut report)?;
            optimal_shrink(l, n, p, s)?
        }
        Method::TwoStep => {
            let rank = require(a.rank, "--rank", "two-step")?;
            let s = sigma_or_estimate(&mut report)?;
            report.rank = Some(rank);
            let energy = if a.literal_energy {
                NoiseEnergy::literal(s)
            } else {
                NoiseEnergy::spiked(s, n, p)
            };
            two_step(l, rank, &energy)?
        }
        Method::Atn | Method::Soft => {
            let soft = a.method == Method::Soft;
            let (tau, gamma, criterion) = match select {
                Select::Fixed => {
                    let tau = require(a.tau, "--tau", "fixed selection")?;
                    let gamma = if soft { 1.0 } else { require(a.gamma, "--gamma", "fixed atn")? };
                    (tau, gamma, None)
                }
                _ => {
                    if a.tau.is_some() || a.gamma.is_some() {
                        return Err(Error::validation("--tau and --gamma apply only to --select fixed"));
                    }
                    let gammas = if soft { vec![1.0] } else { default_gammas() };
                    let grid = SelectionGrid::for_spectrum(l)?.with_gammas(gammas)?;
                    let rule = match select {
                        Select::Sure => SelectionRule::Sure {
                            sigma2: require(sigma, "--sigma", "--select sure")?.powi(2),
                        },
                        Select::Gsure => {
                            if sigma.is_some() {
                                return Err(Error::validation(
                                    "--select gsure is for unknown noise; drop --sigma or use --select sure",
                                ));
                            }
                            SelectionRule::Gsure
                        }
                        _ => {
                            let s = require(sigma, "--sigma", "--select universal")?;
                            let tau = universal_threshold(n, p, s, a.nsim, a.seed)?.tau_universal;
                            SelectionRule::Universal { sigma2: s * s, tau }
                        }
                    };
                    let kernel = SpectrumKernel::from_decomposition(&dec)?;
                    let sel = kernel.select(&rule, &grid)?;
                    (sel.tau, sel.gamma, sel.best.map(|b| b.criterion))
                }
            };
            report.tau = Some(tau);
            report.gamma = Some(gamma);
            report.criterion = criterion;
            atn(l, tau, gamma)?
        }
    };

    let mut w_hat = reconstruct(&dec, &d_hat)?;
    if let Some(m) = &means {
        w_hat = w_hat.add_to_columns(m);
    }
    report.estimated_rank = estimated_rank(&d_hat);
    report.shrunk_singular_values = d_hat;
    Ok((w_hat, report))
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    let x = io::parse_matrix_csv(&a.input)?;
    let (w_hat, mut report) = denoise_matrix(&x, a)?;
    report.output = a.out.display().to_string();
    io::write_matrix_csv(&a.out, &w_hat)?;
    io::write_report(&report, &a.report)?;
    log::info!(
        "{}x{} {} rank {} -> {}",
        report.n_rows,
        report.n_cols,
        report.method,
        report.estimated_rank,
        a.out.display()
    );
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut cfg = config::read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let run_all = || -> Result<_> {
        let cache = UniversalThresholdCache::new();
        let mut records = Vec::new();
        for scenario in cfg.scenarios() {
            log::info!("rank {}: {} replicates per SNR", scenario.true_rank, scenario.n_replicates);
            records.extend(run_scenario(&scenario, &cache)?);
        }
        Ok(records)
    };
    let records = match a.threads {
        Some(0) => return Err(Error::validation("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Computation(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    let failures = records.iter().filter(|r| r.outcome.is_err()).count();
    if failures > 0 {
        log::warn!("{failures} estimator run(s) failed");
    }
    io::write_summary_csv(&a.out, &summarize(&records))?;
    if let Some(path) = &a.records {
        io::write_records_csv(path, &records)?;
    }
    Ok(())
}

fn cmd_surface(a: &SurfaceArgs) -> Result<()> {
    let sigma = check_sigma(a.sigma)?;
    let x = io::parse_matrix_csv(&a.input)?;
    let truth = a.truth.as_deref().map(io::parse_matrix_csv).transpose()?;
    if let Some(w) = &truth {
        if w.shape() != x.shape() {
            return Err(Error::validation(format!(
                "--truth is {}x{} but --in is {}x{}",
                w.rows(),
                w.cols(),
                x.rows(),
                x.cols()
            )));
        }
    }
    let rule = match (a.rule, sigma) {
        (SurfaceRule::Sure, Some(s)) => SelectionRule::Sure { sigma2: s * s },
        (SurfaceRule::Sure, None) => return Err(Error::validation("--rule sure requires --sigma")),
        (SurfaceRule::Gsure, None) => SelectionRule::Gsure,
        (SurfaceRule::Gsure, Some(_)) => {
            return Err(Error::validation("--rule gsure is for unknown noise; drop --sigma"))
        }
    };
    let dec = decompose(&x)?;
    let grid = SelectionGrid::for_spectrum(dec.lambdas())?;
    let rows = export_surface(&dec, &rule, &grid, truth.as_ref())?;
    if let Some(r) = rows.iter().find(|r| r.criterion_min) {
        log::info!("criterion minimum at tau={} gamma={}", r.tau, r.gamma);
    }
    if let Some(r) = rows.iter().find(|r| r.loss_min) {
        log::info!("loss minimum at tau={} gamma={}", r.tau, r.gamma);
    }
    io::write_surface_csv(&a.out, &rows)
}

/// Convenience for tests: runs with string arguments.
pub fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("svshrink").chain(args.iter().copied()))
}
