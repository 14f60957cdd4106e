//! Monte Carlo benchmark of the shrinkers on synthetic low-rank signals.
//!
//! Signals are `W = A B^T / sqrt(N P R)` with i.i.d. standard Gaussian
//! factors, so `E ||W||_F^2 = 1`. Noise has entrywise standard deviation
//! `sigma = 1 / (SNR sqrt(N P))`. Every estimator of a replicate sees the
//! same noisy matrix.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{
    quantile, Selection, SelectionGrid, SelectionRule, SpectrumKernel, SureBreakdown, UniversalThresholdCache,
    DEFAULT_UNIVERSAL_SIMULATIONS,
};
use crate::shrinkers::{
    atn, hard_by_rank, hard_by_threshold, median_hard_coefficient, optimal_hard_coefficient,
    two_step, AspectRatio, NoiseEnergy, NoiseLevel, ShrinkerSpec,
};
use crate::spectral::{decompose, estimated_rank, reconstruct, relative_mse, RealMatrix, SpectralDecomposition};

const STUDENT_DOF: f64 = 5.0;

const ROLE_SIGNAL: u64 = 0;
const ROLE_NOISE: u64 = 1;
const ROLE_UNIVERSAL: u64 = 2;

/// Low-rank signal together with its nonzero singular values.
#[derive(Debug, Clone)]
pub struct SignalGroundTruth {
    pub w: RealMatrix,
    pub true_rank: usize,
    pub singular_values: Vec<f64>,
}

/// Draws `W = A B^T / sqrt(N P R)` from the stream keyed by `seed`.
pub fn generate_signal(n_rows: usize, n_cols: usize, rank: usize, seed: u64) -> Result<SignalGroundTruth> {
    if rank == 0 || rank > n_rows.min(n_cols) {
        return Err(Error::validation(format!(
            "signal rank must lie in 1..={}, got {rank}",
            n_rows.min(n_cols)
        )));
    }
    let mut rng = seed::rng(seed, &[]);
    let a = DMatrix::<f64>::from_fn(n_rows, rank, |_, _| StandardNormal.sample(&mut rng));
    let b = DMatrix::<f64>::from_fn(n_cols, rank, |_, _| StandardNormal.sample(&mut rng));
    let scale = 1.0 / ((n_rows * n_cols * rank) as f64).sqrt();
    let w = (&a * b.transpose()) * scale;

    // Nonzero singular values of A B^T are those of R_a R_b^T.
    let ra = a.qr().r();
    let rb = b.qr().r();
    let core = ra * rb.transpose() * scale;
    let mut singular_values: Vec<f64> = core.singular_values().iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));

    Ok(SignalGroundTruth {
        w: RealMatrix::from_fn(n_rows, n_cols, |i, j| w[(i, j)]),
        true_rank: rank,
        singular_values,
    })
}

/// Noise distribution, always with entrywise variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseFamily {
    Gaussian,
    /// Student t with 5 degrees of freedom, rescaled to unit variance.
    Student5,
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Student5 => "student5",
        })
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "student5" | "student" => Ok(NoiseFamily::Student5),
            other => Err(Error::validation(format!("unknown noise family '{other}'"))),
        }
    }
}

/// Entrywise noise level for a given SNR.
pub fn noise_sigma(n_rows: usize, n_cols: usize, snr: f64) -> f64 {
    1.0 / (snr * ((n_rows * n_cols) as f64).sqrt())
}

/// `X = W + E` with `sigma = 1 / (SNR sqrt(N P))`.
pub fn add_noise(w: &RealMatrix, snr: f64, family: NoiseFamily, seed: u64) -> Result<(RealMatrix, f64)> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::validation(format!("SNR must be finite and > 0, got {snr}")));
    }
    let (n, p) = w.shape();
    let sigma = noise_sigma(n, p, snr);
    let mut rng = seed::rng(seed, &[]);
    let data: Vec<f64> = match family {
        NoiseFamily::Gaussian => w
            .as_slice()
            .iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + sigma * z
            })
            .collect(),
        NoiseFamily::Student5 => {
            let t = StudentT::new(STUDENT_DOF).expect("valid degrees of freedom");
            let scale = sigma / (STUDENT_DOF / (STUDENT_DOF - 2.0)).sqrt();
            w.as_slice()
                .iter()
                .map(|&v| v + scale * t.sample(&mut rng))
                .collect()
        }
    };
    Ok((RealMatrix::new(n, p, data)?, sigma))
}

/// Estimators compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// ATN, both parameters by GSURE (noise level unknown).
    AtnGsure,
    /// ATN, both parameters by SURE (noise level known).
    AtnSure,
    /// ATN, universal `tau` and `gamma` by SURE (noise level known).
    AtnUniversal,
    /// Soft thresholding, `tau` by SURE (noise level known).
    SvstSure,
    /// Truncated SVD at the true rank.
    TsvdRank,
    /// Hard threshold `lambda_*(beta) sqrt(max(N, P)) sigma` (noise level known).
    TsvdTau,
    /// Hard threshold `w(beta) median(lambda)`.
    TsvdUnknown,
    /// Optimal shrinkage with the known noise level.
    Os,
    /// Optimal shrinkage with the median-based noise estimate.
    OsUnknown,
    /// Two-step shrinker at the true rank, spiked-inflation constant.
    TwoStep,
    /// Two-step shrinker at the true rank with `c = sigma^2`.
    TwoStepLiteral,
}

impl Estimator {
    pub const ALL: [Estimator; 11] = [
        Estimator::AtnGsure,
        Estimator::AtnSure,
        Estimator::AtnUniversal,
        Estimator::SvstSure,
        Estimator::TsvdRank,
        Estimator::TsvdTau,
        Estimator::TsvdUnknown,
        Estimator::Os,
        Estimator::OsUnknown,
        Estimator::TwoStep,
        Estimator::TwoStepLiteral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::AtnGsure => "atn-gsure",
            Estimator::AtnSure => "atn-sure",
            Estimator::AtnUniversal => "atn-universal",
            Estimator::SvstSure => "svst-sure",
            Estimator::TsvdRank => "tsvd-rank",
            Estimator::TsvdTau => "tsvd-tau",
            Estimator::TsvdUnknown => "tsvd-unknown",
            Estimator::Os => "os",
            Estimator::OsUnknown => "os-unknown",
            Estimator::TwoStep => "two-step",
            Estimator::TwoStepLiteral => "two-step-literal",
        }
    }

    fn needs_universal(self) -> bool {
        self == Estimator::AtnUniversal
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown estimator '{s}'")))
    }
}

/// What an estimator knows beyond the data matrix.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub sigma: f64,
    pub true_rank: usize,
    /// Universal threshold at unit noise, required by `atn-universal`.
    pub unit_universal_tau: Option<f64>,
}

/// Shrunk spectrum produced by one estimator.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub d_hat: Vec<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub criterion: Option<SureBreakdown>,
}

impl Estimate {
    fn plain(d_hat: Vec<f64>) -> Self {
        Self {
            d_hat,
            tau: None,
            gamma: None,
            criterion: None,
        }
    }

    fn threshold(d_hat: Vec<f64>, tau: f64) -> Self {
        Self {
            tau: Some(tau),
            ..Self::plain(d_hat)
        }
    }

    fn selected(kernel: &SpectrumKernel, sel: Selection) -> Result<Self> {
        Ok(Self {
            d_hat: atn(kernel.lambdas(), sel.tau, sel.gamma)?,
            tau: Some(sel.tau),
            gamma: Some(sel.gamma),
            criterion: sel.best,
        })
    }
}

/// Runs one estimator on a spectrum. `kernel` and `grid` are shared by the
/// ATN family within a replicate.
pub fn estimate(
    estimator: Estimator,
    kernel: &SpectrumKernel,
    grid: &SelectionGrid,
    oracle: &Oracle,
) -> Result<Estimate> {
    let l = kernel.lambdas();
    let (n, p) = (kernel.n_rows(), kernel.n_cols());
    let sigma2 = oracle.sigma * oracle.sigma;
    let beta = AspectRatio::from_shape(n, p).value();
    let root_max = (n.max(p) as f64).sqrt();
    match estimator {
        Estimator::AtnGsure => Estimate::selected(kernel, kernel.select(&SelectionRule::Gsure, grid)?),
        Estimator::AtnSure => Estimate::selected(kernel, kernel.select(&SelectionRule::Sure { sigma2 }, grid)?),
        Estimator::SvstSure => {
            let soft_grid = grid.with_gammas(vec![1.0])?;
            Estimate::selected(kernel, kernel.select(&SelectionRule::Sure { sigma2 }, &soft_grid)?)
        }
        Estimator::AtnUniversal => {
            let unit = oracle
                .unit_universal_tau
                .ok_or_else(|| Error::validation("atn-universal needs a universal threshold"))?;
            let rule = SelectionRule::Universal {
                sigma2,
                tau: unit * oracle.sigma,
            };
            Estimate::selected(kernel, kernel.select(&rule, grid)?)
        }
        Estimator::TsvdRank => Ok(Estimate::plain(hard_by_rank(l, oracle.true_rank.min(l.len()))?)),
        Estimator::TsvdTau => {
            let tau = optimal_hard_coefficient(beta)? * root_max * oracle.sigma;
            Ok(Estimate::threshold(hard_by_threshold(l, tau)?, tau))
        }
        Estimator::TsvdUnknown => {
            let tau = median_hard_coefficient(beta)? * quantile(l, 0.5);
            Ok(Estimate::threshold(hard_by_threshold(l, tau)?, tau))
        }
        Estimator::Os => Ok(Estimate::plain(
            ShrinkerSpec::OptimalShrink {
                noise: NoiseLevel::Known(oracle.sigma),
            }
            .apply(l, n, p)?,
        )),
        Estimator::OsUnknown => Ok(Estimate::plain(
            ShrinkerSpec::OptimalShrink {
                noise: NoiseLevel::Unknown,
            }
            .apply(l, n, p)?,
        )),
        Estimator::TwoStep => Ok(Estimate::plain(two_step(
            l,
            oracle.true_rank.min(l.len()),
            &NoiseEnergy::spiked(oracle.sigma, n, p),
        )?)),
        Estimator::TwoStepLiteral => Ok(Estimate::plain(two_step(
            l,
            oracle.true_rank.min(l.len()),
            &NoiseEnergy::literal(oracle.sigma),
        )?)),
    }
}

/// One Monte Carlo experiment: fixed shape and rank, several SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub true_rank: usize,
    pub snr_values: Vec<f64>,
    pub noise: NoiseFamily,
    pub n_replicates: usize,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    /// Simulations behind the universal threshold.
    pub universal_simulations: usize,
}

impl ScenarioConfig {
    pub fn new(n_rows: usize, n_cols: usize, true_rank: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            true_rank,
            snr_values: vec![0.5, 1.0, 2.0, 4.0],
            noise: NoiseFamily::Gaussian,
            n_replicates: 50,
            estimators: Vec::new(),
            master_seed: 0,
            universal_simulations: DEFAULT_UNIVERSAL_SIMULATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::validation("matrix dimensions must be positive"));
        }
        if self.true_rank == 0 || self.true_rank > self.n_rows.min(self.n_cols) {
            return Err(Error::validation(format!(
                "rank must lie in 1..={}, got {}",
                self.n_rows.min(self.n_cols),
                self.true_rank
            )));
        }
        if self.n_replicates == 0 {
            return Err(Error::validation("at least one replicate is required"));
        }
        if self.snr_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::validation("SNR values must be finite and > 0"));
        }
        Ok(())
    }

    /// Seed of the signal drawn for `(snr_index, replicate)`.
    pub fn signal_seed(&self, snr_index: usize, replicate: usize) -> u64 {
        seed::derive(
            self.master_seed,
            &[self.true_rank as u64, snr_index as u64, replicate as u64, ROLE_SIGNAL],
        )
    }

    /// Seed of the noise drawn for `(snr_index, replicate)`.
    pub fn noise_seed(&self, snr_index: usize, replicate: usize) -> u64 {
        seed::derive(
            self.master_seed,
            &[self.true_rank as u64, snr_index as u64, replicate as u64, ROLE_NOISE],
        )
    }

    pub fn universal_seed(&self) -> u64 {
        seed::derive(self.master_seed, &[ROLE_UNIVERSAL])
    }
}

/// Successful fit of one estimator on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub relative_mse: f64,
    pub estimated_rank: usize,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
}

/// One estimator on one replicate; failures are kept as rows.
#[derive(Debug, Clone)]
pub struct ReplicateRecord {
    pub true_rank: usize,
    pub snr: f64,
    pub noise: NoiseFamily,
    pub replicate: usize,
    pub estimator: Estimator,
    pub outcome: std::result::Result<Fit, String>,
    pub wall_time: Duration,
}

impl ReplicateRecord {
    /// Record equality ignoring timing.
    pub fn same_result(&self, other: &Self) -> bool {
        self.true_rank == other.true_rank
            && self.snr.to_bits() == other.snr.to_bits()
            && self.noise == other.noise
            && self.replicate == other.replicate
            && self.estimator == other.estimator
            && self.outcome == other.outcome
    }
}

/// A noisy replicate ready for the estimators.
pub struct Replicate {
    pub signal: SignalGroundTruth,
    pub x: RealMatrix,
    pub sigma: f64,
}

/// Signal plus noise for one `(snr_index, replicate)` cell.
pub fn draw_replicate(cfg: &ScenarioConfig, snr_index: usize, replicate: usize) -> Result<Replicate> {
    let signal = generate_signal(cfg.n_rows, cfg.n_cols, cfg.true_rank, cfg.signal_seed(snr_index, replicate))?;
    let (x, sigma) = add_noise(
        &signal.w,
        cfg.snr_values[snr_index],
        cfg.noise,
        cfg.noise_seed(snr_index, replicate),
    )?;
    Ok(Replicate { signal, x, sigma })
}

/// Runs every estimator on every `(SNR, replicate)` cell.
///
/// Cells run in parallel on the current rayon pool; output order is
/// SNR-major, then replicate, then registry order, whatever the thread count.
pub fn run_scenario(cfg: &ScenarioConfig, cache: &UniversalThresholdCache) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    if cfg.estimators.is_empty() {
        return Ok(Vec::new());
    }
    let unit_universal_tau = if cfg.estimators.iter().any(|e| e.needs_universal()) {
        Some(cache.unit_threshold(cfg.n_rows, cfg.n_cols, cfg.universal_simulations, cfg.universal_seed())?)
    } else {
        None
    };
    let cells: Vec<(usize, usize)> = (0..cfg.snr_values.len())
        .flat_map(|s| (0..cfg.n_replicates).map(move |r| (s, r)))
        .collect();
    let per_cell: Vec<Vec<ReplicateRecord>> = cells
        .par_iter()
        .map(|&(snr_index, replicate)| run_cell(cfg, snr_index, replicate, unit_universal_tau))
        .collect();
    Ok(per_cell.into_iter().flatten().collect())
}

fn run_cell(
    cfg: &ScenarioConfig,
    snr_index: usize,
    replicate: usize,
    unit_universal_tau: Option<f64>,
) -> Vec<ReplicateRecord> {
    let snr = cfg.snr_values[snr_index];
    let record = |estimator, outcome, wall_time| ReplicateRecord {
        true_rank: cfg.true_rank,
        snr,
        noise: cfg.noise,
        replicate,
        estimator,
        outcome,
        wall_time,
    };
    let prepared = draw_replicate(cfg, snr_index, replicate).and_then(|rep| {
        let dec = decompose(&rep.x)?;
        let kernel = SpectrumKernel::from_decomposition(&dec)?;
        let grid = SelectionGrid::for_spectrum(dec.lambdas())?;
        Ok((rep, dec, kernel, grid))
    });
    let (rep, dec, kernel, grid) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .estimators
                .iter()
                .map(|&est| record(est, Err(msg.clone()), Duration::ZERO))
                .collect();
        }
    };
    let oracle = Oracle {
        sigma: rep.sigma,
        true_rank: cfg.true_rank,
        unit_universal_tau,
    };
    cfg.estimators
        .iter()
        .map(|&est| {
            let start = Instant::now();
            let outcome = fit_one(est, &dec, &kernel, &grid, &oracle, &rep.signal.w).map_err(|e| e.to_string());
            record(est, outcome, start.elapsed())
        })
        .collect()
}

fn fit_one(
    estimator: Estimator,
    dec: &SpectralDecomposition,
    kernel: &SpectrumKernel,
    grid: &SelectionGrid,
    oracle: &Oracle,
    w: &RealMatrix,
) -> Result<Fit> {
    let est = estimate(estimator, kernel, grid, oracle)?;
    let w_hat = reconstruct(dec, &est.d_hat)?;
    Ok(Fit {
        relative_mse: relative_mse(&w_hat, w)?,
        estimated_rank: estimated_rank(&est.d_hat),
        tau: est.tau,
        gamma: est.gamma,
    })
}

/// Mean and sample standard deviation per `(estimator, rank, SNR)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub true_rank: usize,
    pub snr: f64,
    pub noise: NoiseFamily,
    pub n_success: usize,
    pub mean_mse: f64,
    pub sd_mse: f64,
    pub mean_rank: f64,
    pub sd_rank: f64,
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates records in order of first appearance. Cells with fewer than
/// two successful replicates are dropped with a warning.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<SummaryRow> {
    type Key = (Estimator, usize, u64, NoiseFamily);
    let mut order: Vec<Key> = Vec::new();
    let mut cells: std::collections::HashMap<Key, Vec<&Fit>> = std::collections::HashMap::new();
    for r in records {
        let key = (r.estimator, r.true_rank, r.snr.to_bits(), r.noise);
        let entry = cells.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if let Ok(fit) = &r.outcome {
            entry.push(fit);
        }
    }
    order
        .into_iter()
        .filter_map(|key| {
            let fits = &cells[&key];
            if fits.len() < 2 {
                log::warn!(
                    "skipping {} at rank {} SNR {}: {} successful replicate(s)",
                    key.0,
                    key.1,
                    f64::from_bits(key.2),
                    fits.len()
                );
                return None;
            }
            let mses: Vec<f64> = fits.iter().map(|f| f.relative_mse).collect();
            let ranks: Vec<f64> = fits.iter().map(|f| f.estimated_rank as f64).collect();
            let (mean_mse, sd_mse) = mean_sd(&mses);
            let (mean_rank, sd_rank) = mean_sd(&ranks);
            Some(SummaryRow {
                estimator: key.0,
                true_rank: key.1,
                snr: f64::from_bits(key.2),
                noise: key.3,
                n_success: fits.len(),
                mean_mse,
                sd_mse,
                mean_rank,
                sd_rank,
            })
        })
        .collect()
}

/// One `(tau, gamma)` row of an exported surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow {
    pub tau: f64,
    pub gamma: f64,
    pub criterion: f64,
    /// `||W_hat - W||_F^2` when the true signal is known.
    pub loss: Option<f64>,
    pub criterion_min: bool,
    pub loss_min: bool,
}

/// Criterion surface over a grid, optionally with the true loss.
pub fn export_surface(
    dec: &SpectralDecomposition,
    rule: &SelectionRule,
    grid: &SelectionGrid,
    w: Option<&RealMatrix>,
) -> Result<Vec<SurfaceRow>> {
    let kernel = SpectrumKernel::from_decomposition(dec)?;
    let points: Vec<SureBreakdown> = match *rule {
        SelectionRule::Sure { sigma2 } => grid.points().map(|(t, g)| kernel.sure(t, g, sigma2)).collect(),
        SelectionRule::Gsure => grid.points().map(|(t, g)| kernel.gsure(t, g)).collect(),
        SelectionRule::Universal { sigma2, tau } => grid
            .gamma_values()
            .iter()
            .map(|&g| kernel.sure(tau, g, sigma2))
            .collect(),
        SelectionRule::Fixed { .. } => {
            return Err(Error::validation("a fixed rule has no criterion surface"))
        }
    };
    // ||U d V^T - W||^2 = sum d^2 - 2 sum d_i u_i^T W v_i + ||W||^2
    let loss_terms = match w {
        Some(w) => Some((dec.project(w)?, w.frobenius_norm_sq())),
        None => None,
    };
    let mut rows: Vec<SurfaceRow> = points
        .iter()
        .map(|p| {
            let loss = loss_terms.as_ref().map(|(proj, energy)| {
                let d = atn(dec.lambdas(), p.tau, p.gamma).expect("grid values are valid");
                let cross: f64 = d.iter().zip(proj).map(|(a, b)| a * b).sum();
                let own: f64 = d.iter().map(|a| a * a).sum();
                (own - 2.0 * cross + energy).max(0.0)
            });
            SurfaceRow {
                tau: p.tau,
                gamma: p.gamma,
                criterion: p.criterion,
                loss,
                criterion_min: false,
                loss_min: false,
            }
        })
        .collect();
    if let Some(i) = argmin(rows.iter().map(|r| r.criterion)) {
        rows[i].criterion_min = true;
    }
    if w.is_some() {
        if let Some(i) = argmin(rows.iter().map(|r| r.loss.unwrap_or(f64::INFINITY))) {
            rows[i].loss_min = true;
        }
    }
    Ok(rows)
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// A labelled pointwise shrinker for curve export. The optimal shrinker needs
/// the matrix shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub label: String,
    pub spec: ShrinkerSpec,
    pub shape: (usize, usize),
}

impl FromStr for CurveSpec {
    type Err = Error;

    /// `hard:tau=T`, `soft:tau=T`, `atn:tau=T,gamma=G`, or
    /// `os:sigma=S,n=N,p=P`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::HashMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("malformed parameter '{part}' in '{s}'")))?;
            params.insert(k.trim(), v.trim());
        }
        let num = |key: &str| -> Result<f64> {
            params
                .get(key)
                .ok_or_else(|| Error::validation(format!("'{s}' is missing '{key}'")))?
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("'{key}' in '{s}' is not a number")))
        };
        let int = |key: &str| -> Result<usize> {
            params
                .get(key)
                .ok_or_else(|| Error::validation(format!("'{s}' is missing '{key}'")))?
                .parse::<usize>()
                .map_err(|_| Error::validation(format!("'{key}' in '{s}' is not an integer")))
        };
        let (spec, shape) = match kind {
            "hard" => (ShrinkerSpec::HardThreshold { tau: num("tau")? }, (1, 1)),
            "soft" => (ShrinkerSpec::Soft { tau: num("tau")? }, (1, 1)),
            "atn" => (
                ShrinkerSpec::Atn {
                    tau: num("tau")?,
                    gamma: num("gamma")?,
                },
                (1, 1),
            ),
            "os" => (
                ShrinkerSpec::OptimalShrink {
                    noise: NoiseLevel::Known(num("sigma")?),
                },
                (int("n")?, int("p")?),
            ),
            other => {
                return Err(Error::validation(format!(
                    "unknown curve shrinker '{other}' (expected hard, soft, atn or os)"
                )))
            }
        };
        spec.validate()?;
        Ok(CurveSpec {
            label: s.to_string(),
            spec,
            shape,
        })
    }
}

/// One point of a shrinkage curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub lambda: f64,
    pub label: String,
    pub d_hat: f64,
}

/// Evaluates each pointwise shrinker on `points` equally spaced values in
/// `[0, lambda_max]`.
pub fn export_shrinker_curves(specs: &[CurveSpec], lambda_max: f64, points: usize) -> Result<Vec<CurvePoint>> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) || points < 2 {
        return Err(Error::validation("curve range needs lambda_max > 0 and at least two points"));
    }
    let grid: Vec<f64> = (0..points)
        .map(|k| lambda_max * k as f64 / (points - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(specs.len() * points);
    for cs in specs {
        if !cs.spec.is_pointwise() {
            return Err(Error::validation(format!("'{}' is not a pointwise shrinker", cs.label)));
        }
        let (n, p) = cs.shape;
        for &lambda in &grid {
            let d_hat = cs.spec.apply(&[lambda], n, p)?[0];
            out.push(CurvePoint {
                lambda,
                label: cs.label.clone(),
                d_hat,
            });
        }
    }
    Ok(out)
}
