//! Data-driven choice of the ATN parameters `(tau, gamma)`.
//!
//! * SURE with the closed-form divergence of the ATN map (noise level known),
//! * GSURE, a noise-free surrogate `RSS / (1 - div / NP)^2`,
//! * the universal threshold: a Monte Carlo quantile of the top singular
//!   value of pure noise, with `gamma` then chosen by SURE,
//! * the median-based noise level estimate used by the unknown-sigma rules.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed;
use crate::shrinkers::{atn, mp_median, AspectRatio};
use crate::spectral::{largest_singular_value, SpectralDecomposition};

/// Largest `gamma` on default grids. Past this the ATN curve is
/// indistinguishable from hard thresholding away from `tau`.
pub const GAMMA_MAX: f64 = 64.0;
pub const DEFAULT_TAU_POINTS: usize = 50;
pub const DEFAULT_GAMMA_POINTS: usize = 20;
pub const DEFAULT_UNIVERSAL_SIMULATIONS: usize = 1000;

/// Relative gap under which two positive singular values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// One evaluated point of a risk criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SureBreakdown {
    pub tau: f64,
    pub gamma: f64,
    /// Residual sum of squares in singular value space.
    pub rss: f64,
    pub divergence: f64,
    pub criterion: f64,
}

/// Precomputed spectrum data for fast criterion evaluation.
///
/// The pairwise part of the divergence, `2 sum_{t != s} lambda_s f(lambda_s)
/// / (lambda_s^2 - lambda_t^2)`, factors as `2 sum_s lambda_s f(lambda_s) H_s`
/// with `H_s = sum_{t != s} 1 / (lambda_s^2 - lambda_t^2)` independent of
/// `(tau, gamma)`, so each grid point costs `O(m)`.
#[derive(Debug, Clone)]
pub struct SpectrumKernel {
    lambdas: Vec<f64>,
    pair_sums: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl SpectrumKernel {
    pub fn new(lambdas: &[f64], n_rows: usize, n_cols: usize) -> Result<Self> {
        let m = n_rows.min(n_cols);
        if lambdas.len() != m {
            return Err(Error::validation(format!(
                "expected {m} singular values for a {n_rows}x{n_cols} matrix, got {}",
                lambdas.len()
            )));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::validation("singular values must be finite and nonnegative"));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::validation("singular values must be sorted in decreasing order"));
        }
        for w in lambdas.windows(2) {
            if w[1] > 0.0 && w[0] - w[1] <= TIE_TOLERANCE * w[0] {
                return Err(Error::TiedSingularValues {
                    first: w[0],
                    second: w[1],
                });
            }
        }
        let sq: Vec<f64> = lambdas.iter().map(|l| l * l).collect();
        let pair_sums = sq
            .iter()
            .enumerate()
            .map(|(s, &ls)| {
                if ls == 0.0 {
                    return 0.0;
                }
                sq.iter()
                    .enumerate()
                    .filter(|&(t, _)| t != s)
                    .map(|(_, &lt)| 1.0 / (ls - lt))
                    .sum()
            })
            .collect();
        Ok(Self {
            lambdas: lambdas.to_vec(),
            pair_sums,
            n_rows,
            n_cols,
        })
    }

    pub fn from_decomposition(dec: &SpectralDecomposition) -> Result<Self> {
        Self::new(dec.lambdas(), dec.n_rows(), dec.n_cols())
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn np(&self) -> f64 {
        (self.n_rows * self.n_cols) as f64
    }

    /// `sum_s lambda_s^2 min((tau / lambda_s)^(2 gamma), 1)`.
    pub fn rss(&self, tau: f64, gamma: f64) -> f64 {
        self.lambdas
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| l * l * (tau / l).powf(2.0 * gamma).min(1.0))
            .sum()
    }

    /// Divergence of `X -> W_hat` for the ATN map.
    pub fn divergence(&self, tau: f64, gamma: f64) -> f64 {
        if tau == 0.0 {
            // identity map
            return self.np();
        }
        let gap = self.n_rows.abs_diff(self.n_cols) as f64;
        self.lambdas
            .iter()
            .zip(&self.pair_sums)
            .filter(|(&l, _)| l > 0.0)
            .map(|(&l, &h)| {
                let ratio = (tau / l).powf(gamma);
                let factor = (1.0 - ratio).max(0.0);
                let slope = if l >= tau { 1.0 + (gamma - 1.0) * ratio } else { 0.0 };
                slope + gap * factor + 2.0 * l * l * factor * h
            })
            .sum()
    }

    pub fn sure(&self, tau: f64, gamma: f64, sigma2: f64) -> SureBreakdown {
        let rss = self.rss(tau, gamma);
        let divergence = self.divergence(tau, gamma);
        SureBreakdown {
            tau,
            gamma,
            rss,
            divergence,
            criterion: -self.np() * sigma2 + rss + 2.0 * sigma2 * divergence,
        }
    }

    /// GSURE; points with `div >= NP` get `+inf` so they never win a search.
    pub fn gsure(&self, tau: f64, gamma: f64) -> SureBreakdown {
        let rss = self.rss(tau, gamma);
        let divergence = self.divergence(tau, gamma);
        let np = self.np();
        let criterion = if divergence >= np {
            f64::INFINITY
        } else {
            rss / (1.0 - divergence / np).powi(2)
        };
        SureBreakdown {
            tau,
            gamma,
            rss,
            divergence,
            criterion,
        }
    }

    /// Minimizes the rule's criterion over the grid.
    pub fn select(&self, rule: &SelectionRule, grid: &SelectionGrid) -> Result<Selection> {
        rule.validate()?;
        let points: Vec<SureBreakdown> = match *rule {
            SelectionRule::Fixed { tau, gamma } => {
                return Ok(Selection {
                    tau,
                    gamma,
                    best: None,
                    surface: Vec::new(),
                })
            }
            SelectionRule::Sure { sigma2 } => grid
                .points()
                .map(|(t, g)| self.sure(t, g, sigma2))
                .collect(),
            SelectionRule::Gsure => grid.points().map(|(t, g)| self.gsure(t, g)).collect(),
            SelectionRule::Universal { sigma2, tau } => grid
                .gamma_values()
                .iter()
                .map(|&g| self.sure(tau, g, sigma2))
                .collect(),
        };
        // Grid order is tau-major ascending, so strict `<` keeps the smallest
        // tau and then the smallest gamma among ties.
        let mut best: Option<SureBreakdown> = None;
        for p in &points {
            if p.criterion.is_finite() && best.is_none_or(|b| p.criterion < b.criterion) {
                best = Some(*p);
            }
        }
        let best = best.ok_or_else(|| {
            Error::Selection("criterion is infinite at every grid point".into())
        })?;
        Ok(Selection {
            tau: best.tau,
            gamma: best.gamma,
            best: Some(best),
            surface: points,
        })
    }
}

/// Closed-form divergence of the ATN estimator at `(tau, gamma)`.
pub fn atn_divergence(lambdas: &[f64], tau: f64, gamma: f64, n_rows: usize, n_cols: usize) -> Result<f64> {
    check_point(tau, gamma)?;
    Ok(SpectrumKernel::new(lambdas, n_rows, n_cols)?.divergence(tau, gamma))
}

/// SURE of the ATN estimator at `(tau, gamma)` for noise variance `sigma2`.
pub fn sure_atn(
    lambdas: &[f64],
    tau: f64,
    gamma: f64,
    sigma2: f64,
    n_rows: usize,
    n_cols: usize,
) -> Result<SureBreakdown> {
    check_point(tau, gamma)?;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::validation(format!("noise variance must be > 0, got {sigma2}")));
    }
    Ok(SpectrumKernel::new(lambdas, n_rows, n_cols)?.sure(tau, gamma, sigma2))
}

/// GSURE of the ATN estimator at `(tau, gamma)`.
pub fn gsure_atn(lambdas: &[f64], tau: f64, gamma: f64, n_rows: usize, n_cols: usize) -> Result<SureBreakdown> {
    check_point(tau, gamma)?;
    Ok(SpectrumKernel::new(lambdas, n_rows, n_cols)?.gsure(tau, gamma))
}

fn check_point(tau: f64, gamma: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::validation(format!("tau must be finite and > 0, got {tau}")));
    }
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(Error::validation(format!("gamma must be finite and >= 1, got {gamma}")));
    }
    Ok(())
}

/// How `(tau, gamma)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    Fixed { tau: f64, gamma: f64 },
    /// SURE over the full grid; `sigma2` is the known noise variance.
    Sure { sigma2: f64 },
    /// GSURE over the full grid, no noise level needed.
    Gsure,
    /// `tau` pinned to the universal threshold, `gamma` by SURE.
    Universal { sigma2: f64, tau: f64 },
}

impl SelectionRule {
    fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::Fixed { tau, gamma } => {
                if !(tau.is_finite() && tau >= 0.0 && gamma.is_finite() && gamma >= 1.0) {
                    return Err(Error::validation("fixed rule needs tau >= 0 and gamma >= 1"));
                }
            }
            SelectionRule::Sure { sigma2 } => {
                if !(sigma2.is_finite() && sigma2 > 0.0) {
                    return Err(Error::validation("SURE needs a positive noise variance"));
                }
            }
            SelectionRule::Universal { sigma2, tau } => {
                if !(sigma2.is_finite() && sigma2 > 0.0) {
                    return Err(Error::validation("SURE needs a positive noise variance"));
                }
                check_point(tau, 1.0)?;
            }
            SelectionRule::Gsure => {}
        }
        Ok(())
    }
}

/// Result of a grid search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub tau: f64,
    pub gamma: f64,
    /// Criterion at the selected point; `None` for the fixed rule.
    pub best: Option<SureBreakdown>,
    /// Every evaluated point, `tau`-major.
    pub surface: Vec<SureBreakdown>,
}

/// Candidate values for `(tau, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    tau_values: Vec<f64>,
    gamma_values: Vec<f64>,
}

impl SelectionGrid {
    pub fn new(tau_values: Vec<f64>, gamma_values: Vec<f64>) -> Result<Self> {
        if tau_values.is_empty() || gamma_values.is_empty() {
            return Err(Error::validation("selection grid must be nonempty"));
        }
        if tau_values.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::validation("grid tau values must be finite and > 0"));
        }
        if gamma_values.iter().any(|g| !(g.is_finite() && *g >= 1.0)) {
            return Err(Error::validation("grid gamma values must be finite and >= 1"));
        }
        if tau_values.windows(2).any(|w| w[1] <= w[0]) || gamma_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("grid values must be strictly ascending"));
        }
        Ok(Self {
            tau_values,
            gamma_values,
        })
    }

    /// Default grid: 50 log-spaced `tau` in `(lambda_min, lambda_1]` plus a
    /// knot at every singular value in that range, and 20 log-spaced `gamma`
    /// in `[1, 64]`.
    pub fn for_spectrum(lambdas: &[f64]) -> Result<Self> {
        let positive: Vec<f64> = lambdas.iter().copied().filter(|&l| l > 0.0).collect();
        let (Some(&hi), Some(&lo)) = (
            positive.iter().max_by(|a, b| a.total_cmp(b)),
            positive.iter().min_by(|a, b| a.total_cmp(b)),
        ) else {
            return Err(Error::validation("spectrum has no positive singular value"));
        };
        let mut taus: Vec<f64> = log_space(lo, hi, DEFAULT_TAU_POINTS)
            .into_iter()
            .chain(positive.iter().copied())
            .filter(|&t| t > lo && t <= hi)
            .collect();
        if taus.is_empty() {
            taus.push(hi);
        }
        taus.sort_by(|a, b| a.total_cmp(b));
        taus.dedup();
        Self::new(taus, default_gammas())
    }

    /// Same `tau` values with a different `gamma` set (e.g. `[1]` for soft).
    pub fn with_gammas(&self, gamma_values: Vec<f64>) -> Result<Self> {
        Self::new(self.tau_values.clone(), gamma_values)
    }

    pub fn tau_values(&self) -> &[f64] {
        &self.tau_values
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tau_values
            .iter()
            .flat_map(|&t| self.gamma_values.iter().map(move |&g| (t, g)))
    }
}

pub fn default_gammas() -> Vec<f64> {
    log_space(1.0, GAMMA_MAX, DEFAULT_GAMMA_POINTS)
}

/// `count` points from `lo` to `hi` inclusive, evenly spaced in log scale.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k == count - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Grid search over `(tau, gamma)` on the spectrum of `dec`.
pub fn grid_select(dec: &SpectralDecomposition, rule: &SelectionRule, grid: &SelectionGrid) -> Result<Selection> {
    SpectrumKernel::from_decomposition(dec)?.select(rule, grid)
}

/// ATN shrunk values at the selected point.
pub fn apply_selection(lambdas: &[f64], selection: &Selection) -> Result<Vec<f64>> {
    atn(lambdas, selection.tau, selection.gamma)
}

/// Noise level from the median singular value, calibrated by the
/// Marchenko-Pastur median: `median(lambda) / sqrt(max(N, P) mu_beta)`.
pub fn estimate_sigma(lambdas: &[f64], n_rows: usize, n_cols: usize) -> Result<f64> {
    if lambdas.len() < 2 {
        return Err(Error::Estimation(
            "at least two singular values are needed to estimate the noise level".into(),
        ));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    if median.is_nan() || median <= 0.0 {
        return Err(Error::Estimation("median singular value is zero".into()));
    }
    let mu = mp_median(AspectRatio::from_shape(n_rows, n_cols).value())?;
    Ok(median / ((n_rows.max(n_cols) as f64) * mu).sqrt())
}

/// Universal threshold and how it was estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalThresholdTable {
    pub n_rows: usize,
    pub n_cols: usize,
    pub sigma: f64,
    /// Tail level `1 / sqrt(log max(N, P))`.
    pub alpha_level: f64,
    pub n_simulations: usize,
    pub seed: u64,
    pub tau_universal: f64,
}

/// Tail level of the universal threshold.
pub fn universal_alpha(n_rows: usize, n_cols: usize) -> Result<f64> {
    let big = n_rows.max(n_cols) as f64;
    let alpha = 1.0 / big.ln().sqrt();
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!(
            "universal threshold needs max(N, P) >= 3, got {n_rows}x{n_cols}"
        )));
    }
    Ok(alpha)
}

/// Largest singular values of `n_sim` independent `n_rows x n_cols`
/// standard Gaussian matrices; stream `k` is seeded from `(seed, k)`.
pub fn null_top_singular_values(n_rows: usize, n_cols: usize, n_sim: usize, seed: u64) -> Vec<f64> {
    (0..n_sim)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed, &[k as u64]);
            let x = DMatrix::<f64>::from_fn(n_rows, n_cols, |_, _| StandardNormal.sample(&mut rng));
            largest_singular_value(&x)
        })
        .collect()
}

/// Linear-interpolation quantile of unsorted data (order statistics at
/// `h = (n - 1) q`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn unit_universal_threshold(n_rows: usize, n_cols: usize, n_sim: usize, seed: u64) -> Result<f64> {
    let alpha = universal_alpha(n_rows, n_cols)?;
    if n_sim < 100 {
        return Err(Error::validation(format!(
            "universal threshold needs at least 100 simulations, got {n_sim}"
        )));
    }
    Ok(quantile(&null_top_singular_values(n_rows, n_cols, n_sim, seed), 1.0 - alpha))
}

/// `sigma` times the empirical `(1 - alpha)` quantile of the top singular
/// value of an `n_rows x n_cols` pure-noise matrix.
pub fn universal_threshold(
    n_rows: usize,
    n_cols: usize,
    sigma: f64,
    n_sim: usize,
    seed: u64,
) -> Result<UniversalThresholdTable> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::validation(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let unit = unit_universal_threshold(n_rows, n_cols, n_sim, seed)?;
    Ok(UniversalThresholdTable {
        n_rows,
        n_cols,
        sigma,
        alpha_level: universal_alpha(n_rows, n_cols)?,
        n_simulations: n_sim,
        seed,
        tau_universal: sigma * unit,
    })
}

/// Memoizes unit-noise universal thresholds by `(N, P, n_sim, seed)`.
#[derive(Debug, Default)]
pub struct UniversalThresholdCache {
    entries: Mutex<HashMap<(usize, usize, usize, u64), f64>>,
}

impl UniversalThresholdCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Threshold at unit noise; multiply by `sigma` for the real one.
    pub fn unit_threshold(&self, n_rows: usize, n_cols: usize, n_sim: usize, seed: u64) -> Result<f64> {
        let key = (n_rows, n_cols, n_sim, seed);
        if let Some(&v) = self.entries.lock().expect("cache lock poisoned").get(&key) {
            return Ok(v);
        }
        let v = unit_universal_threshold(n_rows, n_cols, n_sim, seed)?;
        self.entries.lock().expect("cache lock poisoned").insert(key, v);
        Ok(v)
    }
}
