//! Singular value shrinkers.
//!
//! Every rule maps the empirical singular values `lambdas` (decreasing,
//! nonnegative) to shrunk values `d_hat` with `0 <= d_hat[i] <= lambdas[i]`.
//! The singular vectors are left untouched; see [`crate::spectral::reconstruct`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `min(N, P) / max(N, P)`, the shape parameter of the Marchenko-Pastur law.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::validation(format!(
                "aspect ratio must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Self(beta))
    }

    pub fn from_shape(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "matrix dimensions must be positive");
        Self(n_rows.min(n_cols) as f64 / n_rows.max(n_cols) as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Edge of the noise bulk in units of `sigma * sqrt(max(N, P))`.
    pub fn bulk_edge(self) -> f64 {
        1.0 + self.0.sqrt()
    }
}

/// Constant `c` subtracted as `c / lambda^2` by the two-step shrinker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseEnergy {
    /// Fixed `c` for every component. `Constant(sigma^2)` is the literal rule.
    Constant(f64),
    /// `c_i = (N + P) sigma^2 + N P sigma^4 / lambda_i^2`, the squared
    /// singular value inflation of a spike under i.i.d. noise.
    SpikedInflation {
        sigma: f64,
        n_rows: usize,
        n_cols: usize,
    },
}

impl NoiseEnergy {
    pub fn literal(sigma: f64) -> Self {
        NoiseEnergy::Constant(sigma * sigma)
    }

    pub fn spiked(sigma: f64, n_rows: usize, n_cols: usize) -> Self {
        NoiseEnergy::SpikedInflation {
            sigma,
            n_rows,
            n_cols,
        }
    }

    fn at(&self, lambda: f64) -> f64 {
        match *self {
            NoiseEnergy::Constant(c) => c,
            NoiseEnergy::SpikedInflation {
                sigma,
                n_rows,
                n_cols,
            } => {
                let s2 = sigma * sigma;
                (n_rows + n_cols) as f64 * s2 + (n_rows * n_cols) as f64 * s2 * s2 / (lambda * lambda)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseEnergy::Constant(c) => c.is_finite() && c >= 0.0,
            NoiseEnergy::SpikedInflation { sigma, .. } => sigma.is_finite() && sigma >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation("noise energy must be finite and nonnegative"))
        }
    }
}

/// Noise level input of the optimal shrinker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Known(f64),
    Unknown,
}

/// One shrinkage rule with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ShrinkerSpec {
    HardRank { rank: usize },
    HardThreshold { tau: f64 },
    Soft { tau: f64 },
    Atn { tau: f64, gamma: f64 },
    OptimalShrink { noise: NoiseLevel },
    TwoStep { rank: usize, noise_energy: NoiseEnergy },
    WeightedClosedForm { alpha: f64, omegas: Vec<f64> },
}

impl ShrinkerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ShrinkerSpec::HardRank { .. } => Ok(()),
            ShrinkerSpec::HardThreshold { tau } | ShrinkerSpec::Soft { tau } => check_tau(*tau),
            ShrinkerSpec::Atn { tau, gamma } => {
                check_tau(*tau)?;
                check_gamma(*gamma)
            }
            ShrinkerSpec::OptimalShrink { noise } => match noise {
                NoiseLevel::Known(sigma) => check_sigma(*sigma),
                NoiseLevel::Unknown => Ok(()),
            },
            ShrinkerSpec::TwoStep { noise_energy, .. } => noise_energy.validate(),
            ShrinkerSpec::WeightedClosedForm { alpha, omegas } => check_weights(*alpha, omegas),
        }
    }

    /// Applies the rule to the spectrum of an `n_rows x n_cols` matrix.
    pub fn apply(&self, lambdas: &[f64], n_rows: usize, n_cols: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            ShrinkerSpec::HardRank { rank } => hard_by_rank(lambdas, *rank),
            ShrinkerSpec::HardThreshold { tau } => hard_by_threshold(lambdas, *tau),
            ShrinkerSpec::Soft { tau } => soft(lambdas, *tau),
            ShrinkerSpec::Atn { tau, gamma } => atn(lambdas, *tau, *gamma),
            ShrinkerSpec::OptimalShrink {
                noise: NoiseLevel::Known(sigma),
            } => optimal_shrink(lambdas, n_rows, n_cols, *sigma),
            ShrinkerSpec::OptimalShrink {
                noise: NoiseLevel::Unknown,
            } => optimal_shrink_sigma_unknown(lambdas, n_rows, n_cols),
            ShrinkerSpec::TwoStep { rank, noise_energy } => two_step(lambdas, *rank, noise_energy),
            ShrinkerSpec::WeightedClosedForm { alpha, omegas } => {
                weighted_closed_form(lambdas, *alpha, omegas)
            }
        }
    }

    /// Whether `d_hat[i]` depends on `lambdas[i]` alone, which makes the rule
    /// plottable as a curve.
    pub fn is_pointwise(&self) -> bool {
        matches!(
            self,
            ShrinkerSpec::HardThreshold { .. }
                | ShrinkerSpec::Soft { .. }
                | ShrinkerSpec::Atn { .. }
                | ShrinkerSpec::OptimalShrink {
                    noise: NoiseLevel::Known(_)
                }
        )
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("threshold must be finite and >= 0, got {tau}")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("gamma must be finite and >= 1, got {gamma}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("sigma must be finite and > 0, got {sigma}")))
    }
}

fn check_weights(alpha: f64, omegas: &[f64]) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::validation(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if omegas.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::validation("weights must be finite and nonnegative"));
    }
    if omegas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("weights must be weakly increasing"));
    }
    Ok(())
}

/// Truncated SVD: keep the `rank` leading values.
pub fn hard_by_rank(lambdas: &[f64], rank: usize) -> Result<Vec<f64>> {
    if rank > lambdas.len() {
        return Err(Error::validation(format!(
            "rank {rank} exceeds the {} available components",
            lambdas.len()
        )));
    }
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| if i < rank { l } else { 0.0 })
        .collect())
}

/// Keeps `lambda_i` when `lambda_i >= tau`.
pub fn hard_by_threshold(lambdas: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(lambdas
        .iter()
        .map(|&l| if l >= tau { l } else { 0.0 })
        .collect())
}

/// `lambda_i * max(1 - tau / lambda_i, 0)`.
pub fn soft(lambdas: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(lambdas.iter().map(|&l| soft_one(l, tau)).collect())
}

fn soft_one(lambda: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return lambda;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    lambda * (1.0 - tau / lambda).max(0.0)
}

/// Multiplicative ATN factor `max(1 - (tau / lambda)^gamma, 0)`.
pub(crate) fn atn_factor(lambda: f64, tau: f64, gamma: f64) -> f64 {
    if tau == 0.0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    (1.0 - (tau / lambda).powf(gamma)).max(0.0)
}

/// Adaptive trace norm shrinker `lambda_i * max(1 - (tau / lambda_i)^gamma, 0)`.
///
/// `gamma = 1` is soft thresholding; large `gamma` approaches hard
/// thresholding at `tau`.
pub fn atn(lambdas: &[f64], tau: f64, gamma: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    check_gamma(gamma)?;
    Ok(lambdas
        .iter()
        .map(|&l| {
            if tau == 0.0 {
                l
            } else {
                l * atn_factor(l, tau, gamma)
            }
        })
        .collect())
}

/// Frobenius-optimal shrinker for a known entrywise noise level `sigma`.
pub fn optimal_shrink(lambdas: &[f64], n_rows: usize, n_cols: usize, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let beta = AspectRatio::from_shape(n_rows, n_cols).value();
    let scale = sigma * (n_rows.max(n_cols) as f64).sqrt();
    let edge = 1.0 + beta.sqrt();
    Ok(lambdas
        .iter()
        .map(|&l| {
            let y = l / scale;
            if y < edge {
                return 0.0;
            }
            let inner = (y * y - beta - 1.0).powi(2) - 4.0 * beta;
            scale * inner.max(0.0).sqrt() / y
        })
        .collect())
}

/// [`optimal_shrink`] with `sigma` replaced by the median-based estimate.
pub fn optimal_shrink_sigma_unknown(lambdas: &[f64], n_rows: usize, n_cols: usize) -> Result<Vec<f64>> {
    let sigma = crate::selection::estimate_sigma(lambdas, n_rows, n_cols)?;
    optimal_shrink(lambdas, n_rows, n_cols, sigma)
}

/// Keep the `rank` leading values and shrink them by `lambda (1 - c / lambda^2)`.
pub fn two_step(lambdas: &[f64], rank: usize, noise_energy: &NoiseEnergy) -> Result<Vec<f64>> {
    noise_energy.validate()?;
    if rank > lambdas.len() {
        return Err(Error::validation(format!(
            "rank {rank} exceeds the {} available components",
            lambdas.len()
        )));
    }
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if i >= rank || l <= 0.0 {
                return 0.0;
            }
            (l * (1.0 - noise_energy.at(l) / (l * l))).max(0.0)
        })
        .collect())
}

/// Solution of the weighted trace norm problem, `max(lambda_i - alpha w_i, 0)`.
/// The weights must be weakly increasing.
pub fn weighted_closed_form(lambdas: &[f64], alpha: f64, omegas: &[f64]) -> Result<Vec<f64>> {
    if omegas.len() != lambdas.len() {
        return Err(Error::validation(format!(
            "expected {} weights, got {}",
            lambdas.len(),
            omegas.len()
        )));
    }
    check_weights(alpha, omegas)?;
    Ok(lambdas
        .iter()
        .zip(omegas)
        .map(|(&l, &w)| (l - alpha * w).max(0.0))
        .collect())
}

/// Asymptotically MSE-optimal hard threshold coefficient for known noise,
/// in units of `sigma * sqrt(max(N, P))`. Equals `4 / sqrt(3)` for square
/// matrices.
pub fn optimal_hard_coefficient(beta: f64) -> Result<f64> {
    let beta = AspectRatio::new(beta)?.value();
    let b1 = beta + 1.0;
    Ok((2.0 * b1 + 8.0 * beta / (b1 + (beta * beta + 14.0 * beta + 1.0).sqrt())).sqrt())
}

/// Coefficient `w(beta)` of the unknown-noise hard threshold
/// `tau = w(beta) * median(lambda)`.
pub fn median_hard_coefficient(beta: f64) -> Result<f64> {
    Ok(optimal_hard_coefficient(beta)? / mp_median(beta)?.sqrt())
}

/// Marchenko-Pastur density of `lambda^2 / max(N, P)` at unit noise.
pub fn mp_density(beta: f64, x: f64) -> f64 {
    let (lo, hi) = mp_support(beta);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * beta * x)
}

pub fn mp_support(beta: f64) -> (f64, f64) {
    let r = beta.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Marchenko-Pastur CDF.
///
/// Integrates in the angle `theta` with `x = a + (b - a)(1 - cos theta) / 2`,
/// which removes the square-root endpoints and the `1/sqrt(x)` pole at `beta = 1`.
pub fn mp_cdf(beta: f64, x: f64) -> Result<f64> {
    let beta = AspectRatio::new(beta)?.value();
    let (lo, hi) = mp_support(beta);
    if x <= lo {
        return Ok(0.0);
    }
    if x >= hi {
        return Ok(1.0);
    }
    let half = 0.5 * (hi - lo);
    let theta_max = (1.0 - (x - lo) / half).clamp(-1.0, 1.0).acos();
    let integrand = |theta: f64| {
        let s = theta.sin();
        // 1 - cos(theta) without cancellation near zero
        let xt = lo + 2.0 * half * (0.5 * theta).sin().powi(2);
        if xt <= 0.0 {
            // beta = 1 limit at theta -> 0: (half^2 s^2) / (2 pi x) -> half / pi.
            return half / PI;
        }
        half * half * s * s / (2.0 * PI * beta * xt)
    };
    Ok(adaptive_simpson(&integrand, 0.0, theta_max, 1e-13, 30).clamp(0.0, 1.0))
}

/// Median of the Marchenko-Pastur law with ratio `beta`.
pub fn mp_median(beta: f64) -> Result<f64> {
    let beta = AspectRatio::new(beta)?.value();
    let (mut lo, mut hi) = mp_support(beta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mp_cdf(beta, mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Computation(format!(
        "Marchenko-Pastur median did not converge for beta = {beta}"
    )))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        let tol = (0.5 * tol).max(1e-16);
        step(f, a, m, fa, flm, fm, left, tol, depth - 1) + step(f, m, b, fm, frm, fb, right, tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}
