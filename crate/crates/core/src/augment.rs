//! Appending a random sphere block `X0` to an arbitrary design `X`.
//!
//! The index of `[X, X0]` is at most that of `X0`, which is small with high
//! probability once `80·log(p0)/p0` is below the required threshold. The
//! block width `p0` is the smallest integer meeting
//!
//! ```text
//! 80·log(p0)/p0 < L·ρ_−·σ*_min / (ν·n·σ*_max)
//! ```

use serde::Serialize;

use crate::bounds::{lambda_min_theorem, prediction_bound, BoundReport, SigmaSource, TheoremInputs};
use crate::error::{Error, Result};
use crate::lasso::{fit_with, LassoFit, SolverOptions};
use crate::matrix::{coherence, coherence_sigma_bounds, concat, dot, DesignMatrix};
use crate::sphere::{sample_sphere_matrix, Seed};

pub const DEFAULT_L: f64 = 0.5;
pub const DEFAULT_P0_CAP: usize = 1_000_000;

/// Smallest admissible block width, `⌈exp(6/√(2π))⌉ = 11`.
pub fn p0_floor() -> usize {
    (6.0 / (2.0 * std::f64::consts::PI).sqrt()).exp().ceil() as usize
}

/// `80·log(p0)/p0`, the high-probability bound on the index of a sphere block.
pub fn sphere_gamma_bound(p0: usize) -> f64 {
    80.0 * (p0 as f64).ln() / p0 as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AugmentConfig {
    pub l: f64,
    pub nu: f64,
    pub rho_minus: f64,
    pub sigma_min_star: f64,
    pub sigma_max_star: f64,
    pub sigma_source: SigmaSource,
    pub p0_cap: usize,
    pub seed: Seed,
    /// Forces the block width, bypassing [`choose_p0`]. `Some(0)` reproduces the plain LASSO.
    pub p0_override: Option<usize>,
}

impl AugmentConfig {
    pub fn new(
        l: f64,
        nu: f64,
        rho_minus: f64,
        sigma_min_star: f64,
        sigma_max_star: f64,
        seed: Seed,
    ) -> Result<Self> {
        let cfg = Self {
            l,
            nu,
            rho_minus,
            sigma_min_star,
            sigma_max_star,
            sigma_source: SigmaSource::Supplied,
            p0_cap: DEFAULT_P0_CAP,
            seed,
            p0_override: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Proxies from the coherence sandwich: `σ*_min` at `t = s`, `σ*_max` at `t = n`.
    pub fn from_coherence(x: &DesignMatrix, s: usize, l: f64, nu: f64, rho_minus: f64, seed: Seed) -> Result<Self> {
        let mu = coherence(x)?;
        let mut cfg = Self::new(
            l,
            nu,
            rho_minus,
            coherence_sigma_bounds(mu, s).sigma_min,
            coherence_sigma_bounds(mu, x.rows()).sigma_max,
            seed,
        )?;
        cfg.sigma_source = SigmaSource::CoherenceSandwich;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l < 1.0) {
            return Err(Error::OutOfRange {
                name: "L",
                value: self.l,
                expected: "(0, 1)",
            });
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::OutOfRange {
                name: "nu",
                value: self.nu,
                expected: "> 0",
            });
        }
        if !(self.rho_minus > 0.0 && self.rho_minus < 1.0) {
            return Err(Error::OutOfRange {
                name: "rho_minus",
                value: self.rho_minus,
                expected: "(0, 1)",
            });
        }
        if !(self.sigma_max_star > 0.0 && self.sigma_max_star.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sigma_max_star",
                value: self.sigma_max_star,
                expected: "> 0",
            });
        }
        if !(self.sigma_min_star >= 0.0 && self.sigma_min_star <= self.sigma_max_star) {
            return Err(Error::OutOfRange {
                name: "sigma_min_star",
                value: self.sigma_min_star,
                expected: "0 <= sigma_min_star <= sigma_max_star",
            });
        }
        Ok(())
    }

    /// Right-hand side `L·ρ_−·σ*_min / (ν·n·σ*_max)`.
    pub fn threshold(&self, n: usize) -> f64 {
        self.l * self.rho_minus * self.sigma_min_star / (self.nu * n as f64 * self.sigma_max_star)
    }
}

/// Smallest `p0 ≥ 11` with `80·log(p0)/p0 < threshold`, by linear scan
/// (the left side decreases for `p0 ≥ 3`).
pub fn choose_p0_for_threshold(threshold: f64, cap: usize) -> Result<usize> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::Infeasible(format!("threshold {threshold} is not positive")));
    }
    let floor = p0_floor();
    (floor..=cap)
        .find(|&p0| sphere_gamma_bound(p0) < threshold)
        .ok_or_else(|| Error::Infeasible(format!("no p0 <= {cap} meets threshold {threshold:.6e}")))
}

pub fn choose_p0(config: &AugmentConfig, n: usize) -> Result<usize> {
    config.validate()?;
    choose_p0_for_threshold(config.threshold(n), config.p0_cap)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AugmentedFit {
    pub fit: LassoFit,
    pub beta_x: Vec<f64>,
    pub beta_0: Vec<f64>,
    pub p0: usize,
    pub seed: Seed,
    /// The appended block.
    #[serde(skip)]
    pub x0: DesignMatrix,
}

impl AugmentedFit {
    pub fn design(&self, x: &DesignMatrix) -> Result<DesignMatrix> {
        concat(x, &self.x0)
    }
}

fn resolve_p0(config: &AugmentConfig, n: usize) -> Result<usize> {
    match config.p0_override {
        Some(p0) => Ok(p0),
        None => choose_p0(config, n),
    }
}

pub fn fit_augmented(x: &DesignMatrix, y: &[f64], lambda: f64, config: &AugmentConfig) -> Result<AugmentedFit> {
    fit_augmented_with(x, y, lambda, config, &SolverOptions::default())
}

/// Samples `X0` from `config.seed`, fits the LASSO on `[X, X0]` and splits the
/// coefficients. A warm start in `opts`, if given, must have length `p`: it is
/// zero-padded onto the augmented problem.
pub fn fit_augmented_with(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    config: &AugmentConfig,
    opts: &SolverOptions,
) -> Result<AugmentedFit> {
    x.require_normalized()?;
    config.validate()?;
    let p0 = resolve_p0(config, x.rows())?;
    let x0 = sample_sphere_matrix(x.rows(), p0, config.seed)?;
    let sharp = concat(x, &x0)?;
    let mut opts = opts.clone();
    if let Some(w) = opts.warm_start.take() {
        if w.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                got: w.len(),
            });
        }
        let mut padded = w;
        padded.resize(sharp.cols(), 0.0);
        opts.warm_start = Some(padded);
    }
    let fit = fit_with(&sharp, y, lambda, &opts)?;
    let (bx, b0) = fit.beta_hat.split_at(x.cols());
    Ok(AugmentedFit {
        beta_x: bx.to_vec(),
        beta_0: b0.to_vec(),
        fit,
        p0,
        seed: config.seed,
        x0,
    })
}

/// `B'`, `λ_min` and `C'` with `p` replaced by `p + p0` and `γ` by `gamma_bound`.
pub fn lambda_min_augmented(
    config: &AugmentConfig,
    gamma_bound: f64,
    n: usize,
    p: usize,
    p0: usize,
    sigma: f64,
    alpha: f64,
) -> Result<BoundReport> {
    config.validate()?;
    let mut report = lambda_min_theorem(&augmented_inputs(config, gamma_bound, n, p, p0, sigma, alpha))?;
    report
        .notes
        .push(format!("augmented: p + p0 = {} + {p0}; gamma bound {gamma_bound:.6e}", p));
    Ok(report)
}

pub fn augmented_inputs(
    config: &AugmentConfig,
    gamma_bound: f64,
    n: usize,
    p: usize,
    p0: usize,
    sigma: f64,
    alpha: f64,
) -> TheoremInputs {
    TheoremInputs {
        sigma,
        alpha,
        p: p + p0,
        nu: config.nu,
        n,
        rho_minus: config.rho_minus,
        sigma_min_s: config.sigma_min_star,
        sigma_max_star: config.sigma_max_star,
        gamma: gamma_bound,
        sigma_source: config.sigma_source,
    }
}

/// `s·C'(λ)`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_prediction_bound(
    config: &AugmentConfig,
    n: usize,
    p: usize,
    p0: usize,
    sigma: f64,
    alpha: f64,
    lambda: f64,
    s: usize,
) -> Result<f64> {
    let inputs = augmented_inputs(config, sphere_gamma_bound(p0.max(2)), n, p, p0, sigma, alpha);
    prediction_bound(&inputs, lambda, s)
}

/// `½‖X♯(β̂♯ − [β; 0])‖²`.
pub fn augmented_prediction_error(x_sharp: &DesignMatrix, beta_hat_sharp: &[f64], beta_pad: &[f64]) -> Result<f64> {
    for len in [beta_hat_sharp.len(), beta_pad.len()] {
        if len != x_sharp.cols() {
            return Err(Error::DimensionMismatch {
                expected: x_sharp.cols(),
                got: len,
            });
        }
    }
    let diff: Vec<f64> = beta_hat_sharp.iter().zip(beta_pad).map(|(a, b)| a - b).collect();
    let e = x_sharp.mul_vec(&diff);
    Ok(0.5 * dot(&e, &e))
}

/// `½‖X(β̂_X − β) + X0·β̂_0‖²`, the same quantity written on the original design.
pub fn restricted_prediction_error(
    x: &DesignMatrix,
    x0: &DesignMatrix,
    beta_x: &[f64],
    beta_0: &[f64],
    beta: &[f64],
) -> Result<f64> {
    if beta_x.len() != x.cols() || beta.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            got: beta_x.len().min(beta.len()),
        });
    }
    if beta_0.len() != x0.cols() {
        return Err(Error::DimensionMismatch {
            expected: x0.cols(),
            got: beta_0.len(),
        });
    }
    let diff: Vec<f64> = beta_x.iter().zip(beta).map(|(a, b)| a - b).collect();
    let mut e = x.mul_vec(&diff);
    for (a, b) in e.iter_mut().zip(x0.mul_vec(beta_0)) {
        *a += b;
    }
    Ok(0.5 * dot(&e, &e))
}
