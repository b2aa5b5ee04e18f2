//! The λ rule and prediction bound attached to the γ index.
//!
//! With `νn` the sparsity budget, `σ_min(X_S)` for the true support and
//! `σ*_max` bounding `σ_max(X_T)` over `|T| ≤ n`:
//!
//! ```text
//! condition:  ν·γ ≤ ρ_−·σ_min(X_S) / (n·σ*_max)
//! B        =  νn·γ / (ρ_−·σ_min(X_S) − νn·γ·σ*_max)
//! λ_min    =  σ·(B·σ*_max·√(2α log p + log 2νn) + √((2α+1) log p + log 2))
//! C(λ)     =  (λ + σ√((2α+1) log p + log 2))·(σ√(2α log p + log 2νn) + λ) / (ρ_−·σ_min(X_S))
//! ½‖X(β̂ − β)‖² ≤ s·C(λ)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the restricted singular values fed to the bound came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaSource {
    /// Computed exactly on the relevant submatrices.
    Exact,
    /// The coherence sandwich `1 ∓ μ√t`.
    CoherenceSandwich,
    /// Exact `σ_min(X_S)`; `σ*_max` from the tighter of the coherence
    /// sandwich and the full spectral norm.
    ExactMinSpectralMax,
    /// Supplied by the caller.
    Supplied,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub sigma: f64,
    pub alpha: f64,
    pub p: usize,
    pub nu: f64,
    pub n: usize,
    pub rho_minus: f64,
    pub sigma_min_s: f64,
    pub sigma_max_star: f64,
    pub gamma: f64,
    pub sigma_source: SigmaSource,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "> 0",
        })
    }
}

impl TheoremInputs {
    pub fn validate(&self) -> Result<()> {
        // σ = 0 is allowed: the noiseless limit of every formula is well defined.
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sigma",
                value: self.sigma,
                expected: ">= 0",
            });
        }
        positive("alpha", self.alpha)?;
        positive("nu", self.nu)?;
        positive("sigma_max_star", self.sigma_max_star)?;
        if self.p < 2 {
            return Err(Error::OutOfRange {
                name: "p",
                value: self.p as f64,
                expected: "p >= 2",
            });
        }
        if self.n == 0 {
            return Err(Error::OutOfRange {
                name: "n",
                value: 0.0,
                expected: "n >= 1",
            });
        }
        if !(self.rho_minus > 0.0 && self.rho_minus < 1.0) {
            return Err(Error::OutOfRange {
                name: "rho_minus",
                value: self.rho_minus,
                expected: "(0, 1)",
            });
        }
        if !(self.sigma_min_s >= 0.0 && self.sigma_min_s.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sigma_min_s",
                value: self.sigma_min_s,
                expected: ">= 0",
            });
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: self.gamma,
                expected: ">= 0",
            });
        }
        Ok(())
    }

    pub fn nu_n(&self) -> f64 {
        self.nu * self.n as f64
    }

    /// `√((2α+1) log p + log 2)`.
    pub fn support_term(&self) -> f64 {
        support_term(self.alpha, self.p)
    }

    /// `√(2α log p + log 2νn)`.
    pub fn off_support_term(&self) -> f64 {
        off_support_term(self.alpha, self.p, self.nu_n())
    }
}

pub fn support_term(alpha: f64, p: usize) -> f64 {
    ((2.0 * alpha + 1.0) * (p as f64).ln() + 2f64.ln()).sqrt()
}

pub fn off_support_term(alpha: f64, p: usize, nu_n: f64) -> f64 {
    (2.0 * alpha * (p as f64).ln() + (2.0 * nu_n).ln()).sqrt()
}

/// `σ·(B·σ*_max·√(2α log p + log 2νn) + √((2α+1) log p + log 2))`.
pub fn lambda_from_b(sigma: f64, b: f64, sigma_max_star: f64, alpha: f64, p: usize, nu_n: f64) -> f64 {
    sigma * (b * sigma_max_star * off_support_term(alpha, p, nu_n) + support_term(alpha, p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub precondition_nu_ok: bool,
    /// `ν·γ`.
    pub nu_lhs: f64,
    /// `ρ_−·σ_min(X_S) / (n·σ*_max)`.
    pub nu_rhs: f64,
    /// `ρ_−·σ_min(X_S) − νn·γ·σ*_max`; `B` exists iff this is positive.
    pub denominator: f64,
    pub b: Option<f64>,
    pub lambda_min: Option<f64>,
    /// `C` evaluated at `lambda_min`.
    pub c: Option<f64>,
    /// Probability as stated with the theorem, `1 − p^{−α}`.
    pub probability_headline: f64,
    /// Probability from the union bound over the three events, `1 − 3p^{−α}`.
    pub probability_union_bound: f64,
    pub sigma_source: SigmaSource,
    pub notes: Vec<String>,
}

/// Checks the γ condition and evaluates `B`, `λ_min` and `C(λ_min)`.
pub fn lambda_min_theorem(inputs: &TheoremInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let nu_n = inputs.nu_n();
    let nu_lhs = inputs.nu * inputs.gamma;
    let nu_rhs = inputs.rho_minus * inputs.sigma_min_s / (inputs.n as f64 * inputs.sigma_max_star);
    let denominator = inputs.rho_minus * inputs.sigma_min_s - nu_n * inputs.gamma * inputs.sigma_max_star;
    let ok = nu_lhs <= nu_rhs && denominator > 0.0;

    let mut notes = Vec::new();
    let (b, lambda_min, c) = if denominator > 0.0 {
        let b = nu_n * inputs.gamma / denominator;
        let lambda = lambda_from_b(inputs.sigma, b, inputs.sigma_max_star, inputs.alpha, inputs.p, nu_n);
        (Some(b), Some(lambda), Some(c_constant(inputs, lambda)))
    } else {
        notes.push("B undefined: rho_minus*sigma_min_s <= nu*n*gamma*sigma_max_star".into());
        (None, None, None)
    };
    if !ok {
        notes.push(format!("gamma condition fails: nu*gamma = {nu_lhs:.6e} > {nu_rhs:.6e}"));
    }
    let tail = (inputs.p as f64).powf(-inputs.alpha);
    Ok(BoundReport {
        precondition_nu_ok: ok,
        nu_lhs,
        nu_rhs,
        denominator,
        b,
        lambda_min,
        c,
        probability_headline: 1.0 - tail,
        probability_union_bound: 1.0 - 3.0 * tail,
        sigma_source: inputs.sigma_source,
        notes,
    })
}

/// `C(λ)`.
pub fn c_constant(inputs: &TheoremInputs, lambda: f64) -> f64 {
    (lambda + inputs.sigma * inputs.support_term()) * (inputs.sigma * inputs.off_support_term() + lambda)
        / (inputs.rho_minus * inputs.sigma_min_s)
}

/// `s·C(λ)`, the bound on `½‖X(β̂ − β)‖²`. Requires `s ≤ νn`.
pub fn prediction_bound(inputs: &TheoremInputs, lambda: f64, s: usize) -> Result<f64> {
    inputs.validate()?;
    let nu_n = inputs.nu_n();
    if s as f64 > nu_n {
        return Err(Error::SparsityTooLarge { s, nu_n });
    }
    positive("lambda", lambda)?;
    Ok(s as f64 * c_constant(inputs, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TheoremInputs {
        TheoremInputs {
            sigma: 1.0,
            alpha: 1.0,
            p: 100,
            nu: 1.0,
            n: 10,
            rho_minus: 0.5,
            sigma_min_s: 1.0,
            sigma_max_star: 1.5,
            gamma: 0.0,
            sigma_source: SigmaSource::Supplied,
        }
    }

    #[test]
    fn vanishing_gamma() {
        let r = lambda_min_theorem(&base()).unwrap();
        assert!(r.precondition_nu_ok);
        assert_eq!(r.b, Some(0.0));
        let expected = (3.0 * 100f64.ln() + 2f64.ln()).sqrt();
        assert!((r.lambda_min.unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_denominator_flags() {
        let mut i = base();
        i.gamma = 1.0;
        let r = lambda_min_theorem(&i).unwrap();
        assert!(!r.precondition_nu_ok);
        assert!(r.denominator <= 0.0);
        assert_eq!(r.b, None);
        assert_eq!(r.lambda_min, None);
    }

    #[test]
    fn b_one_half_instance() {
        // νn = 10, ρσ_min = 0.5, σ*_max = 1.5: B = 10γ/(0.5 − 15γ) = 0.5 at γ = 1/70.
        let mut i = base();
        i.gamma = 1.0 / 70.0;
        let r = lambda_min_theorem(&i).unwrap();
        assert!(r.precondition_nu_ok);
        assert!((r.b.unwrap() - 0.5).abs() < 1e-14);
        // Second evaluation path, written out longhand.
        let l = (1.0f64 * 100.0).ln();
        let oracle = 1.0 * (0.5 * 1.5 * (2.0 * l + 20f64.ln()).sqrt() + (3.0 * l + 2f64.ln()).sqrt());
        assert!((r.lambda_min.unwrap() - oracle).abs() < 1e-12);
        assert_eq!(r.probability_headline, 0.99);
        assert!((r.probability_union_bound - 0.97).abs() < 1e-15);
    }

    #[test]
    fn bound_linear_in_s_and_increasing_in_lambda() {
        let i = base();
        let b1 = prediction_bound(&i, 0.7, 2).unwrap();
        let b2 = prediction_bound(&i, 0.7, 4).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12 * b2);
        assert!(prediction_bound(&i, 1.4, 2).unwrap() > b1);
        assert!(matches!(prediction_bound(&i, 0.7, 11), Err(Error::SparsityTooLarge { .. })));
    }

    #[test]
    fn bound_numeric_instance() {
        let i = TheoremInputs {
            sigma: 0.3,
            alpha: 2.0,
            p: 500,
            nu: 0.25,
            n: 40,
            rho_minus: 0.6,
            sigma_min_s: 0.8,
            sigma_max_star: 2.0,
            gamma: 0.001,
            sigma_source: SigmaSource::Supplied,
        };
        let lambda = 1.1;
        let lp = 500f64.ln();
        let left = lambda + 0.3 * (5.0 * lp + 2f64.ln()).sqrt();
        let right = 0.3 * (4.0 * lp + 20f64.ln()).sqrt() + lambda;
        let oracle = 3.0 * left * right / (0.6 * 0.8);
        assert!((prediction_bound(&i, lambda, 3).unwrap() - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut i = base();
        i.rho_minus = 1.0;
        assert!(lambda_min_theorem(&i).is_err());
        let mut i = base();
        i.sigma = -1.0;
        assert!(lambda_min_theorem(&i).is_err());
    }
}
