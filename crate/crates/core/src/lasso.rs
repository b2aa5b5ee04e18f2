//! LASSO, `argmin_β ½‖y − Xβ‖² + λ‖β‖₁`, by cyclic coordinate descent.
//!
//! Columns are unit-norm, so the exact minimizer along coordinate `j` is the
//! soft-threshold of `β_j + X_jᵗ r` at `λ`, with `r` the current residual.
//! Convergence is certified by the KKT residual, not by step sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, symmetric_eigenvalues, DesignMatrix, IndexSet};

/// `|β_j|` above which a coefficient counts as part of the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Relative slack allowed on the per-sweep objective decrease (round-off).
const MONOTONE_SLACK: f64 = 1e-13;

#[inline]
pub fn soft_threshold(t: f64, lambda: f64) -> f64 {
    if t > lambda {
        t - lambda
    } else if t < -lambda {
        t + lambda
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub support: IndexSet,
    pub sweeps: usize,
    /// Objective at the start and after every sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn new(tol: f64, max_sweeps: usize) -> Self {
        Self {
            tol,
            max_sweeps,
            warm_start: None,
        }
    }
}

pub fn objective(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let r = residual(x, y, beta);
    0.5 * dot(&r, &r) + lambda * l1(beta)
}

fn l1(beta: &[f64]) -> f64 {
    beta.iter().map(|b| b.abs()).sum()
}

fn residual(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let xb = x.mul_vec(beta);
    y.iter().zip(&xb).map(|(a, b)| a - b).collect()
}

pub fn support_of(beta: &[f64]) -> IndexSet {
    IndexSet::from_unsorted(
        beta.iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > SUPPORT_THRESHOLD)
            .map(|(j, _)| j)
            .collect(),
    )
}

fn kkt_from_residual(x: &DesignMatrix, r: &[f64], beta: &[f64], lambda: f64) -> f64 {
    x.columns()
        .zip(beta)
        .map(|(col, &b)| {
            let g = dot(col, r);
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Worst violation of the subgradient condition `Xᵗ(y − Xβ) ∈ λ ∂‖β‖₁`.
pub fn kkt_residual(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    kkt_from_residual(x, &residual(x, y, beta), beta, lambda)
}

fn check_problem(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<()> {
    x.require_normalized()?;
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            expected: "lambda > 0",
        });
    }
    Ok(())
}

pub fn fit(x: &DesignMatrix, y: &[f64], lambda: f64, tol: f64, max_sweeps: usize) -> Result<LassoFit> {
    fit_with(x, y, lambda, &SolverOptions::new(tol, max_sweeps))
}

/// Runs full cyclic sweeps until the KKT residual is at most `opts.tol`.
///
/// On exhaustion returns [`Error::NotConverged`] carrying the last iterate.
pub fn fit_with(x: &DesignMatrix, y: &[f64], lambda: f64, opts: &SolverOptions) -> Result<LassoFit> {
    check_problem(x, y, lambda)?;
    let p = x.cols();
    let mut beta = match &opts.warm_start {
        Some(w) if w.len() != p => {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: w.len(),
            })
        }
        Some(w) => w.clone(),
        None => vec![0.0; p],
    };
    let mut r = residual(x, y, &beta);
    let mut trace = vec![0.5 * dot(&r, &r) + lambda * l1(&beta)];
    let mut kkt = kkt_from_residual(x, &r, &beta, lambda);
    let mut sweeps = 0;

    while kkt > opts.tol && sweeps < opts.max_sweeps {
        for (j, col) in x.columns().enumerate() {
            let old = beta[j];
            let new = soft_threshold(old + dot(col, &r), lambda);
            if new != old {
                let delta = old - new;
                for (ri, xi) in r.iter_mut().zip(col) {
                    *ri += delta * xi;
                }
                beta[j] = new;
            }
        }
        sweeps += 1;
        // Refresh the running residual to keep round-off from accumulating.
        if sweeps % 64 == 0 {
            r = residual(x, y, &beta);
        }
        let obj = 0.5 * dot(&r, &r) + lambda * l1(&beta);
        let prev = *trace.last().expect("trace starts non-empty");
        debug_assert!(
            obj <= prev + MONOTONE_SLACK * prev.abs().max(1.0),
            "objective increased: {prev} -> {obj}"
        );
        trace.push(obj);
        kkt = kkt_from_residual(x, &r, &beta, lambda);
    }

    let r = residual(x, y, &beta);
    let fit = LassoFit {
        objective: 0.5 * dot(&r, &r) + lambda * l1(&beta),
        kkt_residual: kkt_from_residual(x, &r, &beta, lambda),
        support: support_of(&beta),
        beta_hat: beta,
        lambda,
        sweeps,
        objective_trace: trace,
    };
    if fit.kkt_residual > opts.tol {
        return Err(Error::NotConverged(Box::new(fit)));
    }
    Ok(fit)
}

/// Tolerance on "column is a linear combination of the other active columns",
/// expressed on the Gram eigenvalue (a squared singular value).
const DEPENDENCE_TOL: f64 = 1e-10;

/// Reduces the support of a converged fit to at most `n` columns without
/// changing the objective.
///
/// Pivoting rule: while the active columns are linearly dependent and more
/// than `n` of them are active, take the null direction `d` of `X_A` (the
/// eigenvector of the smallest Gram eigenvalue). Moving along `d` keeps `Xβ`
/// fixed and, by optimality, keeps `‖β‖₁` fixed until a coefficient reaches
/// zero; step until the first one does (lowest index on ties), drop it, and
/// re-solve the LASSO restricted to the remaining active set from that point.
pub fn sparsify_support(x: &DesignMatrix, y: &[f64], fit: &LassoFit, n: usize) -> Result<LassoFit> {
    check_problem(x, y, fit.lambda)?;
    if fit.support.len() <= n {
        return Ok(fit.clone());
    }
    let lambda = fit.lambda;
    let target = fit.objective;
    let mut beta = fit.beta_hat.clone();
    let mut active = fit.support.clone();

    while active.len() > n {
        let gram = x.gram(&active);
        let eig = nalgebra::SymmetricEigen::new(gram);
        let (k_min, &ev_min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("active set is non-empty");
        if ev_min > DEPENDENCE_TOL {
            return Err(Error::ReductionFailed(format!(
                "{} active columns are linearly independent",
                active.len()
            )));
        }
        let d: Vec<f64> = eig.eigenvectors.column(k_min).iter().copied().collect();

        // Orient d so that some coefficient shrinks towards zero, then find
        // the first crossing.
        let mut best: Option<(f64, usize)> = None;
        let mut orientation = 1.0;
        for sign in [1.0, -1.0] {
            for (a, &j) in active.iter().enumerate() {
                let step = sign * d[a];
                if step * beta[j] < 0.0 {
                    let tau = -beta[j] / step;
                    if best.is_none_or(|(bt, bj)| tau < bt || (tau == bt && j < bj)) {
                        best = Some((tau, j));
                    }
                }
            }
            if best.is_some() {
                orientation = sign;
                break;
            }
        }
        let (tau, drop) =
            best.ok_or_else(|| Error::ReductionFailed("degenerate null direction".into()))?;
        for (a, &j) in active.iter().enumerate() {
            beta[j] += tau * orientation * d[a];
        }
        beta[drop] = 0.0;
        let remaining: Vec<usize> = active.iter().copied().filter(|&j| j != drop).collect();
        active = IndexSet::from_unsorted(remaining);

        // Restricted re-solve from the moved point.
        let sub = x.select(&active);
        let warm: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
        let opts = SolverOptions {
            tol: fit.kkt_residual.max(DEFAULT_TOL),
            max_sweeps: DEFAULT_MAX_SWEEPS,
            warm_start: Some(warm),
        };
        let refit = match fit_with(&sub, y, lambda, &opts) {
            Ok(f) => f,
            Err(Error::NotConverged(f)) => *f,
            Err(e) => return Err(e),
        };
        beta.iter_mut().for_each(|b| *b = 0.0);
        for (a, &j) in active.iter().enumerate() {
            beta[j] = refit.beta_hat[a];
        }
        // Coefficients the restricted solve zeroed leave the active set too.
        active = IndexSet::from_unsorted(active.iter().copied().filter(|&j| beta[j] != 0.0).collect());
    }

    let obj = objective(x, y, &beta, lambda);
    if (obj - target).abs() > 1e-10 * target.abs().max(1.0) {
        return Err(Error::ReductionFailed(format!(
            "objective moved from {target} to {obj}"
        )));
    }
    let r = residual(x, y, &beta);
    Ok(LassoFit {
        objective: obj,
        kkt_residual: kkt_from_residual(x, &r, &beta, lambda),
        support: support_of(&beta),
        beta_hat: beta,
        lambda,
        sweeps: fit.sweeps,
        objective_trace: fit.objective_trace.clone(),
    })
}

/// Smallest eigenvalue of `X_Aᵗ X_A`; exposed for diagnostics.
pub fn active_gram_floor(x: &DesignMatrix, active: &IndexSet) -> f64 {
    if active.is_empty() {
        return 0.0;
    }
    symmetric_eigenvalues(x.gram(active))[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_sphere_matrix, Seed};

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let x = sample_sphere_matrix(10, 20, Seed(1)).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let lmax = x.tr_mul_vec(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let f = fit(&x, &y, lmax, 1e-10, 10).unwrap();
        assert!(f.beta_hat.iter().all(|&b| b == 0.0));
        assert_eq!(kkt_residual(&x, &y, &[0.0; 20], lmax), 0.0);
        let half = kkt_residual(&x, &y, &[0.0; 20], lmax / 2.0);
        assert!((half - lmax / 2.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_example() {
        let f = fit(&DesignMatrix::identity(2), &[3.0, 0.5], 1.0, 1e-12, 100).unwrap();
        assert_eq!(f.beta_hat, vec![2.0, 0.0]);
        assert_eq!(f.support.as_slice(), &[0]);
        assert!(f.kkt_residual <= 1e-12);
        // objective = ½(1² + 0.5²) + 1·2
        assert!((f.objective - 2.625).abs() < 1e-15);
    }

    #[test]
    fn duplicated_columns_match_deduplicated_objective() {
        let base = sample_sphere_matrix(8, 6, Seed(5)).unwrap();
        let mut cols: Vec<Vec<f64>> = base.columns().map(<[f64]>::to_vec).collect();
        cols.push(cols[0].clone());
        cols.push(cols[3].clone());
        let dup = DesignMatrix::from_columns(&cols).unwrap();
        let y: Vec<f64> = (0..8).map(|i| 1.0 - 0.3 * i as f64).collect();
        let a = fit(&base, &y, 0.2, 1e-12, 100_000).unwrap();
        let b = fit(&dup, &y, 0.2, 1e-12, 100_000).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-8);
    }

    #[test]
    fn error_paths() {
        let id = DesignMatrix::identity(2);
        assert!(fit(&id, &[1.0], 1.0, 1e-8, 10).is_err());
        assert!(fit(&id, &[1.0, 2.0], 0.0, 1e-8, 10).is_err());
        let raw = DesignMatrix::from_columns(&[vec![2.0, 0.0]]).unwrap();
        assert!(matches!(fit(&raw, &[1.0, 2.0], 1.0, 1e-8, 10), Err(Error::NotNormalized)));
        let x = sample_sphere_matrix(5, 30, Seed(2)).unwrap();
        let y = [1.0, -2.0, 0.5, 0.3, 2.0];
        match fit(&x, &y, 0.01, 1e-14, 1) {
            Err(Error::NotConverged(f)) => assert_eq!(f.sweeps, 1),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn objective_trace_nonincreasing() {
        let x = sample_sphere_matrix(20, 50, Seed(9)).unwrap();
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let f = fit(&x, &y, 0.05, 1e-10, 100_000).unwrap();
        assert_eq!(f.objective_trace.len(), f.sweeps + 1);
        for w in f.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-13));
        }
        assert!((f.objective - objective(&x, &y, &f.beta_hat, 0.05)).abs() <= 1e-10 * f.objective);
    }

    #[test]
    fn sparsify_identity_when_small() {
        let f = fit(&DesignMatrix::identity(2), &[3.0, 0.5], 1.0, 1e-12, 100).unwrap();
        assert_eq!(sparsify_support(&DesignMatrix::identity(2), &[3.0, 0.5], &f, 2).unwrap(), f);
    }

    #[test]
    fn sparsify_moves_mass_onto_one_duplicate() {
        // Columns e1, e1, e2 in ℝ²; optimum puts total mass 4 on the e1 pair.
        let x = DesignMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = [5.0, 3.0];
        let beta = vec![2.0, 2.0, 2.0];
        let split = LassoFit {
            objective: objective(&x, &y, &beta, 1.0),
            kkt_residual: kkt_residual(&x, &y, &beta, 1.0),
            support: support_of(&beta),
            beta_hat: beta,
            lambda: 1.0,
            sweeps: 0,
            objective_trace: vec![],
        };
        assert_eq!(split.kkt_residual, 0.0);
        let reduced = sparsify_support(&x, &y, &split, 2).unwrap();
        assert_eq!(reduced.support.len(), 2);
        assert!((reduced.objective - split.objective).abs() < 1e-10);
        assert!((reduced.beta_hat[0] + reduced.beta_hat[1] - 4.0).abs() < 1e-10);
        assert!((reduced.beta_hat[2] - 2.0).abs() < 1e-10);
    }
}
