//! The design index
//!
//! ```text
//! γ_{s,ρ−}(X) = sup_{‖v‖≤1} min_{I ∈ 𝒮_{s,ρ−}} ‖X_Iᵗ v‖_∞
//! ```
//!
//! where `𝒮_{s,ρ−}` is the family of `s`-column subsets with `σ_min(X_I) ≥ ρ_−`.
//!
//! Three routes are provided:
//! * exact inner minimization by enumerating the admissible family
//!   ([`inner_inf_exact`]);
//! * a certified bracket `[lo, lo + ε]` for `n ≤ 3`, maximizing the exact
//!   inner value over an ε-net ([`gamma_exact`]);
//! * a Monte-Carlo estimate for any `n`, built from random directions, a
//!   greedy outer set and random extraction ([`gamma_estimate`]). Each
//!   per-direction value is a certified upper bound on the inner minimum at
//!   that direction, but the max over sampled directions under-estimates the
//!   supremum.

mod extract;
mod net;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extract::{
    accepts, default_kappa, draw_subset, extract_conditioned_subset, gram_diagnostics,
    greedy_outer_set, outer_target_size, Extraction, GramDiagnostics,
};
pub use net::{epsilon_net, EpsilonNet};

use crate::error::{Error, Result};
use crate::matrix::{norm2, submatrix_extremes, DesignMatrix, IndexSet};
use crate::sphere::{sample_unit_vector, Seed};

/// Default cap on the number of subsets enumerated by the exact routes.
pub const ENUMERATION_CAP: u128 = 100_000;

/// Default number of extraction draws per direction.
pub const DEFAULT_MAX_TRIES: usize = 1_000;

const UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    s: usize,
    rho_minus: f64,
}

impl GammaParams {
    pub fn new(s: usize, rho_minus: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::OutOfRange {
                name: "s",
                value: 0.0,
                expected: "s >= 1",
            });
        }
        if !(rho_minus > 0.0 && rho_minus < 1.0) {
            return Err(Error::OutOfRange {
                name: "rho_minus",
                value: rho_minus,
                expected: "(0, 1)",
            });
        }
        Ok(Self { s, rho_minus })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn rho_minus(&self) -> f64 {
        self.rho_minus
    }

    fn check_against(&self, x: &DesignMatrix) -> Result<()> {
        let cap = x.rows().min(x.cols());
        if self.s > cap {
            return Err(Error::OutOfRange {
                name: "s",
                value: self.s as f64,
                expected: "s <= min(n, p)",
            });
        }
        Ok(())
    }
}

/// `C(p, s)`, saturating once it passes `limit`.
fn binomial_capped(p: usize, s: usize, limit: u128) -> u128 {
    let s = s.min(p - s.min(p));
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = acc * (p - i) as u128 / (i + 1) as u128;
        if acc > limit {
            return acc;
        }
    }
    acc
}

/// Lexicographic successor of a combination of `0..p`.
fn next_combination(c: &mut [usize], p: usize) -> bool {
    let s = c.len();
    for i in (0..s).rev() {
        if c[i] < p - s + i {
            c[i] += 1;
            for k in i + 1..s {
                c[k] = c[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// An admissible subset together with its smallest singular value.
#[derive(Clone, Debug, PartialEq)]
struct Admissible {
    set: IndexSet,
    sigma_min: f64,
}

fn admissible_family(x: &DesignMatrix, params: &GammaParams, cap: u128) -> Result<Vec<Admissible>> {
    params.check_against(x)?;
    let p = x.cols();
    let count = binomial_capped(p, params.s, cap);
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    let mut comb: Vec<usize> = (0..params.s).collect();
    let mut out = Vec::new();
    loop {
        let set = IndexSet::from_unsorted(comb.clone());
        let sigma_min = submatrix_extremes(x, &set)?.sigma_min;
        if sigma_min >= params.rho_minus {
            out.push(Admissible { set, sigma_min });
        }
        if !next_combination(&mut comb, p) {
            break;
        }
    }
    Ok(out)
}

/// All `s`-subsets with `σ_min(X_I) ≥ ρ_−`, in lexicographic order. An empty
/// family is a valid answer.
pub fn admissible_subsets(x: &DesignMatrix, params: &GammaParams) -> Result<Vec<IndexSet>> {
    admissible_subsets_capped(x, params, ENUMERATION_CAP)
}

pub fn admissible_subsets_capped(
    x: &DesignMatrix,
    params: &GammaParams,
    cap: u128,
) -> Result<Vec<IndexSet>> {
    Ok(admissible_family(x, params, cap)?
        .into_iter()
        .map(|a| a.set)
        .collect())
}

/// `‖X_Iᵗ v‖_∞` given precomputed `|⟨X_j, v⟩|`.
fn inner_value(abs_dots: &[f64], set: &IndexSet) -> f64 {
    set.iter().map(|&j| abs_dots[j]).fold(0.0, f64::max)
}

fn check_unit(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let norm = norm2(v);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::OutOfRange {
            name: "‖v‖",
            value: norm,
            expected: "1 ± 1e-10",
        });
    }
    Ok(())
}

/// Minimum over a family; the first (lexicographically smallest) minimizer wins.
fn minimize_over<'a>(family: &'a [Admissible], abs_dots: &[f64]) -> Option<(f64, &'a Admissible)> {
    let mut best: Option<(f64, &Admissible)> = None;
    for a in family {
        let val = inner_value(abs_dots, &a.set);
        if best.is_none_or(|(b, _)| val < b) {
            best = Some((val, a));
        }
    }
    best
}

/// `min_{I ∈ 𝒮_{s,ρ−}} ‖X_Iᵗ v‖_∞` and its minimizer, by full enumeration.
pub fn inner_inf_exact(x: &DesignMatrix, v: &[f64], params: &GammaParams) -> Result<(f64, IndexSet)> {
    check_unit(v, x.rows())?;
    let family = admissible_family(x, params, ENUMERATION_CAP)?;
    let dots = x.abs_dots(v);
    minimize_over(&family, &dots)
        .map(|(val, a)| (val, a.set.clone()))
        .ok_or(Error::NoAdmissibleSubset {
            s: params.s,
            rho_minus: params.rho_minus,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMethod {
    ExactNet,
    MonteCarloGreedy,
}

/// One audited direction: the chosen subset and its inner value at `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub direction: usize,
    pub v: Vec<f64>,
    pub subset: IndexSet,
    pub inner_value: f64,
    pub sigma_min: f64,
}

impl Certificate {
    /// Recomputes `‖X_Iᵗ v‖_∞` and `σ_min(X_I)`; returns the largest absolute
    /// discrepancy against the recorded values.
    pub fn recheck(&self, x: &DesignMatrix) -> Result<f64> {
        let val = inner_value(&x.abs_dots(&self.v), &self.subset);
        let sm = submatrix_extremes(x, &self.subset)?.sigma_min;
        Ok((val - self.inner_value).abs().max((sm - self.sigma_min).abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub value: f64,
    pub method: GammaMethod,
    pub epsilon: Option<f64>,
    pub directions: usize,
    pub certificates: Vec<Certificate>,
    /// Directions where extraction was exhausted and which were skipped.
    pub failed_directions: Vec<usize>,
    pub notes: Vec<String>,
}

/// Certified bracket `lo ≤ γ ≤ hi = lo + ε` from an ε-net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaBracket {
    pub lo: f64,
    pub hi: f64,
    pub epsilon: f64,
    pub net_size: usize,
    pub witness: Certificate,
}

impl GammaBracket {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Maximizes the exact inner minimum over the points of `net`.
///
/// Ties between net points keep the first one, so the witness is stable.
pub fn gamma_on_net(x: &DesignMatrix, params: &GammaParams, net: &EpsilonNet) -> Result<GammaBracket> {
    if net.dimension != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: net.dimension,
        });
    }
    let family = admissible_family(x, params, ENUMERATION_CAP)?;
    if family.is_empty() {
        return Err(Error::NoAdmissibleSubset {
            s: params.s,
            rho_minus: params.rho_minus,
        });
    }
    let mut best: Option<Certificate> = None;
    for (k, v) in net.points.iter().enumerate() {
        let dots = x.abs_dots(v);
        let (val, a) = minimize_over(&family, &dots).expect("family is non-empty");
        if best.as_ref().is_none_or(|b| val > b.inner_value) {
            best = Some(Certificate {
                direction: k,
                v: v.clone(),
                subset: a.set.clone(),
                inner_value: val,
                sigma_min: a.sigma_min,
            });
        }
    }
    let witness = best.expect("nets are non-empty");
    Ok(GammaBracket {
        lo: witness.inner_value,
        hi: witness.inner_value + net.epsilon,
        epsilon: net.epsilon,
        net_size: net.len(),
        witness,
    })
}

/// Certified bracket on `γ_{s,ρ−}(X)` for `n ≤ 3`.
///
/// Any unit `v'` lies within ε of a net point `v`, and for the minimizer `I`
/// at `v`, `‖X_Iᵗ v'‖_∞ ≤ ‖X_Iᵗ v‖_∞ + ε` because the columns are unit. Hence
/// the supremum is at most `lo + ε`; it is at least `lo` trivially.
pub fn gamma_exact(x: &DesignMatrix, params: &GammaParams, epsilon: f64) -> Result<GammaBracket> {
    x.require_normalized()?;
    let net = epsilon_net(x.rows(), epsilon)?;
    gamma_on_net(x, params, &net)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub directions: usize,
    pub kappa: f64,
    pub max_tries: usize,
}

impl EstimateOptions {
    pub fn new(directions: usize, kappa: f64) -> Self {
        Self {
            directions,
            kappa,
            max_tries: DEFAULT_MAX_TRIES,
        }
    }
}

/// One Monte-Carlo direction: sample `v`, take the greedy outer set, extract
/// an admissible subset from it.
fn estimate_direction(
    x: &DesignMatrix,
    params: &GammaParams,
    opts: &EstimateOptions,
    seed: Seed,
    direction: usize,
) -> Result<Certificate> {
    let mut rng = seed.derive(direction as u64).rng();
    let v = sample_unit_vector(x.rows(), &mut rng);
    let outer = greedy_outer_set(x, &v, opts.kappa, params.s)?;
    let extraction_seed = Seed(rand::Rng::random(&mut rng));
    let e = extract_conditioned_subset(x, &outer, params, opts.max_tries, extraction_seed)?;
    let inner = inner_value(&x.abs_dots(&v), &e.subset);
    Ok(Certificate {
        direction,
        v,
        subset: e.subset,
        inner_value: inner,
        sigma_min: e.sigma_min,
    })
}

pub fn gamma_estimate(
    x: &DesignMatrix,
    params: &GammaParams,
    directions: usize,
    kappa: f64,
    seed: Seed,
) -> Result<GammaEstimate> {
    gamma_estimate_with(x, params, &EstimateOptions::new(directions, kappa), seed)
}

/// Monte-Carlo estimate of γ over `opts.directions` uniform directions.
///
/// Directions run in parallel, each on its own substream of `seed`; the
/// result depends only on `(x, params, opts, seed)`.
pub fn gamma_estimate_with(
    x: &DesignMatrix,
    params: &GammaParams,
    opts: &EstimateOptions,
    seed: Seed,
) -> Result<GammaEstimate> {
    if opts.directions == 0 {
        return Err(Error::OutOfRange {
            name: "directions",
            value: 0.0,
            expected: "directions >= 1",
        });
    }
    params.check_against(x)?;
    let results: Vec<Result<Certificate>> = (0..opts.directions)
        .into_par_iter()
        .map(|k| estimate_direction(x, params, opts, seed, k))
        .collect();

    let mut certificates = Vec::with_capacity(opts.directions);
    let mut failed = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => certificates.push(c),
            Err(Error::Exhausted(_)) => failed.push(k),
            Err(e) => return Err(e),
        }
    }
    if certificates.is_empty() {
        return Err(Error::AllDirectionsFailed(opts.directions));
    }
    let value = certificates
        .iter()
        .map(|c| c.inner_value)
        .fold(0.0, f64::max);
    let mut notes = vec![
        "max over sampled directions: lower-biased estimate of the supremum; \
         each per-direction value is an upper bound on the inner minimum at that direction"
            .to_string(),
    ];
    if !failed.is_empty() {
        notes.push(format!("{} directions skipped after exhausting extraction", failed.len()));
    }
    Ok(GammaEstimate {
        value,
        method: GammaMethod::MonteCarloGreedy,
        epsilon: None,
        directions: opts.directions,
        certificates,
        failed_directions: failed,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::concat;
    use crate::sphere::sample_sphere_matrix;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn params_validation() {
        assert!(GammaParams::new(0, 0.5).is_err());
        assert!(GammaParams::new(1, 0.0).is_err());
        assert!(GammaParams::new(1, 1.0).is_err());
        let p = GammaParams::new(4, 0.5).unwrap();
        assert!(admissible_subsets(&DesignMatrix::identity(3), &p).is_err());
    }

    #[test]
    fn admissible_identity_singletons() {
        let p = GammaParams::new(1, 0.5).unwrap();
        let fam = admissible_subsets(&DesignMatrix::identity(3), &p).unwrap();
        let sets: Vec<&[usize]> = fam.iter().map(IndexSet::as_slice).collect();
        assert_eq!(sets, vec![&[0][..], &[1], &[2]]);
    }

    #[test]
    fn admissible_excludes_duplicate_pair() {
        let x = DesignMatrix::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = GammaParams::new(2, 0.5).unwrap();
        let fam = admissible_subsets(&x, &p).unwrap();
        let sets: Vec<&[usize]> = fam.iter().map(IndexSet::as_slice).collect();
        assert_eq!(sets, vec![&[0, 2][..], &[1, 2]]);
    }

    #[test]
    fn admissible_cap_enforced() {
        let x = sample_sphere_matrix(3, 60, Seed(0)).unwrap();
        let p = GammaParams::new(3, 0.5).unwrap();
        assert!(matches!(
            admissible_subsets_capped(&x, &p, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial_capped(8, 2, 1000), 28);
        assert_eq!(binomial_capped(5, 5, 1000), 1);
    }

    #[test]
    fn inner_inf_identity_is_min_abs_coordinate() {
        let p = GammaParams::new(1, 0.5).unwrap();
        let v = [0.6, -0.48, 0.64];
        let (val, set) = inner_inf_exact(&DesignMatrix::identity(3), &v, &p).unwrap();
        assert!((val - 0.48).abs() < 1e-15);
        assert_eq!(set.as_slice(), &[1]);

        let (val, set) = inner_inf_exact(&DesignMatrix::identity(2), &[1.0, 0.0], &p).unwrap();
        assert_eq!(val, 0.0);
        assert_eq!(set.as_slice(), &[1]);
    }

    #[test]
    fn inner_inf_rejects_non_unit_and_empty_family() {
        let p = GammaParams::new(1, 0.5).unwrap();
        assert!(inner_inf_exact(&DesignMatrix::identity(2), &[1.0, 1.0], &p).is_err());
        let dup = DesignMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let p2 = GammaParams::new(2, 0.5).unwrap();
        assert!(matches!(
            inner_inf_exact(&dup, &[1.0, 0.0], &p2),
            Err(Error::NoAdmissibleSubset { .. })
        ));
    }

    #[test]
    fn gamma_exact_identity_brackets() {
        let p = GammaParams::new(1, 0.5).unwrap();
        let b = gamma_exact(&DesignMatrix::identity(2), &p, 0.05).unwrap();
        assert!(b.contains(FRAC_1_SQRT_2), "{b:?}");
        assert_eq!(b.hi, b.lo + b.epsilon);
        assert!(b.witness.recheck(&DesignMatrix::identity(2)).unwrap() <= 1e-12);

        let b = gamma_exact(&DesignMatrix::identity(3), &p, 0.1).unwrap();
        assert!(b.contains(1.0 / 3f64.sqrt()), "{b:?}");
    }

    /// Dense angular scan of γ for s = 1 on a 2-row matrix: the sup over
    /// angles of the smallest |⟨X_j, v⟩|.
    fn angular_scan(x: &DesignMatrix) -> f64 {
        (0..100_000)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 100_000.0;
                let (s, c) = t.sin_cos();
                x.abs_dots(&[c, s]).into_iter().fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gamma_exact_with_appended_diagonal_columns() {
        let h = FRAC_1_SQRT_2;
        let p = GammaParams::new(1, 0.5).unwrap();
        let eps = 0.01;

        // [I_2, (1,1)/√2]: v = (1,1)/√2 still sees 1/√2 on every column, so
        // the index does not move.
        let x = DesignMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![h, h]]).unwrap();
        let scan = angular_scan(&x);
        assert!((scan - h).abs() < 1e-9);
        let b = gamma_exact(&x, &p, eps).unwrap();
        assert!(b.lo <= scan + 1e-9 && scan <= b.hi, "{b:?} vs scan {scan}");
        assert!(b.hi < h + eps);

        // Adding (1,−1)/√2 as well gives four equally spaced lines; the
        // index drops to sin(π/8).
        let x = DesignMatrix::from_columns(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![h, h],
            vec![h, -h],
        ])
        .unwrap();
        let scan = angular_scan(&x);
        assert!((scan - (std::f64::consts::PI / 8.0).sin()).abs() < 1e-4);
        let b = gamma_exact(&x, &p, eps).unwrap();
        assert!(b.lo <= scan + 1e-9 && scan <= b.hi, "{b:?} vs scan {scan}");
        assert!(b.hi < h);
    }

    #[test]
    fn net_level_monotonicity_under_concatenation() {
        let p = GammaParams::new(1, 0.5).unwrap();
        let net = epsilon_net(2, 0.2).unwrap();
        for seed in 0..10 {
            let a = sample_sphere_matrix(2, 3, Seed(seed)).unwrap();
            let b = sample_sphere_matrix(2, 2, Seed(seed + 50)).unwrap();
            let ab = concat(&a, &b).unwrap();
            let lo = |m: &DesignMatrix| gamma_on_net(m, &p, &net).unwrap().lo;
            assert!(lo(&ab) <= lo(&a).min(lo(&b)));
        }
    }

    #[test]
    fn estimate_identity_singletons() {
        let p = GammaParams::new(1, 0.5).unwrap();
        let x = DesignMatrix::identity(8);
        let est = gamma_estimate(&x, &p, 500, default_kappa(), Seed(4)).unwrap();
        assert_eq!(est.certificates.len(), 500);
        for c in &est.certificates {
            assert_eq!(c.sigma_min, 1.0);
            let min_abs = c.v.iter().map(|z| z.abs()).fold(f64::INFINITY, f64::min);
            assert!(c.inner_value >= min_abs);
        }
        let max = est.certificates.iter().map(|c| c.inner_value).fold(0.0, f64::max);
        assert_eq!(est.value, max);
        assert!(est.value <= 1.0);
    }

    #[test]
    fn estimate_dominates_exact_inner_value() {
        let p = GammaParams::new(2, 0.5).unwrap();
        for seed in 0..5 {
            let x = sample_sphere_matrix(3, 8, Seed(seed)).unwrap();
            let est = gamma_estimate(&x, &p, 50, default_kappa(), Seed(seed + 9)).unwrap();
            for c in &est.certificates {
                let (exact, _) = inner_inf_exact(&x, &c.v, &p).unwrap();
                assert!(c.inner_value >= exact - 1e-12);
                assert!(c.recheck(&x).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn estimate_is_deterministic() {
        let p = GammaParams::new(2, 0.5).unwrap();
        let x = sample_sphere_matrix(6, 40, Seed(1)).unwrap();
        let a = gamma_estimate(&x, &p, 30, default_kappa(), Seed(2)).unwrap();
        let b = gamma_estimate(&x, &p, 30, default_kappa(), Seed(2)).unwrap();
        assert_eq!(a, b);
    }
}
