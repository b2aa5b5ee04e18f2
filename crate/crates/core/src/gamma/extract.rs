//! Greedy outer sets and random extraction of a well-conditioned subset.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaParams;
use crate::matrix::{symmetric_eigenvalues, DesignMatrix, IndexSet};
use crate::sphere::Seed;

/// Default greedy oversampling factor, `4·e^{−2(ln 2 − 1)}` (which equals e²).
pub fn default_kappa() -> f64 {
    4.0 * (-2.0 * (std::f64::consts::LN_2 - 1.0)).exp()
}

/// Size of the greedy outer set: `min(⌈κ·s⌉, ⌊p/2⌋)`.
pub fn outer_target_size(kappa: f64, s: usize, p: usize) -> usize {
    ((kappa * s as f64).ceil() as usize).min(p / 2)
}

/// The `m` columns least correlated with `v`, picked one at a time: each step
/// takes the remaining column with the smallest `|⟨X_j, v⟩|`, lowest index on ties.
pub fn greedy_outer_set(x: &DesignMatrix, v: &[f64], kappa: f64, s: usize) -> Result<IndexSet> {
    let m = outer_target_size(kappa, s, x.cols());
    if m < s || m == 0 {
        return Err(Error::TargetTooSmall { m, s });
    }
    let dots = x.abs_dots(v);
    Ok(IndexSet::from_unsorted(smallest_m(&dots, m)))
}

/// Iterative argmin selection. Strict `<` keeps the lowest index on ties.
fn smallest_m(values: &[f64], m: usize) -> Vec<usize> {
    let mut taken = vec![false; values.len()];
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<usize> = None;
        for (j, &z) in values.iter().enumerate() {
            if !taken[j] && best.is_none_or(|b| z < values[b]) {
                best = Some(j);
            }
        }
        let b = best.expect("m <= p");
        taken[b] = true;
        picked.push(b);
    }
    picked
}

/// Spectral deviation `‖X_Σᵗ X_Σ − I‖` and `σ_min(X_Σ)`, from one eigen-decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramDiagnostics {
    pub deviation: f64,
    pub sigma_min: f64,
}

pub fn gram_diagnostics(x: &DesignMatrix, set: &IndexSet) -> GramDiagnostics {
    let ev = symmetric_eigenvalues(x.gram(set));
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    GramDiagnostics {
        deviation: (1.0 - lo).abs().max((hi - 1.0).abs()),
        sigma_min: lo.max(0.0).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub subset: IndexSet,
    /// 1-based number of the accepted draw.
    pub tries: usize,
    pub deviation: f64,
    pub sigma_min: f64,
}

/// Whether one candidate passes: Gram deviation at most `1 − ρ_−`, then the
/// direct `σ_min ≥ ρ_−` check, which has the final say.
pub fn accepts(diag: &GramDiagnostics, rho_minus: f64) -> bool {
    diag.deviation <= 1.0 - rho_minus && diag.sigma_min >= rho_minus
}

/// Draws a uniformly random `s`-subset of `outer`.
pub fn draw_subset<R: Rng + ?Sized>(outer: &IndexSet, s: usize, rng: &mut R) -> IndexSet {
    let picks = sample(rng, outer.len(), s);
    IndexSet::from_unsorted(picks.into_iter().map(|k| outer.as_slice()[k]).collect())
}

/// Draws uniform `s`-subsets of `outer` until one is accepted.
pub fn extract_conditioned_subset(
    x: &DesignMatrix,
    outer: &IndexSet,
    params: &GammaParams,
    max_tries: usize,
    seed: Seed,
) -> Result<Extraction> {
    let s = params.s();
    if outer.len() < s {
        return Err(Error::TargetTooSmall { m: outer.len(), s });
    }
    outer.check_range(x.cols())?;
    let mut rng = seed.rng();
    for attempt in 1..=max_tries {
        let subset = draw_subset(outer, s, &mut rng);
        let diag = gram_diagnostics(x, &subset);
        if accepts(&diag, params.rho_minus()) {
            return Ok(Extraction {
                subset,
                tries: attempt,
                deviation: diag.deviation,
                sigma_min: diag.sigma_min,
            });
        }
    }
    Err(Error::Exhausted(max_tries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_sphere_matrix, sample_unit_vector};

    #[test]
    fn kappa_default_value() {
        assert!((default_kappa() - std::f64::consts::E.powi(2)).abs() < 1e-12);
        assert!((default_kappa() - 7.389).abs() < 1e-3);
    }

    #[test]
    fn greedy_identity_tie_break() {
        let id = DesignMatrix::identity(4);
        // κ·s = 2 with s = 1, κ = 2.
        let set = greedy_outer_set(&id, &[1.0, 0.0, 0.0, 0.0], 2.0, 1).unwrap();
        assert_eq!(set.as_slice(), &[1, 2]);
    }

    #[test]
    fn greedy_equal_magnitudes_pick_lowest() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let set = greedy_outer_set(&DesignMatrix::identity(2), &[h, h], 1.0, 1).unwrap();
        assert_eq!(set.as_slice(), &[0]);
    }

    #[test]
    fn greedy_matches_stable_sort_oracle() {
        for seed in 0..20u64 {
            let x = sample_sphere_matrix(5, 30, Seed(seed)).unwrap();
            let v = sample_unit_vector(5, &mut Seed(seed + 100).rng());
            let set = greedy_outer_set(&x, &v, 100.0, 1).unwrap();
            assert_eq!(set.len(), 15);

            let dots = x.abs_dots(&v);
            let mut order: Vec<usize> = (0..30).collect();
            order.sort_by(|&a, &b| dots[a].total_cmp(&dots[b]));
            let oracle = IndexSet::from_unsorted(order[..15].to_vec());
            assert_eq!(set, oracle);
        }
    }

    #[test]
    fn greedy_target_too_small() {
        let id = DesignMatrix::identity(3);
        assert!(matches!(
            greedy_outer_set(&id, &[1.0, 0.0, 0.0], 7.0, 2),
            Err(Error::TargetTooSmall { m: 1, s: 2 })
        ));
    }

    #[test]
    fn orthonormal_outer_accepts_first_draw() {
        let id = DesignMatrix::identity(6);
        let params = GammaParams::new(3, 0.5).unwrap();
        let e = extract_conditioned_subset(&id, &IndexSet::full(6), &params, 5, Seed(1)).unwrap();
        assert_eq!(e.tries, 1);
        assert!(e.deviation < 1e-14);
    }

    #[test]
    fn duplicated_pair_always_rejected() {
        let x = DesignMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let params = GammaParams::new(2, 0.5).unwrap();
        let d = gram_diagnostics(&x, &IndexSet::full(2));
        assert!((d.deviation - 1.0).abs() < 1e-12);
        assert!(matches!(
            extract_conditioned_subset(&x, &IndexSet::full(2), &params, 50, Seed(3)),
            Err(Error::Exhausted(50))
        ));
    }

    #[test]
    fn accepted_subsets_are_admissible() {
        let x = sample_sphere_matrix(16, 200, Seed(11)).unwrap();
        let params = GammaParams::new(3, 0.5).unwrap();
        let outer = IndexSet::full(40);
        for seed in 0..20 {
            let e = extract_conditioned_subset(&x, &outer, &params, 100, Seed(seed)).unwrap();
            assert!(e.sigma_min >= 0.5);
            assert!(e.deviation <= 0.5);
            assert!(e.subset.iter().all(|j| outer.contains(*j)));
        }
    }
}
