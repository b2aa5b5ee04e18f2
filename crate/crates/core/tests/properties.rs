use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use gammalasso_core::gamma::{admissible_subsets, inner_inf_exact, GammaParams};
use gammalasso_core::lasso::{fit_with, soft_threshold, SolverOptions};
use gammalasso_core::matrix::{coherence, coherence_sigma_bounds, concat, submatrix_extremes, DesignMatrix, IndexSet};
use gammalasso_core::sphere::{sample_sphere_matrix, sample_unit_vector};
use gammalasso_core::Seed;

/// Singular values of `X_T` by SVD of the submatrix itself, not its Gram matrix.
fn svd_extremes(x: &DesignMatrix, set: &[usize]) -> (f64, f64) {
    let sub = DMatrix::from_fn(x.rows(), set.len(), |i, k| x.get(i, set[k]));
    let sv = sub.singular_values();
    let k = set.len().min(x.rows());
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.reverse();
    // When |T| > n the smallest singular value of X_T is zero.
    let smin = if set.len() > x.rows() { 0.0 } else { v[k - 1] };
    (smin, v[0])
}

fn random_subset(p: usize, t: usize, seed: u64) -> Vec<usize> {
    let mut rng = Seed(seed).rng();
    let mut v = rand::seq::index::sample(&mut rng, p, t).into_vec();
    v.sort_unstable();
    v
}

fn subsets_of(p: usize, s: usize) -> Vec<Vec<usize>> {
    (0u32..1 << p)
        .filter(|m| m.count_ones() as usize == s)
        .map(|m| (0..p).filter(|j| m >> j & 1 == 1).collect())
        .collect()
}

fn orthonormal(n: usize, seed: u64) -> DesignMatrix {
    let mut rng = Seed(seed).rng();
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    DesignMatrix::from_column_major(n, n, g.qr().q().as_slice().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn coherence_of_concat_dominates(n in 2usize..8, p in 2usize..10, q in 2usize..10, seed in any::<u64>()) {
        let a = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let b = sample_sphere_matrix(n, q, Seed(seed ^ 1)).unwrap();
        let joined = coherence(&concat(&a, &b).unwrap()).unwrap();
        prop_assert!(joined >= coherence(&a).unwrap().max(coherence(&b).unwrap()));
    }

    #[test]
    fn extremes_match_svd_and_sit_inside_sandwich(
        n in 2usize..10, p in 2usize..14, t in 1usize..6, seed in any::<u64>()
    ) {
        let t = t.min(p);
        let x = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let set = random_subset(p, t, seed.wrapping_add(7));
        let got = submatrix_extremes(&x, &IndexSet::new(set.clone(), p).unwrap()).unwrap();
        let (smin, smax) = svd_extremes(&x, &set);
        // Compare squares: the Gram route resolves σ² to round-off, σ only to its square root.
        prop_assert!((got.sigma_min.powi(2) - smin.powi(2)).abs() < 1e-10, "{} vs {}", got.sigma_min, smin);
        prop_assert!((got.sigma_max.powi(2) - smax.powi(2)).abs() < 1e-10);

        let sandwich = coherence_sigma_bounds(coherence(&x).unwrap(), t);
        prop_assert!(sandwich.sigma_min <= got.sigma_min + 1e-12);
        prop_assert!(got.sigma_max <= sandwich.sigma_max + 1e-12);
    }

    #[test]
    fn extremes_ignore_column_order(n in 2usize..8, p in 3usize..10, seed in any::<u64>()) {
        let x = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let set = random_subset(p, 3, seed);
        let a = submatrix_extremes(&x, &IndexSet::new(set.clone(), p).unwrap()).unwrap();
        let mut rev = set.clone();
        rev.reverse();
        let perm = DesignMatrix::from_columns(&rev.iter().map(|&j| x.column(j).to_vec()).collect::<Vec<_>>()).unwrap();
        let b = submatrix_extremes(&perm, &IndexSet::full(3)).unwrap();
        prop_assert!((a.sigma_min.powi(2) - b.sigma_min.powi(2)).abs() < 1e-10);
        prop_assert!((a.sigma_max.powi(2) - b.sigma_max.powi(2)).abs() < 1e-10);
    }

    #[test]
    fn admissible_family_matches_brute_force(
        n in 2usize..4, p in 2usize..8, s in 1usize..3, rho in 0.1f64..0.95, seed in any::<u64>()
    ) {
        let s = s.min(n).min(p);
        let x = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let params = GammaParams::new(s, rho).unwrap();
        let got: Vec<Vec<usize>> = admissible_subsets(&x, &params)
            .unwrap()
            .iter()
            .map(|i| i.as_slice().to_vec())
            .collect();
        let want: Vec<Vec<usize>> = subsets_of(p, s)
            .into_iter()
            .filter(|set| svd_extremes(&x, set).0 >= rho)
            .collect();
        // Subsets whose σ_min sits within round-off of ρ may fall either way.
        let borderline = |set: &Vec<usize>| (svd_extremes(&x, set).0 - rho).abs() < 1e-10;
        for set in &want {
            prop_assert!(got.contains(set) || borderline(set));
        }
        for set in &got {
            prop_assert!(want.contains(set) || borderline(set));
        }
    }

    #[test]
    fn inner_inf_matches_scan(n in 2usize..4, p in 2usize..8, s in 1usize..3, seed in any::<u64>()) {
        let s = s.min(n).min(p);
        let x = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let v = sample_unit_vector(n, &mut Seed(seed ^ 3).rng());
        let params = GammaParams::new(s, 0.5).unwrap();
        // Scan with σ_min cut-offs just above and just below ρ to bracket borderline subsets.
        let scan = |cut: f64| {
            subsets_of(p, s)
                .into_iter()
                .filter(|set| svd_extremes(&x, set).0 >= cut)
                .map(|set| {
                    set.iter()
                        .map(|&j| x.column(j).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs())
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let (strict, loose) = (scan(0.5 + 1e-9), scan(0.5 - 1e-9));
        match inner_inf_exact(&x, &v, &params) {
            Ok((val, _)) => prop_assert!(loose - 1e-12 <= val && val <= strict + 1e-12, "{} not in [{}, {}]", val, loose, strict),
            Err(_) => prop_assert!(strict.is_infinite()),
        }
    }

    #[test]
    fn orthonormal_lasso_is_soft_thresholding(n in 1usize..30, frac in 0.0f64..1.2, seed in any::<u64>()) {
        let x = orthonormal(n, seed);
        let mut rng = Seed(seed ^ 5).rng();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let z = x.tr_mul_vec(&y);
        let lambda = frac * z.iter().fold(0.0f64, |m, a| m.max(a.abs())) + 1e-9;
        let fit = fit_with(&x, &y, lambda, &SolverOptions::new(1e-12, 100_000)).unwrap();
        for (b, zj) in fit.beta_hat.iter().zip(&z) {
            prop_assert!((b - soft_threshold(*zj, lambda)).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_solution_iff_lambda_at_least_max_correlation(
        n in 3usize..12, p in 2usize..20, seed in any::<u64>()
    ) {
        let x = sample_sphere_matrix(n, p, Seed(seed)).unwrap();
        let mut rng = Seed(seed ^ 9).rng();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let t = x.tr_mul_vec(&y).iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let opts = SolverOptions::new(1e-12, 200_000);
        let above = fit_with(&x, &y, 1.0001 * t, &opts).unwrap();
        prop_assert!(above.beta_hat.iter().all(|b| *b == 0.0));
        let below = fit_with(&x, &y, 0.9999 * t, &opts).unwrap();
        prop_assert!(below.beta_hat.iter().any(|b| *b != 0.0));
    }
}
