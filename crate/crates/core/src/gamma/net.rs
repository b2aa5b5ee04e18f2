//! Deterministic ε-nets of the unit sphere in dimensions 1, 2 and 3.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    pub dimension: usize,
    pub epsilon: f64,
    pub points: Vec<Vec<f64>>,
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cardinality bound `2d(1 + 2/ε)^{d−1}` for an ε-net of the sphere of ℝ^d.
    pub fn cardinality_bound(dimension: usize, epsilon: f64) -> f64 {
        2.0 * dimension as f64 * (1.0 + 2.0 / epsilon).powi(dimension as i32 - 1)
    }

    /// Euclidean distance from `u` to the nearest net point.
    pub fn distance_to(&self, u: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|q| {
                q.iter()
                    .zip(u)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds an ε-net (Euclidean covering radius ≤ ε) of the unit sphere of ℝ^d.
///
/// A chord of length ε subtends the angle `θ = 2·asin(ε/2)`, so it suffices to
/// put every point of the sphere within geodesic distance θ of the net.
/// * d = 2: equally spaced angles with spacing at most θ.
/// * d = 3: latitude rings spaced at most θ apart, each ring carrying points
///   whose along-ring spacing is at most θ. A point is then within θ/2 of a
///   ring (along its meridian) and within θ/2 of a ring point (along the ring).
pub fn epsilon_net(d: usize, epsilon: f64) -> Result<EpsilonNet> {
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            expected: "(0, 2]",
        });
    }
    let theta = 2.0 * (epsilon / 2.0).asin();
    let points = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let k = ((2.0 * PI / theta).ceil() as usize).max(2);
            (0..k)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / k as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        3 => {
            let rings = ((PI / theta).ceil() as usize).max(1);
            let mut pts = Vec::new();
            for r in 0..=rings {
                if r == 0 || r == rings {
                    pts.push(vec![0.0, 0.0, if r == 0 { 1.0 } else { -1.0 }]);
                    continue;
                }
                let (sp, cp) = (PI * r as f64 / rings as f64).sin_cos();
                let count = ((2.0 * PI * sp / theta).ceil() as usize).max(1);
                for i in 0..count {
                    let az = 2.0 * PI * i as f64 / count as f64;
                    pts.push(vec![sp * az.cos(), sp * az.sin(), cp]);
                }
            }
            pts
        }
        _ => return Err(Error::DimensionUnsupported(d)),
    };
    Ok(EpsilonNet {
        dimension: d,
        epsilon,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm2;
    use crate::sphere::{sample_unit_vector, Seed};

    fn covers(net: &EpsilonNet, probes: usize, seed: u64) -> f64 {
        let mut rng = Seed(seed).rng();
        (0..probes)
            .map(|_| net.distance_to(&sample_unit_vector(net.dimension, &mut rng)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_sphere() {
        let net = epsilon_net(1, 0.3).unwrap();
        assert_eq!(net.points, vec![vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn circle_net_spacing_and_size() {
        let net = epsilon_net(2, 0.1).unwrap();
        let spacing = 2.0 * PI / net.len() as f64;
        assert!(spacing <= 2.0 * 0.05f64.asin() + 1e-15);
        assert!(net.len() as f64 <= 84.0);
        assert!(covers(&net, 10_000, 1) <= 0.1);
    }

    #[test]
    fn diameter_case_is_antipodal_pair() {
        let net = epsilon_net(2, 2.0).unwrap();
        assert_eq!(net.len(), 2);
        assert!((net.points[0][0] + net.points[1][0]).abs() < 1e-15);
        assert!(covers(&net, 10_000, 2) <= 2.0);
    }

    #[test]
    fn sphere_nets_cover_and_respect_bound() {
        for &eps in &[2.0, 1.0, 0.5, 0.2, 0.1] {
            let net = epsilon_net(3, eps).unwrap();
            for q in &net.points {
                assert!((norm2(q) - 1.0).abs() < 1e-12);
            }
            assert!(net.len() as f64 <= EpsilonNet::cardinality_bound(3, eps), "eps={eps}");
            assert!(covers(&net, 10_000, 3) <= eps, "eps={eps}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(epsilon_net(4, 0.5), Err(Error::DimensionUnsupported(4))));
        assert!(epsilon_net(2, 0.0).is_err());
        assert!(epsilon_net(2, 2.5).is_err());
    }
}
