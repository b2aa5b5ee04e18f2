//! Matrices with i.i.d. columns uniform on the unit sphere of ℝⁿ, and the
//! exact law of `|⟨X_j, v⟩|` for such a column and a fixed unit `v`.
//!
//! Randomness: every stream is a `ChaCha8Rng` seeded from a 64-bit [`Seed`];
//! Gaussian coordinates come from `rand_distr::StandardNormal` (ziggurat).
//! Both choices are fixed so that a seed reproduces the same matrix
//! bit-for-bit on a given platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm2, DesignMatrix};

/// The random number generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Child seed for substream `index`. Trials and directions each get their
    /// own child, so results do not depend on execution order.
    pub fn derive(self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// A uniformly distributed point on the unit sphere of ℝⁿ (normalized Gaussian).
pub fn sample_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&g);
        if norm > 0.0 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn sample_sphere_matrix_with<R: Rng + ?Sized>(
    n: usize,
    p0: usize,
    rng: &mut R,
) -> Result<DesignMatrix> {
    let mut data = Vec::with_capacity(n * p0);
    for _ in 0..p0 {
        data.extend(sample_unit_vector(n, rng));
    }
    DesignMatrix::from_column_major(n, p0, data)
}

/// `n × p0` matrix with i.i.d. uniform unit columns. `p0 = 0` gives an empty block.
pub fn sample_sphere_matrix(n: usize, p0: usize, seed: Seed) -> Result<DesignMatrix> {
    sample_sphere_matrix_with(n, p0, &mut seed.rng())
}

/// Law of `|⟨X_j, v⟩|` for `X_j` uniform on the sphere of ℝⁿ and unit `v`.
///
/// Its density is proportional to `(1 − z²)^{(n−3)/2}` on `[0, 1]`; equivalently
/// `Z² ~ Beta(1/2, (n−1)/2)`, which is how the CDF is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DotLaw {
    n: usize,
}

impl DotLaw {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                expected: "n >= 2",
            });
        }
        Ok(Self { n })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// CDF `G(z)` via the regularized incomplete beta function on `z²`.
    pub fn cdf(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfRange {
                name: "z",
                value: z,
                expected: "[0, 1]",
            });
        }
        Ok(self.cdf_unchecked(z))
    }

    pub(crate) fn cdf_unchecked(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        if z == 0.0 {
            return 0.0;
        }
        if z == 1.0 {
            return 1.0;
        }
        statrs::function::beta::beta_reg(0.5, (self.n as f64 - 1.0) / 2.0, z * z)
    }
}

pub fn dot_cdf(law: &DotLaw, z: f64) -> Result<f64> {
    law.cdf(z)
}
