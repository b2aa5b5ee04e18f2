//! Dense design matrices, column index sets and restricted singular values.
//!
//! Storage is column-major so that every column `X_j` is a contiguous slice;
//! nearly every algorithm in this crate works column-by-column.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `‖X_j‖₂ − 1` for a column to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Inner product with a fixed left-to-right summation order.
///
/// Every `|⟨X_j, v⟩|` in the crate goes through here, so identical column
/// data always produces bit-identical dot products regardless of which matrix
/// the column lives in.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A dense `n × p` real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl DesignMatrix {
    /// Builds a matrix from column-major data. `cols` may be zero (an empty
    /// block, e.g. a zero-column random append), `rows` may not.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidMatrix("matrix needs at least one row".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, column {}",
                k % rows,
                k / rows
            )));
        }
        let mut m = Self {
            rows,
            cols,
            data,
            normalized: false,
        };
        m.normalized = m.columns_are_unit();
        Ok(m)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(j) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::InvalidMatrix(format!(
                "column {j} has {} entries, expected {rows}",
                columns[j].len()
            )));
        }
        Self::from_column_major(rows, columns.len(), columns.concat())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidMatrix(format!(
                "row {i} has {} entries, expected {p}",
                rows[i].len()
            )));
        }
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            data.extend(rows.iter().map(|r| r[j]));
        }
        Self::from_column_major(n, p, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_column_major(n, n, data).expect("identity is well formed")
    }

    /// An `n × 0` matrix.
    pub fn empty(rows: usize) -> Result<Self> {
        Self::from_column_major(rows, 0, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows).take(self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    fn columns_are_unit(&self) -> bool {
        self.columns()
            .all(|c| (norm2(c) - 1.0).abs() <= NORMALIZATION_TOL)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }

    /// `X β`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.cols, "coefficient length must equal p");
        let mut out = vec![0.0; self.rows];
        for (col, &b) in self.columns().zip(beta) {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(col) {
                    *o += b * x;
                }
            }
        }
        out
    }

    /// `Xᵗ r`.
    pub fn tr_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.rows, "vector length must equal n");
        self.columns().map(|c| dot(c, r)).collect()
    }

    /// `|⟨X_j, v⟩|` for every column.
    pub fn abs_dots(&self, v: &[f64]) -> Vec<f64> {
        self.columns().map(|c| dot(c, v).abs()).collect()
    }

    pub fn select(&self, set: &IndexSet) -> DesignMatrix {
        let mut data = Vec::with_capacity(self.rows * set.len());
        for &j in set.iter() {
            data.extend_from_slice(self.column(j));
        }
        DesignMatrix {
            rows: self.rows,
            cols: set.len(),
            data,
            normalized: self.normalized,
        }
    }

    /// Gram matrix `X_Tᵗ X_T`.
    pub fn gram(&self, set: &IndexSet) -> DMatrix<f64> {
        let t = set.len();
        let mut g = DMatrix::zeros(t, t);
        for (a, &ja) in set.iter().enumerate() {
            for (b, &jb) in set.iter().enumerate().skip(a) {
                let v = dot(self.column(ja), self.column(jb));
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }

    /// Largest singular value of the whole matrix.
    pub fn spectral_norm(&self) -> f64 {
        if self.cols == 0 {
            return 0.0;
        }
        // Eigen-decompose the smaller of XXᵗ and XᵗX.
        let eig = if self.rows < self.cols {
            let mut outer = DMatrix::zeros(self.rows, self.rows);
            for col in self.columns() {
                for a in 0..self.rows {
                    for b in a..self.rows {
                        outer[(a, b)] += col[a] * col[b];
                    }
                }
            }
            outer.fill_lower_triangle_with_upper_triangle();
            symmetric_eigenvalues(outer)
        } else {
            symmetric_eigenvalues(self.gram(&IndexSet::full(self.cols)))
        };
        eig.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub(crate) fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// A strictly increasing list of column indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Validates strict increase and `index < p`.
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidIndexSet(format!(
                "indices must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidIndexSet(format!(
                "index {bad} out of range for {p} columns"
            )));
        }
        Ok(Self(indices))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub(crate) fn check_range(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= p => Err(Error::InvalidIndexSet(format!(
                "index {last} out of range for {p} columns"
            ))),
            _ => Ok(()),
        }
    }
}

/// `[σ_min, σ_max]` of some column submatrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralInterval {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn normalize_columns(m: &DesignMatrix) -> Result<DesignMatrix> {
    let mut data = Vec::with_capacity(m.data.len());
    for (j, col) in m.columns().enumerate() {
        let norm = norm2(col);
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        data.extend(col.iter().map(|x| x / norm));
    }
    let mut out = DesignMatrix {
        rows: m.rows,
        cols: m.cols,
        data,
        normalized: false,
    };
    out.normalized = out.columns_are_unit();
    debug_assert!(out.normalized);
    Ok(out)
}

/// Mutual coherence `max_{j≠j'} |⟨X_j, X_j'⟩|`.
pub fn coherence(x: &DesignMatrix) -> Result<f64> {
    x.require_normalized()?;
    if x.cols < 2 {
        return Err(Error::TooFewColumns {
            needed: 2,
            got: x.cols,
        });
    }
    let mut mu = 0.0_f64;
    for a in 0..x.cols {
        let ca = x.column(a);
        for b in a + 1..x.cols {
            mu = mu.max(dot(ca, x.column(b)).abs());
        }
    }
    // Round-off can push a duplicated pair a hair above 1.
    Ok(mu.min(1.0))
}

/// Exact extreme singular values of `X_T`, from the eigenvalues of its Gram matrix.
pub fn submatrix_extremes(x: &DesignMatrix, set: &IndexSet) -> Result<SpectralInterval> {
    if set.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    set.check_range(x.cols)?;
    let ev = symmetric_eigenvalues(x.gram(set));
    // More columns than rows: rank deficient, so the minimum is exactly zero.
    let sigma_min = if set.len() > x.rows { 0.0 } else { ev[0].max(0.0).sqrt() };
    let sigma_max = ev[ev.len() - 1].max(0.0).sqrt().max(sigma_min);
    Ok(SpectralInterval {
        sigma_min,
        sigma_max,
    })
}

/// Coherence sandwich `1 − μ√t ≤ σ_min(X_T) ≤ σ_max(X_T) ≤ 1 + μ√t` for `|T| = t`.
/// The lower end is clamped at zero.
pub fn coherence_sigma_bounds(mu: f64, t: usize) -> SpectralInterval {
    let spread = mu * (t as f64).sqrt();
    SpectralInterval {
        sigma_min: (1.0 - spread).max(0.0),
        sigma_max: 1.0 + spread,
    }
}

/// `[X, X0]`, columns of `x` first.
pub fn concat(x: &DesignMatrix, x0: &DesignMatrix) -> Result<DesignMatrix> {
    if x.rows != x0.rows {
        return Err(Error::RowMismatch {
            left: x.rows,
            right: x0.rows,
        });
    }
    let mut data = Vec::with_capacity(x.data.len() + x0.data.len());
    data.extend_from_slice(&x.data);
    data.extend_from_slice(&x0.data);
    Ok(DesignMatrix {
        rows: x.rows,
        cols: x.cols + x0.cols,
        data,
        normalized: (x.normalized || x.cols == 0) && (x0.normalized || x0.cols == 0),
    })
}
