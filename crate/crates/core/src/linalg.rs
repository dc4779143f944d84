//! Small dense helpers shared by the solver, the model and the controllers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Infinity norm of a vector (max absolute entry). Zero for empty vectors.
pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Induced infinity norm of a matrix: the maximum absolute row sum.
pub fn mat_inf_norm(m: &Mat) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Row-major nested representation used by every JSON format in the crate.
pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Builds a matrix from nested rows. `ncols` disambiguates the zero-row case.
pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Mat, String> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
        }
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Vertically stacks matrices with equal column counts.
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let ncols = blocks.first().map_or(0, |b| b.ncols());
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(nrows, ncols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), ncols);
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Eigenvalues of a symmetric matrix (symmetrized first to absorb roundoff).
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues()
}

pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Numerical rank from singular values, relative to the largest one.
pub fn numerical_rank(m: &Mat, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Serde adapter for `Mat` as row-major nested arrays. Column count is taken
/// from the first row, so it is only suitable for matrices with at least one
/// row; shape-sensitive formats store dimensions alongside.
pub mod rows_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let ncols = rows.first().map_or(0, |r| r.len());
        from_rows(&rows, ncols).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vector` as a flat array.
pub mod vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        Ok(Vector::from_vec(v))
    }
}
