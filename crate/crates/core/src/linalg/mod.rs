//! Dense linear algebra used throughout: complex Schur forms, spectral
//! projectors, the matrix exponential and a linear assignment solver.

mod assignment;
mod expm;
mod schur;
mod spectral;

pub use assignment::min_cost_assignment;
pub use expm::expm;
pub use schur::{complex_schur, ComplexSchur};
pub use spectral::{
    cluster_complex, projector_smallest, spectral_decomposition, spectral_projector, SpectralCluster, SpectralDecomposition,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type Vector = DVector<f64>;
pub type CVector = DVector<Complex64>;

/// Largest condition number accepted by [`inverse_guarded`].
pub const MAX_CONDITION: f64 = 1e12;

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise asymmetry, relative to the largest entry (at least 1).
pub fn symmetry_defect(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / max_abs(m).max(1.0)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Spectral norm of a complex matrix.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn op_norm_real(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// 2-norm condition number, infinite for singular input.
pub fn condition_number(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (s.min(), s.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn condition_number_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (s.min(), s.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Inverse that refuses matrices with condition number above [`MAX_CONDITION`].
pub fn inverse_guarded(m: &Mat) -> Result<Mat> {
    let cond = condition_number(m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    m.clone().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))
}

pub fn inverse_guarded_c(m: &CMat) -> Result<CMat> {
    let cond = condition_number_c(m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    m.clone().try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending and
/// eigenvectors as matching columns.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Symmetric positive definite check returning the ascending spectrum.
pub fn require_spd(m: &Mat, what: &str) -> Result<Vec<f64>> {
    if symmetry_defect(m) > 1e-10 {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    let (vals, _) = sym_eigen(m);
    match vals.first() {
        Some(&v) if v <= 0.0 => Err(Error::NotSpd(format!("{what} has eigenvalue {v:e}"))),
        _ => Ok(vals),
    }
}

/// Groups ascending real values into runs whose consecutive gaps are below `tol`.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Columns `cols` of `m` as a new matrix.
pub fn select_columns(m: &Mat, cols: std::ops::Range<usize>) -> Mat {
    m.columns(cols.start, cols.len()).into_owned()
}

/// Orthonormal basis of the null space of `m`, columns of the result.
pub fn null_space(m: &Mat, tol: f64) -> Mat {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let gram = m.transpose() * m;
    let (vals, vecs) = sym_eigen(&gram);
    let scale = vals.last().copied().unwrap_or(0.0).max(1.0);
    let k = vals.iter().take_while(|&&v| v <= tol * tol * scale).count();
    select_columns(&vecs, 0..k)
}

/// Row-major nested copy, convenient for serialization.
pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
