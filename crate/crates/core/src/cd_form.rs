//! Change of variables to Conservative-Dissipative form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, inverse_guarded, max_abs, require_spd, sym_eigen, symmetrize, Mat, MAX_CONDITION};
use crate::nonlinearity::{Conjugated, Nonlinearity};
use crate::system::{assemble_symbol, validate_h1, RawSystem};

/// System with symmetric `A_a` and `B = diag(0, D)`, `D` stable.
#[derive(Clone, Debug)]
pub struct CdSystem {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub a: Vec<Mat>,
    pub d: Mat,
    pub b: Mat,
    /// Transform `w = M u` from the original unknowns.
    pub transform: Mat,
    pub transform_inv: Mat,
    pub origin: Arc<RawSystem>,
    /// Nonlinearity expressed in the new unknowns.
    pub nonlinearity: Option<Arc<dyn Nonlinearity>>,
}

/// Block selection and injection matrices for the split `w = (w_c, w_d)`.
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    pub l0: Mat,
    pub r0: Mat,
    pub lminus: Mat,
    pub rminus: Mat,
    pub q0: Mat,
    pub qminus: Mat,
}

/// Symmetric positive definite square root by spectral decomposition.
pub fn spd_sqrt(s: &Mat) -> Result<Mat> {
    spd_power(s, 0.5)
}

/// `s^p` for symmetric positive definite `s`.
pub fn spd_power(s: &Mat, p: f64) -> Result<Mat> {
    if max_abs(&(s - s.transpose())) > 1e-10 * max_abs(s).max(1.0) {
        return Err(Error::NotSpd("input is not symmetric".into()));
    }
    let n = s.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || s[(i, j)] == 0.0));
    if diagonal {
        if let Some(i) = (0..n).find(|&i| s[(i, i)] <= 0.0) {
            return Err(Error::NotSpd(format!("eigenvalue {:e} is not positive", s[(i, i)])));
        }
        return Ok(Mat::from_fn(n, n, |i, j| if i == j { s[(i, i)].powf(p) } else { 0.0 }));
    }
    let (vals, vecs) = sym_eigen(s);
    if let Some(&v) = vals.first() {
        if v <= 0.0 {
            return Err(Error::NotSpd(format!("eigenvalue {v:e} is not positive")));
        }
    }
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * vals[j].powf(p));
    Ok(symmetrize(&(scaled * vecs.transpose())))
}

impl CdSystem {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// `A(zeta) = sum_a zeta_a A_a`.
    pub fn a_of(&self, zeta: &[f64]) -> Mat {
        let n = self.n();
        let mut out = Mat::zeros(n, n);
        for (alpha, a) in self.a.iter().enumerate() {
            out += a * zeta[alpha];
        }
        out
    }

    pub fn symbol(&self, xi: &[f64]) -> crate::linalg::CMat {
        assemble_symbol(&self.a, &self.b, xi)
    }

    /// Blocks `(A11, A12, A21, A22)` of a matrix in the `(n1, n2)` split.
    pub fn blocks(&self, mat: &Mat) -> (Mat, Mat, Mat, Mat) {
        let (n1, n2) = (self.n1, self.n2);
        (
            mat.view((0, 0), (n1, n1)).into_owned(),
            mat.view((0, n1), (n1, n2)).into_owned(),
            mat.view((n1, 0), (n2, n1)).into_owned(),
            mat.view((n1, n1), (n2, n2)).into_owned(),
        )
    }

    pub fn d_inv(&self) -> Mat {
        self.d.clone().try_inverse().expect("dissipative block is invertible by construction")
    }

    /// Largest characteristic speed over the given unit directions.
    pub fn max_speed(&self, directions: &[Vec<f64>]) -> f64 {
        directions
            .iter()
            .map(|z| sym_eigen(&self.a_of(z)).0.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }

    pub fn projectors(&self) -> ProjectorSet {
        let (n1, n2, n) = (self.n1, self.n2, self.n());
        let mut l0 = Mat::zeros(n1, n);
        let mut lminus = Mat::zeros(n2, n);
        for i in 0..n1 {
            l0[(i, i)] = 1.0;
        }
        for i in 0..n2 {
            lminus[(i, n1 + i)] = 1.0;
        }
        let r0 = l0.transpose();
        let rminus = lminus.transpose();
        let q0 = &r0 * &l0;
        let qminus = &rminus * &lminus;
        ProjectorSet { l0, r0, lminus, rminus, q0, qminus }
    }
}

/// Builds `M` and the Conservative-Dissipative form of `sys`.
pub fn to_cd_form(sys: &RawSystem) -> Result<(Mat, CdSystem)> {
    let report = validate_h1(sys);
    if !report.passes {
        return Err(Error::Hypothesis(format!("symmetrizer check failed: {report:?}")));
    }
    let cond = condition_number(&sys.a0);
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    require_spd(&sys.a0, "A0")?;
    let (n1, n2, n) = (sys.n1, sys.n2, sys.n());
    let a0_inv = symmetrize(&inverse_guarded(&sys.a0)?);
    let a0_11 = sys.a0.view((0, 0), (n1, n1)).into_owned();
    let y21 = a0_inv.view((n1, 0), (n2, n1)).into_owned();
    let y22 = a0_inv.view((n1, n1), (n2, n2)).into_owned();
    let m11 = spd_power(&a0_11, -0.5)?;
    let y22_half = spd_sqrt(&y22)?;
    let y22_neg_half = spd_power(&y22, -0.5)?;
    let m21 = &y22_neg_half * &y21;
    let mut transform = Mat::zeros(n, n);
    transform.view_mut((0, 0), (n1, n1)).copy_from(&m11);
    transform.view_mut((n1, 0), (n2, n1)).copy_from(&m21);
    transform.view_mut((n1, n1), (n2, n2)).copy_from(&y22_half);
    let transform_inv = inverse_guarded(&transform)?;

    let a = sys.a.iter().map(|a| symmetrize(&(&transform * a * &sys.a0 * transform.transpose()))).collect();
    let ba0 = &sys.b * &sys.a0;
    let d_raw = ba0.view((n1, n1), (n2, n2)).into_owned();
    let d = &y22_half * d_raw * &y22_half;
    let mut b = Mat::zeros(n, n);
    b.view_mut((n1, n1), (n2, n2)).copy_from(&d);

    let identity = max_abs(&(&transform - Mat::identity(n, n))) == 0.0;
    let nonlinearity = sys.nonlinearity.clone().map(|inner| -> Arc<dyn Nonlinearity> {
        if identity {
            inner
        } else {
            Arc::new(Conjugated { inner, m: transform.clone(), m_inv: transform_inv.clone() })
        }
    });
    let cd = CdSystem {
        m: sys.m,
        n1,
        n2,
        a,
        d,
        b,
        transform: transform.clone(),
        transform_inv,
        origin: Arc::new(sys.clone()),
        nonlinearity,
    };
    Ok((transform, cd))
}
