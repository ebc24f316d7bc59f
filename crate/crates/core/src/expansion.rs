//! Perturbation expansions of `E(z) = B - z A(zeta)` near `z = 0` and `z = infinity`.

use num_complex::Complex64;
use serde::Serialize;

use crate::cd_form::CdSystem;
use crate::decay::least_squares_slope;
use crate::error::{Error, Result};
use crate::linalg::{
    cluster_sorted, complex_schur, max_abs_c, min_cost_assignment, op_norm_real, select_columns, spectral_decomposition,
    sym_eigen, to_complex, CMat, Mat,
};

/// Relative gap used to group eigenvalues into families and subfamilies.
pub const FAMILY_GAP: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct Subfamily {
    /// `c_jk` near zero, `b_jk` near infinity.
    pub value: Complex64,
    pub multiplicity: usize,
    /// Projector in the family coordinates.
    pub p: CMat,
    /// Nilpotent part in the family coordinates.
    pub d: CMat,
}

impl Subfamily {
    pub fn is_defective(&self) -> bool {
        max_abs_c(&self.d) > 1e-8 * self.value.norm().max(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct Family {
    /// `lambda_j^1` near zero, `lambda_j` near infinity.
    pub speed: f64,
    /// Orthonormal eigenbasis as columns.
    pub r: Mat,
    pub sub: Vec<Subfamily>,
}

fn decompose_reduced(reduced: &Mat) -> Result<Vec<Subfamily>> {
    let dec = spectral_decomposition(&to_complex(reduced), FAMILY_GAP)?;
    Ok(dec
        .clusters
        .into_iter()
        .map(|c| Subfamily { value: c.eigenvalue, multiplicity: c.multiplicity, p: c.projector, d: c.nilpotent })
        .collect())
}

fn symmetric_families(a: &Mat) -> Vec<(f64, Mat)> {
    let (vals, vecs) = sym_eigen(a);
    let gap = FAMILY_GAP * op_norm_real(a);
    cluster_sorted(&vals, gap)
        .into_iter()
        .map(|range| {
            let speed = vals[range.clone()].iter().sum::<f64>() / range.len() as f64;
            (speed, select_columns(&vecs, range))
        })
        .collect()
}

/// Expansion of the eigenvalues of `E(z)` tending to zero.
#[derive(Clone, Debug)]
pub struct ZeroExpansion {
    pub zeta: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub families: Vec<Family>,
    pub a11: Mat,
    pub a12: Mat,
    pub a21: Mat,
    pub a22: Mat,
    pub d: Mat,
    pub d_inv: Mat,
    pub p0: Mat,
    pub p1: Mat,
    pub p2: Mat,
    pub l1: Mat,
    pub r1: Mat,
    pub l2: Mat,
    pub r2: Mat,
    pub lminus1: Mat,
    pub rminus1: Mat,
    pub fminus0: Mat,
}

fn block(n1: usize, n2: usize, b11: &Mat, b12: &Mat, b21: &Mat, b22: &Mat) -> Mat {
    let n = n1 + n2;
    let mut out = Mat::zeros(n, n);
    out.view_mut((0, 0), (n1, n1)).copy_from(b11);
    out.view_mut((0, n1), (n1, n2)).copy_from(b12);
    out.view_mut((n1, 0), (n2, n1)).copy_from(b21);
    out.view_mut((n1, n1), (n2, n2)).copy_from(b22);
    out
}

fn hstack(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn vstack(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn expand_zero(cd: &CdSystem, zeta: &[f64]) -> Result<ZeroExpansion> {
    if zeta.len() != cd.m {
        return Err(Error::Dimension(format!("direction has {} entries, system has m = {}", zeta.len(), cd.m)));
    }
    let (n1, n2) = (cd.n1, cd.n2);
    let a = cd.a_of(zeta);
    let (a11, a12, a21, a22) = cd.blocks(&a);
    let d = cd.d.clone();
    let di = cd.d_inv();
    let di2 = &di * &di;

    let mut families = Vec::new();
    for (speed, r) in symmetric_families(&a11) {
        let ar = &a21 * &r;
        let reduced = ar.transpose() * &di * &ar;
        families.push(Family { speed, r, sub: decompose_reduced(&reduced)? });
    }

    let z11 = Mat::zeros(n1, n1);
    let z12 = Mat::zeros(n1, n2);
    let z21 = Mat::zeros(n2, n1);
    let z22 = Mat::zeros(n2, n2);
    let p0 = block(n1, n2, &Mat::identity(n1, n1), &z12, &z21, &z22);
    let p1 = block(n1, n2, &z11, &(&a12 * &di), &(&di * &a21), &z22);
    let p2 = block(
        n1,
        n2,
        &(-&a12 * &di2 * &a21),
        &(&a12 * &di * &a22 * &di - &a11 * &a12 * &di2),
        &(&di * &a22 * &di * &a21 - &di2 * &a21 * &a11),
        &(&di * &a21 * &a12 * &di),
    );
    let l1 = hstack(&z11, &(&a12 * &di));
    let r1 = vstack(&z11, &(&di * &a21));
    let half = -(&a12 * &di2 * &a21) * 0.5;
    let l2 = hstack(&half, &(&a12 * &di * &a22 * &di - &a11 * &a12 * &di2));
    let r2 = vstack(&half, &(&di * &a22 * &di * &a21 - &di2 * &a21 * &a11));
    let lminus1 = hstack(&(-(&di * &a21)), &z22);
    let rminus1 = vstack(&(-(&a12 * &di)), &z22);
    Ok(ZeroExpansion {
        zeta: zeta.to_vec(),
        n1,
        n2,
        families,
        a11,
        a12,
        a21,
        a22,
        fminus0: d.clone(),
        d,
        d_inv: di,
        p0,
        p1,
        p2,
        l1,
        r1,
        l2,
        r2,
        lminus1,
        rminus1,
    })
}

fn cmul(m: &Mat, z: Complex64) -> CMat {
    m.map(|x| z * x)
}

impl ZeroExpansion {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// `lambda_jk(z) = -z lambda_j^1 - z^2 c_jk`, one entry per subfamily.
    pub fn predicted(&self, z: Complex64) -> Vec<Vec<Complex64>> {
        self.families
            .iter()
            .map(|f| f.sub.iter().map(|s| -z * f.speed - z * z * s.value).collect())
            .collect()
    }

    /// `R0 r_j p_jk r_j^T L0`.
    pub fn projector(&self, j: usize, k: usize) -> CMat {
        let f = &self.families[j];
        let rr = to_complex(&f.r);
        let inner = &rr * &f.sub[k].p * rr.transpose();
        let n = self.n();
        let mut out = CMat::zeros(n, n);
        out.view_mut((0, 0), (self.n1, self.n1)).copy_from(&inner);
        out
    }

    /// `P0 + z P1 + z^2 P2`.
    pub fn total_projector(&self, z: Complex64) -> CMat {
        to_complex(&self.p0) + cmul(&self.p1, z) + cmul(&self.p2, z * z)
    }

    pub fn left(&self, z: Complex64) -> CMat {
        let n = self.n();
        let mut l0 = Mat::zeros(self.n1, n);
        l0.view_mut((0, 0), (self.n1, self.n1)).fill_with_identity();
        to_complex(&l0) + cmul(&self.l1, z) + cmul(&self.l2, z * z)
    }

    pub fn right(&self, z: Complex64) -> CMat {
        self.left(Complex64::new(0.0, 0.0)).transpose() + cmul(&self.r1, z) + cmul(&self.r2, z * z)
    }

    /// `F(z) = -z A11 - z^2 A12 D^{-1} A21`.
    pub fn reduced(&self, z: Complex64) -> CMat {
        cmul(&self.a11, -z) - cmul(&(&self.a12 * &self.d_inv * &self.a21), z * z)
    }

    pub fn left_minus(&self, z: Complex64) -> CMat {
        let n = self.n();
        let mut lm = Mat::zeros(self.n2, n);
        lm.view_mut((0, self.n1), (self.n2, self.n2)).fill_with_identity();
        to_complex(&lm) + cmul(&self.lminus1, z)
    }

    pub fn right_minus(&self, z: Complex64) -> CMat {
        let n = self.n();
        let mut rm = Mat::zeros(n, self.n2);
        rm.view_mut((self.n1, 0), (self.n2, self.n2)).fill_with_identity();
        to_complex(&rm) + cmul(&self.rminus1, z)
    }

    /// `F_-(z) = D - z A22`.
    pub fn reduced_minus(&self, z: Complex64) -> CMat {
        to_complex(&self.fminus0) - cmul(&self.a22, z)
    }

    /// Leading-order block projector with the off-diagonal corrections kept.
    pub fn pbar(&self, j: usize, k: usize, z: Complex64) -> CMat {
        let f = &self.families[j];
        let rr = to_complex(&f.r);
        let core = &rr * &f.sub[k].p * rr.transpose();
        let a12d = to_complex(&(&self.a12 * &self.d_inv));
        let da21 = to_complex(&(&self.d_inv * &self.a21));
        let (n1, n2) = (self.n1, self.n2);
        let mut out = CMat::zeros(n1 + n2, n1 + n2);
        out.view_mut((0, 0), (n1, n1)).copy_from(&core);
        out.view_mut((0, n1), (n1, n2)).copy_from(&(&core * &a12d * z));
        out.view_mut((n1, 0), (n2, n1)).copy_from(&(&da21 * &core * z));
        out.view_mut((n1, n1), (n2, n2)).copy_from(&(&da21 * &core * &a12d * (z * z)));
        out
    }

    /// Largest real part among the `c_jk`; negative under the dissipation condition.
    pub fn max_re_c(&self) -> f64 {
        self.families.iter().flat_map(|f| f.sub.iter().map(|s| s.value.re)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Expansion of the eigenvalues of `E(z)` at high frequency.
#[derive(Clone, Debug)]
pub struct InfinityExpansion {
    pub zeta: Vec<f64>,
    pub families: Vec<Family>,
}

pub fn expand_infinity(cd: &CdSystem, zeta: &[f64]) -> Result<InfinityExpansion> {
    if zeta.len() != cd.m {
        return Err(Error::Dimension(format!("direction has {} entries, system has m = {}", zeta.len(), cd.m)));
    }
    let a = cd.a_of(zeta);
    let mut families = Vec::new();
    for (speed, r) in symmetric_families(&a) {
        let reduced = r.transpose() * &cd.b * &r;
        families.push(Family { speed, r, sub: decompose_reduced(&reduced)? });
    }
    Ok(InfinityExpansion { zeta: zeta.to_vec(), families })
}

impl InfinityExpansion {
    /// `lambda_jk(z) = -z lambda_j + b_jk`.
    pub fn predicted(&self, z: Complex64) -> Vec<Vec<Complex64>> {
        self.families.iter().map(|f| f.sub.iter().map(|s| -z * f.speed + s.value).collect()).collect()
    }

    /// `R_j p_jk R_j^T`.
    pub fn projector(&self, j: usize, k: usize) -> CMat {
        let rr = to_complex(&self.families[j].r);
        &rr * &self.families[j].sub[k].p * rr.transpose()
    }

    /// `R_j d_jk R_j^T`.
    pub fn nilpotent(&self, j: usize, k: usize) -> CMat {
        let rr = to_complex(&self.families[j].r);
        &rr * &self.families[j].sub[k].d * rr.transpose()
    }

    pub fn max_re_b(&self) -> f64 {
        self.families.iter().flat_map(|f| f.sub.iter().map(|s| s.value.re)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.families.iter().map(|f| f.speed.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Zero,
    Infinity,
}

/// Fitted error order of one eigenvalue subfamily.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualFit {
    pub family: usize,
    pub subfamily: usize,
    pub multiplicity: usize,
    pub defective: bool,
    /// Prediction exact to roundoff on every sample; no slope is meaningful.
    pub exact: bool,
    pub errors: Vec<f64>,
    pub slope: f64,
    /// Slope the fit must reach (lower bound near zero, upper bound near infinity).
    pub threshold: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub regime: Regime,
    pub rho: Vec<f64>,
    pub fits: Vec<ResidualFit>,
    pub passes: bool,
}

/// Compares predicted eigenvalue families with the exact spectrum of
/// `E(i rho zeta)` and fits the error order in `rho`.
pub fn check_expansion_residuals(cd: &CdSystem, zeta: &[f64], rho: &[f64], regime: Regime) -> Result<ResidualReport> {
    if rho.len() < 4 {
        return Err(Error::InsufficientSamples(format!("{} radii given, at least 4 required", rho.len())));
    }
    if rho.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InsufficientSamples("radii must be positive".into()));
    }
    let n = cd.n();
    let families = match regime {
        Regime::Zero => expand_zero(cd, zeta)?.families,
        Regime::Infinity => expand_infinity(cd, zeta)?.families,
    };
    let members: Vec<(usize, usize, &Subfamily)> =
        families.iter().enumerate().flat_map(|(j, f)| f.sub.iter().enumerate().map(move |(k, s)| (j, k, s))).collect();
    let predict = |z: Complex64| -> Vec<Complex64> {
        members
            .iter()
            .map(|&(j, _, s)| match regime {
                Regime::Zero => -z * families[j].speed - z * z * s.value,
                Regime::Infinity => -z * families[j].speed + s.value,
            })
            .collect()
    };

    let mut errors = vec![Vec::with_capacity(rho.len()); members.len()];
    for &r in rho {
        let z = Complex64::new(0.0, r);
        let xi: Vec<f64> = zeta.iter().map(|v| v * r).collect();
        let exact = complex_schur(&cd.symbol(&xi))?.eigenvalues();
        // one row per predicted eigenvalue counted with multiplicity
        let mut owner = Vec::new();
        let mut values = Vec::new();
        for (o, v) in predict(z).into_iter().enumerate() {
            for _ in 0..members[o].2.multiplicity {
                owner.push(o);
                values.push(v);
            }
        }
        let mut cost = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            for (j, e) in exact.iter().enumerate() {
                cost[i * n + j] = (v - e).norm();
            }
        }
        let assign = min_cost_assignment(&cost, n);
        let mut worst = vec![0.0f64; members.len()];
        for (i, &o) in owner.iter().enumerate() {
            worst[o] = worst[o].max((values[i] - exact[assign[i]]).norm());
        }
        for (o, w) in worst.into_iter().enumerate() {
            errors[o].push(w);
        }
    }

    let log_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let scale = op_norm_real(&cd.a_of(zeta)).max(op_norm_real(&cd.b)).max(1.0);
    let mut fits = Vec::new();
    for (o, &(j, k, sub)) in members.iter().enumerate() {
        let (defective, mult) = (sub.is_defective(), sub.multiplicity);
        let errs = &errors[o];
        let floor = 1e-13 * scale * rho.iter().fold(1.0f64, |m, r| m.max(*r));
        let exact = errs.iter().all(|&e| e <= floor);
        let threshold = match (regime, defective) {
            (Regime::Zero, false) => 3.0 - 0.3,
            (Regime::Zero, true) => 2.0 + 1.0 / mult as f64 - 0.3,
            (Regime::Infinity, false) => -1.0 + 0.3,
            (Regime::Infinity, true) => -1.0 / mult as f64 + 0.3,
        };
        let (slope, passes) = if exact {
            (f64::NAN, true)
        } else {
            // samples sitting at the roundoff floor are excluded from the fit
            let pts: Vec<(f64, f64)> =
                log_rho.iter().zip(errs).filter(|(_, &e)| e > floor).map(|(&x, &e)| (x, e.ln())).collect();
            if pts.len() < 3 {
                (f64::NAN, true)
            } else {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                let s = least_squares_slope(&xs, &ys).0;
                let ok = match regime {
                    Regime::Zero => s >= threshold,
                    Regime::Infinity => s <= threshold,
                };
                (s, ok)
            }
        };
        fits.push(ResidualFit {
            family: j,
            subfamily: k,
            multiplicity: mult,
            defective,
            exact,
            errors: errs.clone(),
            slope,
            threshold,
            passes,
        });
    }
    let passes = fits.iter().all(|f| f.passes);
    Ok(ResidualReport { regime, rho: rho.to_vec(), fits, passes })
}
