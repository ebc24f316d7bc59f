//! System data model, structural hypothesis checks and builtin examples.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetry_defect, to_complex, CMat, Mat};
use crate::nonlinearity::{EulerDampingNonlinearity, Nonlinearity, PSystemNonlinearity};

/// Relative tolerance for symmetry and block-structure checks.
pub const TOL_SYM: f64 = 1e-10;
/// Real parts of the dissipative spectrum must lie below `-TOL_NEG`.
pub const TOL_NEG: f64 = 1e-12;
/// Agreement required between finite-difference Jacobians at 0 and the stored
/// linearization.
pub const TOL_LIN_FD: f64 = 1e-6;

/// Linearized system `u_t + sum_a A_a u_{x_a} = B u` with symmetrizer `A0`,
/// optionally carrying the nonlinear flux and source it was derived from.
#[derive(Clone, Debug)]
pub struct RawSystem {
    pub name: String,
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub a: Vec<Mat>,
    pub b: Mat,
    pub a0: Mat,
    pub nonlinearity: Option<Arc<dyn Nonlinearity>>,
    /// Set for systems constructed for testing rather than taken from a model.
    pub synthetic: bool,
}

impl RawSystem {
    /// Checks shapes and that the first `n1` rows of `B` vanish.
    pub fn new(name: impl Into<String>, n1: usize, n2: usize, a: Vec<Mat>, b: Mat, a0: Mat) -> Result<Self> {
        let n = n1 + n2;
        let m = a.len();
        if !(1..=3).contains(&m) {
            return Err(Error::Dimension(format!("space dimension must be 1, 2 or 3, got {m}")));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::Dimension("both n1 and n2 must be positive".into()));
        }
        for (k, mat) in a.iter().chain([&b, &a0]).enumerate() {
            if mat.shape() != (n, n) {
                return Err(Error::Dimension(format!("matrix #{k} has shape {:?}, expected ({n}, {n})", mat.shape())));
            }
        }
        for i in 0..n1 {
            if b.row(i).iter().any(|&x| x != 0.0) {
                return Err(Error::Hypothesis(format!("row {i} of B must vanish for a conservative variable")));
            }
        }
        Ok(Self { name: name.into(), m, n1, n2, a, b, a0, nonlinearity: None, synthetic: false })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Attaches a nonlinearity after checking its Jacobians at 0 against the
    /// stored linearization.
    pub fn with_nonlinearity(mut self, nl: Arc<dyn Nonlinearity>) -> Result<Self> {
        if nl.dim() != self.n() || nl.space_dim() != self.m {
            return Err(Error::Dimension("nonlinearity dimensions do not match the system".into()));
        }
        let zero = vec![0.0; self.n()];
        let mut out = vec![0.0; self.n()];
        for alpha in 0..self.m {
            nl.flux(&zero, alpha, &mut out);
            if out.iter().any(|x| x.abs() > 1e-14) {
                return Err(Error::Hypothesis(format!("flux {alpha} does not vanish at 0")));
            }
            let jac = nl.flux_jacobian(&zero, alpha);
            let err = max_abs(&(&jac - &self.a[alpha])) / max_abs(&self.a[alpha]).max(1.0);
            if err > TOL_LIN_FD {
                return Err(Error::Hypothesis(format!("flux {alpha} Jacobian at 0 differs from A by {err:e}")));
            }
        }
        nl.source(&zero, &mut out);
        if out.iter().any(|x| x.abs() > 1e-14) {
            return Err(Error::Hypothesis("source does not vanish at 0".into()));
        }
        let jac = nl.source_jacobian(&zero);
        let err = max_abs(&(&jac - &self.b)) / max_abs(&self.b).max(1.0);
        if err > TOL_LIN_FD {
            return Err(Error::Hypothesis(format!("source Jacobian at 0 differs from B by {err:e}")));
        }
        self.nonlinearity = Some(nl);
        Ok(self)
    }

    pub fn symbol(&self, xi: &[f64]) -> CMat {
        assemble_symbol(&self.a, &self.b, xi)
    }
}

/// `E(i xi) = B - i sum_a xi_a A_a`.
pub fn assemble_symbol(a: &[Mat], b: &Mat, xi: &[f64]) -> CMat {
    let mut e = to_complex(b);
    for (alpha, mat) in a.iter().enumerate() {
        let s = Complex64::new(0.0, -xi[alpha]);
        e.zip_apply(mat, |z, x| *z += s * x);
    }
    e
}

/// Outcome of the symmetrizer hypothesis check.
#[derive(Clone, Debug, Serialize)]
pub struct H1Report {
    pub a0_spd: bool,
    pub symmetry_defects: Vec<f64>,
    pub ba0_block_ok: bool,
    /// Eigenvalues of the dissipative block of `B A0` as `[re, im]` pairs.
    pub d_spectrum: Vec<[f64; 2]>,
    pub passes: bool,
}

/// Checks `A0` SPD, `A_a A0` symmetric and `B A0 = diag(0, D)` with `D` stable.
pub fn validate_h1(sys: &RawSystem) -> H1Report {
    let n1 = sys.n1;
    let a0_spd = symmetry_defect(&sys.a0) <= TOL_SYM && {
        let (vals, _) = crate::linalg::sym_eigen(&sys.a0);
        vals.first().is_some_and(|&v| v > 0.0)
    };
    let symmetry_defects: Vec<f64> = sys
        .a
        .iter()
        .map(|a| {
            let p = a * &sys.a0;
            max_abs(&(&p - p.transpose())) / max_abs(&p).max(1.0)
        })
        .collect();
    let ba0 = &sys.b * &sys.a0;
    let scale = max_abs(&ba0).max(1.0);
    let n = sys.n();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i < n1 || j < n1 {
                off = off.max(ba0[(i, j)].abs());
            }
        }
    }
    let ba0_block_ok = off <= TOL_SYM * scale;
    let d = ba0.view((n1, n1), (sys.n2, sys.n2)).into_owned();
    let d_spectrum: Vec<[f64; 2]> = d.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    let d_stable = d_spectrum.iter().all(|z| z[0] < -TOL_NEG);
    let passes = a0_spd && symmetry_defects.iter().all(|&e| e <= TOL_SYM) && ba0_block_ok && d_stable;
    H1Report { a0_spd, symmetry_defects, ba0_block_ok, d_spectrum, passes }
}

/// Example systems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    PSystem { lambda: f64, a: f64 },
    EulerDamping { m: usize, gamma: f64 },
    EulerRelaxation { m: usize },
    JinXin { lambda: f64 },
}

impl Builtin {
    pub const NAMES: [&'static str; 4] = ["p_system", "euler_damping", "euler_relaxation", "jin_xin"];

    pub fn parse(name: &str, params: &[f64]) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidParams { name: name.to_string(), reason: reason.to_string() };
        let dim = |x: f64| -> Result<usize> {
            if x.fract() == 0.0 && (1.0..=3.0).contains(&x) {
                Ok(x as usize)
            } else {
                Err(bad("space dimension must be 1, 2 or 3"))
            }
        };
        match name {
            "p_system" => match params {
                [lambda, a] => Ok(Builtin::PSystem { lambda: *lambda, a: *a }),
                _ => Err(bad("expected parameters lambda,a")),
            },
            "euler_damping" => match params {
                [m] => Ok(Builtin::EulerDamping { m: dim(*m)?, gamma: 2.0 }),
                [m, gamma] if *gamma >= 1.0 => Ok(Builtin::EulerDamping { m: dim(*m)?, gamma: *gamma }),
                _ => Err(bad("expected parameters m[,gamma] with gamma >= 1")),
            },
            "euler_relaxation" => match params {
                [m] => Ok(Builtin::EulerRelaxation { m: dim(*m)? }),
                _ => Err(bad("expected parameter m")),
            },
            "jin_xin" => match params {
                [lambda] if *lambda > 0.0 => Ok(Builtin::JinXin { lambda: *lambda }),
                _ => Err(bad("expected a positive parameter lambda")),
            },
            _ => Err(Error::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn build(self) -> Result<RawSystem> {
        match self {
            Builtin::PSystem { lambda, a } => p_system(lambda, a),
            Builtin::EulerDamping { m, gamma } => euler_damping(m, gamma),
            Builtin::EulerRelaxation { m } => euler_relaxation(m),
            Builtin::JinXin { lambda } => jin_xin(lambda),
        }
    }
}

pub fn make_builtin(name: &str, params: &[f64]) -> Result<RawSystem> {
    Builtin::parse(name, params)?.build()
}

/// p-system with relaxation and the quadratic constitutive laws attached.
pub fn p_system(lambda: f64, a: f64) -> Result<RawSystem> {
    p_system_with(lambda, a, PSystemNonlinearity::quadratic(lambda, a))
}

/// p-system with caller-supplied constitutive laws `sigma`, `h`.
pub fn p_system_with(lambda: f64, a: f64, nl: PSystemNonlinearity) -> Result<RawSystem> {
    if !(lambda > a.abs()) {
        return Err(Error::Subcharacteristic { lambda, a });
    }
    let l2 = lambda * lambda;
    let sys = RawSystem::new(
        "p_system",
        1,
        1,
        vec![Mat::from_row_slice(2, 2, &[0.0, 1.0, l2, 0.0])],
        Mat::from_row_slice(2, 2, &[0.0, 0.0, a, -1.0]),
        Mat::from_row_slice(2, 2, &[1.0, a, a, l2]),
    )?;
    sys.with_nonlinearity(Arc::new(nl))
}

/// Linearized isentropic Euler with damping around `rho = 1, v = 0`.
pub fn euler_damping(m: usize, gamma: f64) -> Result<RawSystem> {
    let n = m + 1;
    let a = (0..m)
        .map(|alpha| {
            let mut mat = Mat::zeros(n, n);
            mat[(0, 1 + alpha)] = 1.0;
            mat[(1 + alpha, 0)] = 1.0;
            mat
        })
        .collect();
    let mut b = Mat::zeros(n, n);
    for i in 1..n {
        b[(i, i)] = -1.0;
    }
    let sys = RawSystem::new("euler_damping", 1, m, a, b, Mat::identity(n, n))?;
    sys.with_nonlinearity(Arc::new(EulerDampingNonlinearity { m, gamma }))
}

/// Index of the stress component `R_ij` in the relaxation system.
pub fn stress_index(m: usize, i: usize, j: usize) -> usize {
    1 + m + i * m + j
}

/// Linear Euler system with a relaxing stress tensor.
pub fn euler_relaxation(m: usize) -> Result<RawSystem> {
    let n = 1 + m + m * m;
    let a = (0..m)
        .map(|alpha| {
            let mut mat = Mat::zeros(n, n);
            mat[(0, 1 + alpha)] = 1.0;
            mat[(1 + alpha, 0)] = 1.0;
            for i in 0..m {
                let r = stress_index(m, i, alpha);
                mat[(1 + i, r)] = 1.0;
                mat[(r, 1 + i)] = 1.0;
            }
            mat
        })
        .collect();
    let mut b = Mat::zeros(n, n);
    for i in 1 + m..n {
        b[(i, i)] = -1.0;
    }
    RawSystem::new("euler_relaxation", 1 + m, m * m, a, b, Mat::identity(n, n))
}

/// Two-component Jin-Xin relaxation with a non-symmetric relaxation matrix.
pub fn jin_xin(lambda: f64) -> Result<RawSystem> {
    let l2 = lambda * lambda;
    #[rustfmt::skip]
    let a = Mat::from_row_slice(4, 4, &[
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        l2, 0.0, 0.0, 0.0,
        0.0, l2, 0.0, 0.0,
    ]);
    let mut b = Mat::zeros(4, 4);
    b[(2, 2)] = -1.0;
    b[(2, 3)] = -1.0;
    b[(3, 3)] = -1.0;
    let a0 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, l2, l2]));
    let mut sys = RawSystem::new("jin_xin", 2, 2, vec![a], b, a0)?;
    sys.synthetic = true;
    Ok(sys)
}
