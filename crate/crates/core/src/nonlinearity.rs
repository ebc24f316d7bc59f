//! Nonlinear flux and source maps attached to a system.

use std::fmt;
use std::sync::Arc;

use crate::linalg::Mat;

/// Flux maps `f_alpha` and source `g` of a balance law, both vanishing at 0.
pub trait Nonlinearity: Send + Sync {
    /// Number of unknowns.
    fn dim(&self) -> usize;
    /// Number of space dimensions.
    fn space_dim(&self) -> usize;
    fn flux(&self, u: &[f64], alpha: usize, out: &mut [f64]);
    fn source(&self, u: &[f64], out: &mut [f64]);

    fn flux_jacobian(&self, u: &[f64], alpha: usize) -> Mat {
        fd_jacobian(|x, out| self.flux(x, alpha, out), u, self.dim())
    }

    fn source_jacobian(&self, u: &[f64]) -> Mat {
        fd_jacobian(|x, out| self.source(x, out), u, self.dim())
    }
}

impl fmt::Debug for dyn Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity(n = {}, m = {})", self.dim(), self.space_dim())
    }
}

/// Central-difference Jacobian with step `1e-5 * (1 + |u_j|)`.
pub fn fd_jacobian(f: impl Fn(&[f64], &mut [f64]), u: &[f64], rows: usize) -> Mat {
    let n = u.len();
    let mut jac = Mat::zeros(rows, n);
    let mut x = u.to_vec();
    let mut plus = vec![0.0; rows];
    let mut minus = vec![0.0; rows];
    for j in 0..n {
        let h = 1e-5 * (1.0 + u[j].abs());
        x[j] = u[j] + h;
        f(&x, &mut plus);
        x[j] = u[j] - h;
        f(&x, &mut minus);
        x[j] = u[j];
        for i in 0..rows {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Second directional derivative `D^2 f(0)[v, v]` by a symmetric difference.
pub fn fd_second_derivative(f: impl Fn(&[f64], &mut [f64]), v: &[f64], rows: usize) -> Vec<f64> {
    let h = 1e-3;
    let zero = vec![0.0; v.len()];
    let plus: Vec<f64> = v.iter().map(|x| h * x).collect();
    let minus: Vec<f64> = v.iter().map(|x| -h * x).collect();
    let (mut fp, mut fm, mut f0) = (vec![0.0; rows], vec![0.0; rows], vec![0.0; rows]);
    f(&plus, &mut fp);
    f(&minus, &mut fm);
    f(&zero, &mut f0);
    (0..rows).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h)).collect()
}

/// Scalar constitutive function used by the p-system.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `u_t + v_x = 0`, `v_t + sigma(u)_x = h(u) - v`.
#[derive(Clone)]
pub struct PSystemNonlinearity {
    pub sigma: ScalarFn,
    pub h: ScalarFn,
}

impl PSystemNonlinearity {
    /// `sigma(u) = lambda^2 u + u^2`, `h(u) = a u + u^2`.
    pub fn quadratic(lambda: f64, a: f64) -> Self {
        let l2 = lambda * lambda;
        Self { sigma: Arc::new(move |u| l2 * u + u * u), h: Arc::new(move |u| a * u + u * u) }
    }

    /// Linear constitutive laws, reproducing the linearized system exactly.
    pub fn linear(lambda: f64, a: f64) -> Self {
        let l2 = lambda * lambda;
        Self { sigma: Arc::new(move |u| l2 * u), h: Arc::new(move |u| a * u) }
    }
}

impl Nonlinearity for PSystemNonlinearity {
    fn dim(&self) -> usize {
        2
    }
    fn space_dim(&self) -> usize {
        1
    }
    fn flux(&self, u: &[f64], _alpha: usize, out: &mut [f64]) {
        out[0] = u[1];
        out[1] = (self.sigma)(u[0]);
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = (self.h)(u[0]) - u[1];
    }
}

/// Isentropic Euler with damping in the unknowns `(rho - 1, rho v)`, pressure
/// `p(rho) = (rho^gamma - 1) / gamma`.
#[derive(Clone, Debug)]
pub struct EulerDampingNonlinearity {
    pub m: usize,
    pub gamma: f64,
}

impl Nonlinearity for EulerDampingNonlinearity {
    fn dim(&self) -> usize {
        self.m + 1
    }
    fn space_dim(&self) -> usize {
        self.m
    }
    fn flux(&self, u: &[f64], alpha: usize, out: &mut [f64]) {
        let rho = 1.0 + u[0];
        let mom_a = u[1 + alpha];
        out[0] = mom_a;
        for i in 0..self.m {
            out[1 + i] = u[1 + i] * mom_a / rho;
        }
        out[1 + alpha] += (rho.powf(self.gamma) - 1.0) / self.gamma;
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        for i in 0..self.m {
            out[1 + i] = -u[1 + i];
        }
    }
}

/// The maps `w -> M f(M^{-1} w)` for a fixed invertible `M`.
pub struct Conjugated {
    pub inner: Arc<dyn Nonlinearity>,
    pub m: Mat,
    pub m_inv: Mat,
}

impl Conjugated {
    fn pull_back(&self, w: &[f64]) -> Vec<f64> {
        let n = w.len();
        (0..n).map(|i| (0..n).map(|j| self.m_inv[(i, j)] * w[j]).sum()).collect()
    }

    fn push_forward(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            out[i] = (0..n).map(|j| self.m[(i, j)] * v[j]).sum();
        }
    }
}

impl Nonlinearity for Conjugated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn space_dim(&self) -> usize {
        self.inner.space_dim()
    }
    fn flux(&self, w: &[f64], alpha: usize, out: &mut [f64]) {
        let u = self.pull_back(w);
        let mut f = vec![0.0; u.len()];
        self.inner.flux(&u, alpha, &mut f);
        self.push_forward(&f, out);
    }
    fn source(&self, w: &[f64], out: &mut [f64]) {
        let u = self.pull_back(w);
        let mut g = vec![0.0; u.len()];
        self.inner.source(&u, &mut g);
        self.push_forward(&g, out);
    }
}
