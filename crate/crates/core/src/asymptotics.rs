//! Comparison solutions: linearized evolution, the conservative low-frequency
//! kernel and Chapman-Enskog parabolic approximations.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cd_form::CdSystem;
use crate::decay::{check_window, DecayReport, DecayRow, Norm, Sidedness};
use crate::error::{Error, Result};
use crate::grid::{forward, inverse_real, Grid, GridField};
use crate::linalg::{expm, null_space, sym_eigen, symmetrize, CMat, Mat};
use crate::nonlinear::{base_exponent, default_initial_data, simulate, SimOptions, Trajectory};
use crate::solver::{apply_modewise, split_low_high, Propagator};
use crate::splitting::{dealias, strang_step};

/// Default decay gain for the one-dimensional comparison.
pub const DEFAULT_MU: f64 = 0.3;
/// Times the data amplitude may be halved when a comparison fails.
pub const MAX_HALVINGS: usize = 4;

/// Operators of the parabolic equation
/// `w_t + sum_a A_a11 w_a + (Q(w, w))_x = sum_ab V_ab w_ab`.
#[derive(Clone, Debug)]
pub struct ChapmanEnskogOperators {
    pub m: usize,
    pub n1: usize,
    pub drift: Vec<Mat>,
    /// `viscosity[a][b] = -A_a12 D^{-1} A_b21`.
    pub viscosity: Vec<Vec<Mat>>,
    /// `quadratic[k]` is the symmetric matrix of the `k`-th component of `Q`.
    pub quadratic: Option<Vec<Mat>>,
    pub d_inv: Mat,
}

/// `D^2 f(0)[v, v]` by Richardson-extrapolated central differences.
fn second_derivative(f: &dyn Fn(&[f64], &mut [f64]), v: &[f64], rows: usize) -> Vec<f64> {
    let diff = |h: f64| -> Vec<f64> {
        let plus: Vec<f64> = v.iter().map(|x| h * x).collect();
        let minus: Vec<f64> = v.iter().map(|x| -h * x).collect();
        let zero = vec![0.0; v.len()];
        let (mut fp, mut fm, mut f0) = (vec![0.0; rows], vec![0.0; rows], vec![0.0; rows]);
        f(&plus, &mut fp);
        f(&minus, &mut fm);
        f(&zero, &mut f0);
        (0..rows).map(|i| (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h)).collect()
    };
    let (coarse, fine) = (diff(0.05), diff(0.025));
    coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

pub fn build_chapman_enskog(cd: &CdSystem) -> Result<ChapmanEnskogOperators> {
    let d_inv = crate::linalg::inverse_guarded(&cd.d)?;
    let blocks: Vec<(Mat, Mat, Mat, Mat)> = cd.a.iter().map(|a| cd.blocks(a)).collect();
    let drift = blocks.iter().map(|b| b.0.clone()).collect();
    let viscosity = blocks
        .iter()
        .map(|ba| blocks.iter().map(|bb| -(&ba.1 * &d_inv * &bb.2)).collect())
        .collect();
    let quadratic = match (&cd.nonlinearity, cd.m) {
        (Some(nl), 1) => {
            let (n1, n) = (cd.n1, cd.n());
            let a12 = &blocks[0].1;
            let form = |w: &[f64]| -> Vec<f64> {
                let mut v = vec![0.0; n];
                v[..n1].copy_from_slice(w);
                let f2 = second_derivative(&|u, out| nl.flux(u, 0, out), &v, n);
                let g2 = second_derivative(&|u, out| nl.source(u, out), &v, n);
                let q2 = Mat::from_iterator(n - n1, 1, g2[n1..].iter().cloned());
                let corr = a12 * &d_inv * q2;
                (0..n1).map(|k| 0.5 * (f2[k] - corr[(k, 0)])).collect()
            };
            let unit = |i: usize| -> Vec<f64> { (0..n1).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
            let diag: Vec<Vec<f64>> = (0..n1).map(|i| form(&unit(i))).collect();
            let mut q = vec![Mat::zeros(n1, n1); n1];
            for i in 0..n1 {
                for j in 0..n1 {
                    let vals = if i == j {
                        diag[i].clone()
                    } else {
                        let s: Vec<f64> = (0..n1).map(|k| if k == i || k == j { 1.0 } else { 0.0 }).collect();
                        let both = form(&s);
                        (0..n1).map(|k| 0.5 * (both[k] - diag[i][k] - diag[j][k])).collect()
                    };
                    for k in 0..n1 {
                        q[k][(i, j)] = vals[k];
                    }
                }
            }
            Some(q)
        }
        _ => None,
    };
    Ok(ChapmanEnskogOperators { m: cd.m, n1: cd.n1, drift, viscosity, quadratic, d_inv })
}

impl ChapmanEnskogOperators {
    /// `V(zeta) = sum_ab zeta_a zeta_b V_ab`.
    pub fn viscosity_at(&self, zeta: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.n1, self.n1);
        for a in 0..self.m {
            for b in 0..self.m {
                out += &self.viscosity[a][b] * (zeta[a] * zeta[b]);
            }
        }
        out
    }

    /// `-i sum_a xi_a A_a11 - V(xi)`.
    pub fn symbol(&self, xi: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.n1, self.n1);
        for a in 0..self.m {
            out -= self.drift[a].map(|x| Complex64::new(0.0, x * xi[a]));
            for b in 0..self.m {
                out -= self.viscosity[a][b].map(|x| Complex64::new(x * xi[a] * xi[b], 0.0));
            }
        }
        out
    }

    pub fn quadratic(&self) -> Result<&[Mat]> {
        self.quadratic.as_deref().ok_or(Error::MissingNonlinearity)
    }

    /// `Q(w, w)` at one point.
    pub fn quadratic_at(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        for (k, q) in self.quadratic()?.iter().enumerate() {
            out[k] = (0..self.n1).map(|i| (0..self.n1).map(|j| w[i] * q[(i, j)] * w[j]).sum::<f64>()).sum();
        }
        Ok(())
    }
}

/// Spectrum and kernel structure of `V(zeta)` at one direction.
#[derive(Clone, Debug, Serialize)]
pub struct ViscosityCheck {
    pub zeta: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// Dimension of the common kernel of `A_21(zeta)`.
    pub a21_kernel_dim: usize,
    /// Smallest eigenvalue on the orthogonal complement of the kernel.
    pub min_positive: f64,
    pub passes: bool,
}

/// Checks that `V(zeta)` is positive semidefinite with kernel equal to
/// the kernel of `A_21(zeta)`.
pub fn check_viscosity(ops: &ChapmanEnskogOperators, cd: &CdSystem, zeta: &[f64]) -> ViscosityCheck {
    let v = ops.viscosity_at(zeta);
    let vs = symmetrize(&v);
    let (vals, _) = sym_eigen(&vs);
    let scale = vals.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let kernel_dim = vals.iter().filter(|x| x.abs() <= tol).count();
    let (_, _, a21, _) = cd.blocks(&cd.a_of(zeta));
    let a21_kernel_dim = null_space(&a21, 1e-10).ncols();
    let min_positive = vals.iter().cloned().filter(|x| x.abs() > tol).fold(f64::INFINITY, f64::min);
    let sym_ok = crate::linalg::symmetry_defect(&v) <= 1e-10;
    let passes = sym_ok && vals.iter().all(|&x| x >= -tol) && kernel_dim == a21_kernel_dim;
    ViscosityCheck { zeta: zeta.to_vec(), eigenvalues: vals, kernel_dim, a21_kernel_dim, min_positive, passes }
}

fn parabolic_propagator(ops: &ChapmanEnskogOperators, grid: &Grid, t: f64) -> Vec<CMat> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let xi = grid.xi(idx);
            expm(&(ops.symbol(&xi[..grid.dim()]) * Complex64::new(t, 0.0)))
        })
        .collect()
}

fn check_parabolic_field(ops: &ChapmanEnskogOperators, w: &GridField, nonlinear: bool) -> Result<()> {
    if w.grid.dim() != ops.m || w.n != ops.n1 {
        return Err(Error::Dimension(format!(
            "parabolic data has m = {}, n = {}; operators have m = {}, n1 = {}",
            w.grid.dim(),
            w.n,
            ops.m,
            ops.n1
        )));
    }
    if nonlinear && ops.m != 1 {
        return Err(Error::Unsupported("the nonlinear parabolic equation is one-dimensional".into()));
    }
    if nonlinear {
        ops.quadratic()?;
    }
    Ok(())
}

/// Nonlinear flux term `-(Q(w, w))_x`, dealiased.
fn quadratic_rhs(ops: &ChapmanEnskogOperators, grid: &Grid, keep: &[bool], spec: &[Complex64]) -> Vec<Complex64> {
    let (n1, len) = (ops.n1, grid.len());
    let w = inverse_real(&grid.sizes, spec.to_vec(), n1);
    let mut q = vec![0.0; n1 * len];
    let mut u = vec![0.0; n1];
    let mut out = vec![0.0; n1];
    for i in 0..len {
        for k in 0..n1 {
            u[k] = w[k * len + i];
        }
        ops.quadratic_at(&u, &mut out).expect("checked by caller");
        for k in 0..n1 {
            q[k * len + i] = out[k];
        }
    }
    let mut hat = forward(&grid.sizes, &q, n1);
    for (i, z) in hat.iter_mut().enumerate() {
        *z *= -Complex64::new(0.0, grid.xi(i % len)[0]);
    }
    dealias(&mut hat, keep);
    hat
}

/// Solution of the parabolic problem at each of `times` (sorted, `>= 0`).
/// The nonlinear path steps with `dt` by Strang splitting.
pub fn solve_parabolic_series(
    ops: &ChapmanEnskogOperators,
    w0: &GridField,
    times: &[f64],
    nonlinear: bool,
    dt: f64,
) -> Result<Vec<GridField>> {
    check_parabolic_field(ops, w0, nonlinear)?;
    let grid = w0.grid.clone();
    let n1 = ops.n1;
    let len = grid.len();
    let spec0 = w0.spectral();
    if !nonlinear {
        return times
            .iter()
            .map(|&t| {
                let prop = parabolic_propagator(ops, &grid, t);
                let out = apply_modewise(&spec0, n1, len, |idx| prop[idx].clone());
                Ok(GridField::from_spectral(&grid, n1, out)?.to_physical())
            })
            .collect();
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams { name: "dt".into(), reason: format!("{dt} must be positive") });
    }
    let half = parabolic_propagator(ops, &grid, 0.5 * dt);
    let keep: Vec<bool> = (0..len).map(|i| grid.dealias_keep(i)).collect();
    let half_linear = |s: &[Complex64]| apply_modewise(s, n1, len, |idx| half[idx].clone());
    let mut spec = spec0;
    let mut step = 0usize;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let target = (t / dt).round() as usize;
        while step < target {
            spec = strang_step(&spec, dt, &half_linear, &mut |s| quadratic_rhs(ops, &grid, &keep, s));
            step += 1;
        }
        let field = GridField::from_spectral(&grid, n1, spec.clone())?.to_physical();
        if !field.sup().is_finite() {
            return Err(Error::BlowUp { t, sup: f64::INFINITY, limit: f64::MAX });
        }
        out.push(field);
    }
    Ok(out)
}

pub fn solve_parabolic(ops: &ChapmanEnskogOperators, w0: &GridField, t: f64, nonlinear: bool, dt: f64) -> Result<GridField> {
    Ok(solve_parabolic_series(ops, w0, &[t], nonlinear, dt)?.remove(0))
}

fn difference_rows(
    rows: &mut Vec<DecayRow>,
    label: &str,
    times: &[f64],
    diffs: &[GridField],
    norms: &[Norm],
    beta_max: usize,
    window: (f64, f64),
    theory: impl Fn(Norm, usize) -> f64,
    tolerance: f64,
    sidedness: Sidedness,
) {
    for &p in norms {
        for beta in 0..=beta_max {
            let values: Vec<f64> = diffs.par_iter().map(|f| f.norm(beta, p)).collect();
            rows.push(DecayRow::evaluate(label, beta, p, times.to_vec(), values, window, theory(p, beta), tolerance, sidedness));
        }
    }
}

fn sample_indices(traj: &Trajectory) -> Vec<usize> {
    (0..traj.times.len()).filter(|&k| traj.times[k] > 0.0).collect()
}

fn resolve_window(traj: &Trajectory, window: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let t_final = *traj.times.last().expect("trajectories hold the initial sample");
    let w = window.unwrap_or((t_final / 4.0, t_final));
    check_window(w)?;
    Ok(w)
}

/// Decay of `u - Gamma(t) u(0)` and of `u_c - K00(t) L0 u(0)`.
pub fn compare_to_linear(
    traj: &Trajectory,
    norms: &[Norm],
    beta_max: usize,
    window: Option<(f64, f64)>,
    cutoff: Option<f64>,
) -> Result<DecayReport> {
    let cd = &traj.cd;
    if cd.m < 2 {
        return Err(Error::Unsupported("the linear comparison is stated for m >= 2".into()));
    }
    let window = resolve_window(traj, window)?;
    let idx = sample_indices(traj);
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let w0 = &traj.fields[0];
    let cons: Vec<usize> = (0..cd.n1).collect();
    let mut cons_data = w0.clone();
    if let crate::grid::FieldData::Physical(d) = &mut cons_data.data {
        let len = w0.grid.len();
        d[cd.n1 * len..].iter_mut().for_each(|x| *x = 0.0);
    }
    let mut lin_diff = Vec::new();
    let mut k00_diff = Vec::new();
    for (&k, &t) in idx.iter().zip(&times) {
        let ul = Propagator::new(cd, &w0.grid, t)?.apply(w0);
        lin_diff.push(traj.fields[k].sub(&ul));
        let split = split_low_high(cd, &cons_data, t, cutoff)?;
        k00_diff.push(traj.conservative(k).sub(&split.kpart.select(&cons)));
    }
    let norms: Vec<Norm> = norms.iter().cloned().filter(|&p| p != Norm::L1).collect();
    let m = cd.m;
    let theory = |p: Norm, beta: usize| base_exponent(m, p, beta) - 0.5;
    let mut rows = Vec::new();
    difference_rows(&mut rows, "u-u_l", &times, &lin_diff, &norms, beta_max, window, theory, 0.2, Sidedness::UpperBound);
    difference_rows(&mut rows, "u_c-K00", &times, &k00_diff, &norms, beta_max, window, theory, 0.2, Sidedness::UpperBound);
    Ok(DecayReport { window, rows })
}

/// Decay of `u_c - u_p` with `u_p` the Chapman-Enskog solution from `L0 u(0)`;
/// also reports `u_c` itself for reference.
pub fn compare_chapman_enskog(
    traj: &Trajectory,
    ops: &ChapmanEnskogOperators,
    norms: &[Norm],
    beta_max: usize,
    window: Option<(f64, f64)>,
    mu: f64,
) -> Result<DecayReport> {
    let m = traj.cd.m;
    if m == 1 && !(0.0..0.5).contains(&mu) {
        return Err(Error::InvalidParams { name: "mu".into(), reason: format!("{mu} must lie in [0, 1/2)") });
    }
    let window = resolve_window(traj, window)?;
    let idx = sample_indices(traj);
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let up0 = traj.conservative(0);
    let nonlinear = m == 1;
    let up = solve_parabolic_series(ops, &up0, &times, nonlinear, traj.scheme.dt)?;
    let cons: Vec<GridField> = idx.iter().map(|&k| traj.conservative(k)).collect();
    let diffs: Vec<GridField> = cons.iter().zip(&up).map(|(a, b)| a.sub(b)).collect();
    let norms: Vec<Norm> = norms.iter().cloned().filter(|&p| m == 1 || p != Norm::L1).collect();
    let mut rows = Vec::new();
    if m == 1 {
        let theory = |p: Norm, beta: usize| base_exponent(1, p, beta) - mu;
        difference_rows(&mut rows, "u_c-u_p", &times, &diffs, &norms, beta_max, window, theory, 0.15, Sidedness::UpperBound);
    } else {
        let theory = |p: Norm, beta: usize| base_exponent(m, p, beta) - 0.5;
        difference_rows(&mut rows, "u_c-u_p", &times, &diffs, &norms, beta_max, window, theory, 0.2, Sidedness::UpperBound);
    }
    let tol = if m == 1 { 0.1 } else { 0.15 };
    difference_rows(&mut rows, "u_c", &times, &cons, &norms, beta_max, window, |p, b| base_exponent(m, p, b), tol, Sidedness::Sharp);
    Ok(DecayReport { window, rows })
}

/// Result of a Chapman-Enskog comparison with automatic amplitude reduction.
#[derive(Clone, Debug)]
pub struct ChapmanEnskogStudy {
    pub trajectory: Trajectory,
    pub report: DecayReport,
    pub delta: f64,
    pub halvings: usize,
}

/// Simulates from the default bump and compares with the Chapman-Enskog
/// solution, halving the amplitude while the comparison fails.
#[allow(clippy::too_many_arguments)]
pub fn chapman_enskog_study(
    cd: &CdSystem,
    grid: &Grid,
    delta: f64,
    t_final: f64,
    dt: f64,
    mu: f64,
    norms: &[Norm],
    window: Option<(f64, f64)>,
    samples: usize,
) -> Result<ChapmanEnskogStudy> {
    let ops = build_chapman_enskog(cd)?;
    let mut delta = delta;
    let mut halvings = 0;
    loop {
        let w0 = default_initial_data(cd, grid, delta);
        let outcome = simulate(cd, &w0, t_final, dt, &SimOptions { samples, linear: false })
            .and_then(|traj| compare_chapman_enskog(&traj, &ops, norms, 0, window, mu).map(|r| (traj, r)));
        match outcome {
            Ok((trajectory, report)) if report.passes() || halvings == MAX_HALVINGS => {
                return Ok(ChapmanEnskogStudy { trajectory, report, delta, halvings })
            }
            Err(e) if halvings == MAX_HALVINGS => return Err(e),
            _ => {
                delta /= 2.0;
                halvings += 1;
            }
        }
    }
}
