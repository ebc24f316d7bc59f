//! Nonlinear evolution by Strang splitting around the exact linear flow, and
//! decay measurements on the resulting trajectories.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cd_form::CdSystem;
use crate::decay::{check_window, DecayReport, DecayRow, Norm, Sidedness};
use crate::error::{Error, Result};
use crate::grid::{forward, inverse_real, Grid, GridField};
use crate::nonlinearity::Nonlinearity;
use crate::sk::default_directions;
use crate::solver::LinearSolver;
use crate::splitting::{dealias, strang_step, Spectrum};

/// Solutions may not grow beyond this multiple of the initial sup norm.
pub const BLOW_UP_FACTOR: f64 = 10.0;
/// `dt <= CFL * dx / lambda_bar`.
pub const CFL: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct Scheme {
    pub dt: f64,
    pub steps: usize,
    pub order: usize,
    pub dealiasing: &'static str,
    /// True when the nonlinear maps were replaced by their linearization.
    pub linear: bool,
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Number of stored snapshots after the initial one.
    pub samples: usize,
    /// Evolve the linearized system only.
    pub linear: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { samples: 64, linear: false }
    }
}

/// Snapshots of a run in Conservative-Dissipative unknowns.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub cd: CdSystem,
    pub times: Vec<f64>,
    pub fields: Vec<GridField>,
    pub scheme: Scheme,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        &self.fields[0].grid
    }

    pub fn conservative(&self, k: usize) -> GridField {
        self.fields[k].select(&(0..self.cd.n1).collect::<Vec<_>>())
    }

    pub fn dissipative(&self, k: usize) -> GridField {
        self.fields[k].select(&(self.cd.n1..self.cd.n()).collect::<Vec<_>>())
    }

    /// Total integral of the conservative components per sample.
    pub fn masses(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.integrals()[..self.cd.n1].iter().sum()).collect()
    }

    /// `w_t` at sample `k`, from the full right-hand side.
    pub fn time_derivative(&self, k: usize) -> GridField {
        let nl = if self.scheme.linear { None } else { self.cd.nonlinearity.clone() };
        let rhs = Rhs::new(&self.cd, self.grid(), nl, false);
        let spec = rhs.full(&self.fields[k].spectral());
        GridField::from_spectral(self.grid(), self.cd.n(), spec).expect("shape preserved").to_physical()
    }
}

/// Pointwise evaluation of fluxes and sources on a field.
struct Rhs<'a> {
    cd: &'a CdSystem,
    grid: &'a Grid,
    nl: Option<Arc<dyn Nonlinearity>>,
    keep: Option<Vec<bool>>,
}

impl<'a> Rhs<'a> {
    fn new(cd: &'a CdSystem, grid: &'a Grid, nl: Option<Arc<dyn Nonlinearity>>, dealiased: bool) -> Self {
        let keep = dealiased.then(|| (0..grid.len()).map(|i| grid.dealias_keep(i)).collect());
        Self { cd, grid, nl, keep }
    }

    /// Spectrum of `-sum_a d_a F_a(w) + S(w)` where `F_a`, `S` are the
    /// pointwise maps returned by `eval`.
    fn assemble(&self, spec: &[Complex64], eval: &(dyn Fn(&[f64], usize, &mut [f64]) + Sync)) -> Spectrum {
        let (n, m, len) = (self.cd.n(), self.grid.dim(), self.grid.len());
        let w = inverse_real(&self.grid.sizes, spec.to_vec(), n);
        // slot m holds the source
        let mut maps = vec![vec![0.0; n * len]; m + 1];
        let chunk = 1024;
        let parts: Vec<(usize, Vec<Vec<f64>>)> = (0..len.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let start = c * chunk;
                let end = (start + chunk).min(len);
                let mut local = vec![vec![0.0; n * (end - start)]; m + 1];
                let mut u = vec![0.0; n];
                let mut out = vec![0.0; n];
                for i in start..end {
                    for k in 0..n {
                        u[k] = w[k * len + i];
                    }
                    for slot in 0..=m {
                        eval(&u, slot, &mut out);
                        for k in 0..n {
                            local[slot][k * (end - start) + i - start] = out[k];
                        }
                    }
                }
                (start, local)
            })
            .collect();
        for (start, local) in parts {
            let width = local[0].len() / n;
            for slot in 0..=m {
                for k in 0..n {
                    maps[slot][k * len + start..k * len + start + width]
                        .copy_from_slice(&local[slot][k * width..(k + 1) * width]);
                }
            }
        }
        let hats: Vec<Spectrum> = maps.iter().map(|f| forward(&self.grid.sizes, f, n)).collect();
        let mut out = hats[m].clone();
        for (idx_c, z) in out.iter_mut().enumerate() {
            let xi = self.grid.xi(idx_c % len);
            for a in 0..m {
                *z -= Complex64::new(0.0, xi[a]) * hats[a][idx_c];
            }
        }
        if let Some(keep) = &self.keep {
            dealias(&mut out, keep);
        }
        out
    }

    /// Nonlinear remainder `-sum_a d_a (f_a(w) - A_a w) + (g(w) - B w)`.
    fn remainder(&self, spec: &[Complex64]) -> Spectrum {
        let nl = self.nl.as_ref().expect("remainder needs a nonlinearity");
        let (cd, m) = (self.cd, self.grid.dim());
        self.assemble(spec, &|u, slot, out| {
            let lin = if slot < m { &cd.a[slot] } else { &cd.b };
            if slot < m {
                nl.flux(u, slot, out);
            } else {
                nl.source(u, out);
            }
            for r in 0..u.len() {
                out[r] -= (0..u.len()).map(|c| lin[(r, c)] * u[c]).sum::<f64>();
            }
        })
    }

    /// Full right-hand side `-sum_a d_a f_a(w) + g(w)` (linear maps when no
    /// nonlinearity is attached).
    fn full(&self, spec: &[Complex64]) -> Spectrum {
        let (cd, m) = (self.cd, self.grid.dim());
        let nl = self.nl.clone();
        self.assemble(spec, &move |u, slot, out| match &nl {
            Some(f) if slot < m => f.flux(u, slot, out),
            Some(f) => f.source(u, out),
            None => {
                let lin = if slot < m { &cd.a[slot] } else { &cd.b };
                for r in 0..u.len() {
                    out[r] = (0..u.len()).map(|c| lin[(r, c)] * u[c]).sum();
                }
            }
        })
    }
}

/// Largest stable step for the explicit substep.
pub fn max_time_step(cd: &CdSystem, grid: &Grid) -> f64 {
    let speed = cd.max_speed(&default_directions(cd.m)).max(1e-12);
    let dx = (0..grid.dim()).map(|a| grid.dx(a)).fold(f64::INFINITY, f64::min);
    CFL * dx / speed
}

/// Evolves `w0` up to `t_final` with Strang splitting.
pub fn simulate(cd: &CdSystem, w0: &GridField, t_final: f64, dt: f64, opts: &SimOptions) -> Result<Trajectory> {
    if w0.grid.dim() != cd.m || w0.n != cd.n() {
        return Err(Error::Dimension(format!(
            "initial data has m = {}, n = {}; system has m = {}, n = {}",
            w0.grid.dim(),
            w0.n,
            cd.m,
            cd.n()
        )));
    }
    if cd.m > 2 {
        return Err(Error::Unsupported("nonlinear runs are limited to m <= 2".into()));
    }
    let nl = if opts.linear {
        None
    } else {
        Some(cd.nonlinearity.clone().ok_or(Error::MissingNonlinearity)?)
    };
    if !(t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParams { name: "time".into(), reason: format!("T = {t_final}, dt = {dt}") });
    }
    let grid = w0.grid.clone();
    let bound = max_time_step(cd, &grid);
    if dt > bound {
        return Err(Error::TimeStep { dt, bound });
    }
    let steps = (t_final / dt).ceil() as usize;
    let dt = t_final / steps as f64;
    let every = (steps / opts.samples.max(1)).max(1);
    let solver = LinearSolver::new(cd.clone());
    let half = solver.propagator(&grid, 0.5 * dt)?;
    let rhs = Rhs::new(cd, &grid, nl.clone(), true);
    let w0 = w0.to_physical();
    let limit = BLOW_UP_FACTOR * w0.sup().max(f64::MIN_POSITIVE);
    let mut spec = w0.spectral();
    let mut times = vec![0.0];
    let mut fields = vec![w0];
    let half_linear = |s: &[Complex64]| half.apply_spectral(s);
    for step in 1..=steps {
        spec = match &nl {
            Some(_) => strang_step(&spec, dt, &half_linear, &mut |s| rhs.remainder(s)),
            None => half_linear(&half_linear(&spec)),
        };
        let last = step == steps;
        if step % every == 0 || last || step % 16 == 0 {
            let field = GridField::from_spectral(&grid, cd.n(), spec.clone())?.to_physical();
            let sup = field.sup();
            let t = step as f64 * dt;
            if !sup.is_finite() || sup > limit {
                return Err(Error::BlowUp { t, sup, limit });
            }
            if step % every == 0 || last {
                times.push(t);
                fields.push(field);
            }
        }
    }
    Ok(Trajectory {
        cd: cd.clone(),
        times,
        fields,
        scheme: Scheme { dt, steps, order: 2, dealiasing: "2/3", linear: nl.is_none() },
    })
}

/// Theoretical exponent of `||D^beta u||_p`.
pub fn base_exponent(m: usize, p: Norm, beta: usize) -> f64 {
    -(m as f64 / 2.0) * p.conjugate_weight() - beta as f64 / 2.0
}

/// Declared tolerance for a decay row.
pub fn decay_tolerance(variable: &str, m: usize, p: Norm) -> f64 {
    match variable {
        "u" | "u_c" if m == 1 && p != Norm::L1 => 0.1,
        "u" | "u_c" => 0.15,
        "u_d" if p == Norm::Inf || m >= 2 => 0.2,
        "u_d" => 0.15,
        _ => 0.2,
    }
}

fn norm_series(fields: &[GridField], beta: usize, p: Norm) -> Vec<f64> {
    fields.par_iter().map(|f| f.norm(beta, p)).collect()
}

/// Fits the decay of `u`, `u_c`, `u_d`, `u_t` and `u_d_t` in the requested norms.
pub fn measure_solution_decay(
    traj: &Trajectory,
    norms: &[Norm],
    beta_max: usize,
    window: Option<(f64, f64)>,
) -> Result<DecayReport> {
    let t_final = *traj.times.last().expect("trajectories hold the initial sample");
    let window = window.unwrap_or((t_final / 4.0, t_final));
    check_window(window)?;
    let m = traj.cd.m;
    let idx: Vec<usize> = (0..traj.times.len()).filter(|&k| traj.times[k] > 0.0).collect();
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let full: Vec<GridField> = idx.iter().map(|&k| traj.fields[k].clone()).collect();
    let cons: Vec<GridField> = idx.iter().map(|&k| traj.conservative(k)).collect();
    let diss: Vec<GridField> = idx.iter().map(|&k| traj.dissipative(k)).collect();
    let dt_full: Vec<GridField> = idx.iter().map(|&k| traj.time_derivative(k)).collect();
    let dt_diss: Vec<GridField> =
        dt_full.iter().map(|f| f.select(&(traj.cd.n1..traj.cd.n()).collect::<Vec<_>>())).collect();
    let mut rows = Vec::new();
    for &p in norms {
        if p == Norm::L1 && m != 1 {
            continue;
        }
        for beta in 0..=beta_max {
            let base = base_exponent(m, p, beta);
            let series: [(&str, &[GridField], f64, Sidedness); 5] = [
                ("u", &full, base, Sidedness::Sharp),
                ("u_c", &cons, base, Sidedness::Sharp),
                ("u_d", &diss, base - 0.5, Sidedness::Sharp),
                ("u_t", &dt_full, base - 1.0, Sidedness::UpperBound),
                ("u_d_t", &dt_diss, base - 1.0, Sidedness::UpperBound),
            ];
            for (var, fields, theory, side) in series {
                let values = norm_series(fields, beta, p);
                rows.push(DecayRow::evaluate(
                    var,
                    beta,
                    p,
                    times.clone(),
                    values,
                    window,
                    theory,
                    decay_tolerance(var, m, p),
                    side,
                ));
            }
        }
    }
    Ok(DecayReport { window, rows })
}

/// Gaussian bump of amplitude `delta` and width 1 in the conservative
/// components, dissipative components zero.
pub fn default_initial_data(cd: &CdSystem, grid: &Grid, delta: f64) -> GridField {
    let n1 = cd.n1;
    GridField::from_fn(grid, cd.n(), |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for (k, o) in out.iter_mut().enumerate() {
            *o = if k < n1 { delta * (-r2).exp() } else { 0.0 };
        }
    })
}
