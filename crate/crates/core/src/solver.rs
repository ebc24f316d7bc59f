//! Exact linear evolution on periodic grids by per-mode matrix exponentials.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cd_form::CdSystem;
use crate::error::{Error, Result};
use crate::expansion::expand_zero;
use crate::grid::{FieldData, Grid, GridField};
use crate::linalg::{complex_schur, expm, op_norm, projector_smallest, CMat, CVector};
use crate::sk::default_directions;

/// Largest per-axis size accepted for three-dimensional propagation.
pub const MAX_N_3D: usize = 64;
/// Projector norm above which the low-frequency split is refused.
pub const MAX_PROJECTOR_NORM: f64 = 1e3;

fn check_field(cd: &CdSystem, w: &GridField) -> Result<()> {
    if w.grid.dim() != cd.m {
        return Err(Error::Dimension(format!("field lives in {} dimensions, system in {}", w.grid.dim(), cd.m)));
    }
    if w.n != cd.n() {
        return Err(Error::Dimension(format!("field has {} components, system has {}", w.n, cd.n())));
    }
    if cd.m == 3 && w.grid.sizes.iter().any(|&n| n > MAX_N_3D) {
        return Err(Error::Unsupported(format!("three-dimensional grids are limited to N <= {MAX_N_3D}")));
    }
    Ok(())
}

/// `E(i xi)` at grid mode `idx`.
pub fn mode_symbol(cd: &CdSystem, grid: &Grid, idx: usize) -> CMat {
    let xi = grid.xi(idx);
    cd.symbol(&xi[..grid.dim()])
}

/// Applies a per-mode matrix to a component-major spectrum.
pub fn apply_modewise(spec: &[Complex64], n: usize, len: usize, mat: impl Fn(usize) -> CMat + Sync) -> Vec<Complex64> {
    let mut modes = vec![Complex64::new(0.0, 0.0); n * len];
    modes.par_chunks_mut(n).enumerate().for_each(|(idx, out)| {
        let v = CVector::from_fn(n, |c, _| spec[c * len + idx]);
        let r = mat(idx) * v;
        out.copy_from_slice(r.as_slice());
    });
    let mut res = vec![Complex64::new(0.0, 0.0); n * len];
    for idx in 0..len {
        for c in 0..n {
            res[c * len + idx] = modes[idx * n + c];
        }
    }
    res
}

/// Precomputed `exp(E(i xi) t)` for every mode of a grid.
#[derive(Debug)]
pub struct Propagator {
    pub grid: Grid,
    pub n: usize,
    pub t: f64,
    mats: Vec<CMat>,
}

impl Propagator {
    pub fn new(cd: &CdSystem, grid: &Grid, t: f64) -> Result<Self> {
        if grid.dim() != cd.m {
            return Err(Error::Dimension(format!("grid has {} dimensions, system {}", grid.dim(), cd.m)));
        }
        if cd.m == 3 && grid.sizes.iter().any(|&n| n > MAX_N_3D) {
            return Err(Error::Unsupported(format!("three-dimensional grids are limited to N <= {MAX_N_3D}")));
        }
        let mats = (0..grid.len()).into_par_iter().map(|idx| expm(&(mode_symbol(cd, grid, idx) * Complex64::new(t, 0.0)))).collect();
        Ok(Self { grid: grid.clone(), n: cd.n(), t, mats })
    }

    pub fn mode(&self, idx: usize) -> &CMat {
        &self.mats[idx]
    }

    pub fn apply_spectral(&self, spec: &[Complex64]) -> Vec<Complex64> {
        apply_modewise(spec, self.n, self.grid.len(), |idx| self.mats[idx].clone())
    }

    pub fn apply(&self, w: &GridField) -> GridField {
        let out = self.apply_spectral(&w.spectral());
        GridField { grid: w.grid.clone(), n: w.n, data: FieldData::Spectral(out) }.to_physical()
    }

    /// `max_k ||exp(E(i xi_k) t)||`.
    pub fn max_norm(&self) -> f64 {
        self.mats.par_iter().map(op_norm).reduce(|| 0.0, f64::max)
    }
}

/// `w(t) = Gamma(t) w0`.
pub fn propagate_linear(cd: &CdSystem, w0: &GridField, t: f64) -> Result<GridField> {
    check_field(cd, w0)?;
    if t < 0.0 {
        return Err(Error::InvalidParams { name: "t".into(), reason: format!("time {t} is negative") });
    }
    Ok(Propagator::new(cd, &w0.grid, t)?.apply(w0))
}

/// Linear solver keeping the most recently used propagators.
#[derive(Debug)]
pub struct LinearSolver {
    pub cd: CdSystem,
    capacity: usize,
    cache: Mutex<Vec<(Vec<usize>, u64, u64, Arc<Propagator>)>>,
}

impl LinearSolver {
    pub fn new(cd: CdSystem) -> Self {
        Self { cd, capacity: 8, cache: Mutex::new(Vec::new()) }
    }

    pub fn propagator(&self, grid: &Grid, t: f64) -> Result<Arc<Propagator>> {
        let key = (grid.sizes.clone(), grid.half_length.to_bits(), t.to_bits());
        let mut cache = self.cache.lock().expect("propagator cache poisoned");
        if let Some(pos) = cache.iter().position(|e| e.0 == key.0 && e.1 == key.1 && e.2 == key.2) {
            let entry = cache.remove(pos);
            let p = entry.3.clone();
            cache.push(entry);
            return Ok(p);
        }
        let p = Arc::new(Propagator::new(&self.cd, grid, t)?);
        if cache.len() == self.capacity {
            cache.remove(0);
        }
        cache.push((key.0, key.1, key.2, p.clone()));
        Ok(p)
    }

    pub fn propagate(&self, w0: &GridField, t: f64) -> Result<GridField> {
        check_field(&self.cd, w0)?;
        Ok(self.propagator(&w0.grid, t)?.apply(w0))
    }
}

/// Largest `|c_jk|` over the sampled directions.
pub fn max_diffusion(cd: &CdSystem) -> Result<f64> {
    let mut c: f64 = 0.0;
    for zeta in default_directions(cd.m) {
        let ex = expand_zero(cd, &zeta)?;
        for f in &ex.families {
            for s in &f.sub {
                c = c.max(s.value.norm());
            }
        }
    }
    Ok(c)
}

/// `lambda_bar t + 10 sqrt(c_max t)`.
pub fn required_half_length(cd: &CdSystem, t: f64) -> Result<f64> {
    let speed = cd.max_speed(&default_directions(cd.m));
    Ok(speed * t + 10.0 * (max_diffusion(cd)? * t).sqrt())
}

/// Refuses grids on which the wave cone wraps around before `t`.
pub fn check_wave_cone(cd: &CdSystem, grid: &Grid, t: f64) -> Result<()> {
    let need = required_half_length(cd, t)?;
    if grid.half_length < need {
        return Err(Error::GridTooSmall(format!(
            "half length {} is below the wave-cone requirement {need:.3} at t = {t}",
            grid.half_length
        )));
    }
    Ok(())
}

/// Default low-frequency cutoff.
pub fn default_cutoff(cd: &CdSystem) -> Result<f64> {
    let schur = complex_schur(&crate::linalg::to_complex(&cd.d))?;
    let dmin = schur.eigenvalues().iter().map(|z| z.norm()).filter(|&x| x > 1e-12).fold(f64::INFINITY, f64::min);
    let amax = default_directions(cd.m)
        .iter()
        .map(|z| crate::linalg::op_norm_real(&cd.a_of(z)))
        .fold(0.0, f64::max);
    if !dmin.is_finite() || amax == 0.0 {
        return Ok(0.25);
    }
    Ok((0.5 * dmin / amax).min(0.25))
}

/// Low and high frequency parts of the linear evolution.
#[derive(Clone, Debug)]
pub struct SplitField {
    pub kpart: GridField,
    pub kcalpart: GridField,
    pub cutoff: f64,
    /// Largest projector norm met on the low-frequency ball.
    pub projector_norm: f64,
    /// Largest mode-wise gap between the truncated expansion `R e^{F t} L`
    /// and the exact low-frequency part.
    pub model_defect: f64,
}

pub fn split_low_high(cd: &CdSystem, w0: &GridField, t: f64, cutoff: Option<f64>) -> Result<SplitField> {
    check_field(cd, w0)?;
    let a = match cutoff {
        Some(a) if a > 0.0 => a,
        Some(a) => return Err(Error::InvalidParams { name: "cutoff".into(), reason: format!("{a} must be positive") }),
        None => default_cutoff(cd)?,
    };
    let grid = &w0.grid;
    let m = grid.dim();
    let (n, n1, len) = (cd.n(), cd.n1, grid.len());
    let low: Vec<usize> = (0..len)
        .filter(|&idx| {
            let xi = grid.xi(idx);
            xi[..m].iter().map(|x| x * x).sum::<f64>().sqrt() <= a
        })
        .collect();
    struct LowMode {
        idx: usize,
        proj: CMat,
        exact: CMat,
        defect: f64,
    }
    let lows: Vec<LowMode> = low
        .par_iter()
        .map(|&idx| -> Result<LowMode> {
            let xi = grid.xi(idx);
            let e = mode_symbol(cd, grid, idx);
            let proj = projector_smallest(&e, n1)
                .map_err(|_| Error::CutoffTooLarge(format!("eigenvalues collide inside the cutoff ball at |xi| <= {a}")))?;
            let exact = &proj * expm(&(&e * Complex64::new(t, 0.0)));
            let r = xi[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
            let zeta: Vec<f64> = if r > 0.0 {
                xi[..m].iter().map(|x| x / r).collect()
            } else {
                (0..m).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect()
            };
            let ex = expand_zero(cd, &zeta)?;
            let z = Complex64::new(0.0, r);
            let model = ex.right(z) * expm(&(ex.reduced(z) * Complex64::new(t, 0.0))) * ex.left(z);
            let defect = op_norm(&(&model - &exact));
            Ok(LowMode { idx, proj, exact, defect })
        })
        .collect::<Result<_>>()?;
    let projector_norm = lows.iter().map(|l| op_norm(&l.proj)).fold(0.0, f64::max);
    if projector_norm > MAX_PROJECTOR_NORM {
        return Err(Error::CutoffTooLarge(format!("projector norm {projector_norm:.3e} at cutoff {a}")));
    }
    let model_defect = lows.iter().map(|l| l.defect).fold(0.0, f64::max);
    let spec = w0.spectral();
    let total = Propagator::new(cd, grid, t)?.apply_spectral(&spec);
    let mut kpart = vec![Complex64::new(0.0, 0.0); n * len];
    for l in &lows {
        let v = CVector::from_fn(n, |c, _| spec[c * len + l.idx]);
        let r = &l.exact * v;
        for c in 0..n {
            kpart[c * len + l.idx] = r[c];
        }
    }
    let kcal: Vec<Complex64> = total.iter().zip(&kpart).map(|(x, y)| x - y).collect();
    Ok(SplitField {
        kpart: GridField::from_spectral(grid, n, kpart)?.to_physical(),
        kcalpart: GridField::from_spectral(grid, n, kcal)?.to_physical(),
        cutoff: a,
        projector_norm,
        model_defect,
    })
}

/// Fourier-side projection onto divergence-free vector fields.
pub fn leray_project(v: &GridField) -> Result<GridField> {
    let m = v.grid.dim();
    if m < 2 || v.n != m {
        return Err(Error::Dimension(format!("Leray projection needs m >= 2 and m components, got m = {m}, n = {}", v.n)));
    }
    let grid = &v.grid;
    let len = grid.len();
    let spec = v.spectral();
    let out = apply_modewise(&spec, m, len, |idx| {
        let xi = grid.xi(idx);
        let r2: f64 = xi[..m].iter().map(|x| x * x).sum();
        let mut p = CMat::identity(m, m);
        if r2 > 0.0 {
            for i in 0..m {
                for j in 0..m {
                    p[(i, j)] -= Complex64::new(xi[i] * xi[j] / r2, 0.0);
                }
            }
        }
        p
    });
    Ok(GridField::from_spectral(grid, m, out)?.to_physical())
}

/// Largest modulus of `i xi . v_hat` over the modes.
pub fn spectral_divergence(v: &GridField) -> f64 {
    let m = v.grid.dim();
    let len = v.grid.len();
    let spec = v.spectral();
    (0..len)
        .map(|idx| {
            let xi = v.grid.xi(idx);
            (0..m).map(|a| Complex64::new(0.0, xi[a]) * spec[a * len + idx]).sum::<Complex64>().norm()
        })
        .fold(0.0, f64::max)
}
