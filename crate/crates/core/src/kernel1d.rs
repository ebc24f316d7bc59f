//! One-dimensional Green kernel: diffusive part, transport part and remainder.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cd_form::CdSystem;
use crate::decay::fit_decay_exponent;
use crate::error::{Error, Result};
use crate::expansion::{expand_infinity, expand_zero, InfinityExpansion, ZeroExpansion};
use crate::grid::{FieldData, Grid, GridField};
use crate::linalg::{expm, to_complex, CMat};
use crate::solver::{apply_modewise, check_wave_cone, Propagator};

/// Kernel blocks in the `(w_c, w_d)` split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Block {
    #[serde(rename = "00")]
    CC,
    #[serde(rename = "0-")]
    CD,
    #[serde(rename = "-0")]
    DC,
    #[serde(rename = "--")]
    DD,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::CC, Block::CD, Block::DC, Block::DD];

    pub fn label(self) -> &'static str {
        match self {
            Block::CC => "00",
            Block::CD => "0-",
            Block::DC => "-0",
            Block::DD => "--",
        }
    }

    /// `(row offset, rows, column offset, columns)`.
    pub fn range(self, n1: usize, n2: usize) -> (usize, usize, usize, usize) {
        match self {
            Block::CC => (0, n1, 0, n1),
            Block::CD => (0, n1, n1, n2),
            Block::DC => (n1, n2, 0, n1),
            Block::DD => (n1, n2, n1, n2),
        }
    }
}

/// `d^k/dy^k` of `exp(-(y/s)^2) / (s sqrt(pi))` for `k = 0..=kmax`.
pub fn gaussian_derivatives(y: f64, s: Complex64, kmax: usize) -> Vec<Complex64> {
    let u = Complex64::new(y, 0.0) / s;
    let g = (-u * u).exp() / (s * std::f64::consts::PI.sqrt());
    // physicists' Hermite polynomials
    let mut h = vec![Complex64::new(1.0, 0.0), u * 2.0];
    for k in 1..kmax {
        let next = u * 2.0 * h[k] - h[k - 1] * (2.0 * k as f64);
        h.push(next);
    }
    let mut out = Vec::with_capacity(kmax + 1);
    let mut scale = Complex64::new(1.0, 0.0);
    for k in 0..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(h[k] * scale * g * sign);
        scale /= s;
    }
    out
}

/// Samples of the `n x n` diffusive kernel on a set of points.
#[derive(Clone, Debug)]
pub struct KernelField {
    pub t: f64,
    pub x: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<CMat>,
}

impl KernelField {
    pub fn max_imag(&self) -> f64 {
        self.values.iter().flat_map(|m| m.iter().map(|z| z.im.abs())).fold(0.0, f64::max)
    }

    pub fn entry(&self, i: usize, r: usize, c: usize) -> f64 {
        self.values[i][(r, c)].re
    }

    /// Largest entry modulus of a block over all points.
    pub fn block_sup(&self, block: Block) -> f64 {
        let (r0, nr, c0, nc) = block.range(self.n1, self.n2);
        self.values
            .iter()
            .map(|m| m.view((r0, c0), (nr, nc)).iter().fold(0.0f64, |a, z| a.max(z.norm())))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x` followed by every entry `k_<row>_<col>` (real parts).
    pub fn to_csv(&self) -> String {
        let n = self.n1 + self.n2;
        let mut out = String::from("x");
        for r in 0..n {
            for c in 0..n {
                out.push_str(&format!(",k_{r}_{c}"));
            }
        }
        out.push('\n');
        for (x, m) in self.x.iter().zip(&self.values) {
            out.push_str(&format!("{x:.17e}"));
            for r in 0..n {
                for c in 0..n {
                    out.push_str(&format!(",{:.17e}", m[(r, c)].re));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-subfamily data shared by every evaluation point.
struct Atom {
    speed: f64,
    s: Complex64,
    /// `((-t)^l / l!) d^l` in family coordinates, `d^0 = p`.
    weights: Vec<CMat>,
    r: CMat,
}

fn atoms(ex: &ZeroExpansion, t: f64) -> Vec<Atom> {
    let mut out = Vec::new();
    for f in &ex.families {
        for sub in &f.sub {
            let gamma = (-sub.value).sqrt();
            let gamma = if gamma.re < 0.0 { -gamma } else { gamma };
            let mut weights = vec![sub.p.clone()];
            let mut power = sub.p.clone();
            let mut coef = 1.0;
            for l in 1..sub.multiplicity {
                power = &power * &sub.d;
                coef *= -t / l as f64;
                weights.push(&power * Complex64::new(coef, 0.0));
            }
            out.push(Atom { speed: f.speed, s: gamma * (2.0 * t.sqrt()), weights, r: to_complex(&f.r) });
        }
    }
    out
}

/// Diffusive kernel `K(t, x)` assembled from heat-type atoms.
pub fn eval_k(cd: &CdSystem, ex: &ZeroExpansion, t: f64, x: &[f64]) -> Result<KernelField> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams { name: "t".into(), reason: format!("kernel needs t > 0, got {t}") });
    }
    if cd.m != 1 {
        return Err(Error::Unsupported("the explicit kernel is one-dimensional".into()));
    }
    let (n1, n2) = (ex.n1, ex.n2);
    let atoms = atoms(ex, t);
    let a12d = to_complex(&(&ex.a12 * &ex.d_inv));
    let da21 = to_complex(&(&ex.d_inv * &ex.a21));
    let values = x
        .par_iter()
        .map(|&xv| {
            let mut g0 = CMat::zeros(n1, n1);
            let mut g1 = CMat::zeros(n1, n1);
            let mut g2 = CMat::zeros(n1, n1);
            for atom in &atoms {
                let kmax = 2 * (atom.weights.len() - 1) + 2;
                let dg = gaussian_derivatives(xv - atom.speed * t, atom.s, kmax);
                let k = atom.r.ncols();
                let (mut h0, mut h1, mut h2) = (CMat::zeros(k, k), CMat::zeros(k, k), CMat::zeros(k, k));
                for (l, w) in atom.weights.iter().enumerate() {
                    h0 += w * dg[2 * l];
                    h1 += w * dg[2 * l + 1];
                    h2 += w * dg[2 * l + 2];
                }
                let rt = atom.r.transpose();
                g0 += &atom.r * h0 * &rt;
                g1 += &atom.r * h1 * &rt;
                g2 += &atom.r * h2 * &rt;
            }
            let mut out = CMat::zeros(n1 + n2, n1 + n2);
            out.view_mut((0, 0), (n1, n1)).copy_from(&g0);
            out.view_mut((0, n1), (n1, n2)).copy_from(&(&g1 * &a12d));
            out.view_mut((n1, 0), (n2, n1)).copy_from(&(&da21 * &g1));
            out.view_mut((n1, n1), (n2, n2)).copy_from(&(&da21 * g2 * &a12d));
            out
        })
        .collect();
    Ok(KernelField { t, x: x.to_vec(), n1, n2, values })
}

/// Fourier multiplier of the diffusive kernel at `xi`.
pub fn kernel_symbol(ex: &ZeroExpansion, xi: f64, t: f64) -> CMat {
    let z = Complex64::new(0.0, xi);
    let (n1, n2) = (ex.n1, ex.n2);
    let a12d = to_complex(&(&ex.a12 * &ex.d_inv));
    let da21 = to_complex(&(&ex.d_inv * &ex.a21));
    let mut core = CMat::zeros(n1, n1);
    for f in &ex.families {
        let rr = to_complex(&f.r);
        let phase = (-z * f.speed * t).exp();
        for sub in &f.sub {
            let e = expm(&((&sub.p * sub.value + &sub.d) * (-z * z * t)));
            core += &rr * e * &sub.p * rr.transpose() * phase;
        }
    }
    let mut out = CMat::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(&core);
    out.view_mut((0, n1), (n1, n2)).copy_from(&(&core * &a12d * z));
    out.view_mut((n1, 0), (n2, n1)).copy_from(&(&da21 * &core * z));
    out.view_mut((n1, n1), (n2, n2)).copy_from(&(&da21 * &core * &a12d * (z * z)));
    out
}

/// `sum_jk e^{-i xi lambda_j t} e^{b_jk t} e^{t D_jk} P_jk` applied mode-wise.
pub fn transport_symbol(inf: &InfinityExpansion, xi: f64, t: f64) -> CMat {
    let n = inf.families[0].r.nrows();
    let mut out = CMat::zeros(n, n);
    for (j, f) in inf.families.iter().enumerate() {
        for (k, sub) in f.sub.iter().enumerate() {
            let scalar = (Complex64::new(0.0, -xi * f.speed * t) + sub.value * t).exp();
            let p = inf.projector(j, k);
            let e = expm(&(inf.nilpotent(j, k) * Complex64::new(t, 0.0)));
            out += e * p * scalar;
        }
    }
    out
}

/// Transport part of the kernel applied to `w0`.
pub fn apply_transport(cd: &CdSystem, inf: &InfinityExpansion, w0: &GridField, t: f64) -> Result<GridField> {
    if cd.m != 1 || w0.grid.dim() != 1 || w0.n != cd.n() {
        return Err(Error::Dimension("transport kernel needs a one-dimensional field matching the system".into()));
    }
    let grid = &w0.grid;
    let len = grid.len();
    let out = apply_modewise(&w0.spectral(), w0.n, len, |idx| transport_symbol(inf, grid.xi(idx)[0], t));
    Ok(GridField { grid: grid.clone(), n: w0.n, data: FieldData::Spectral(out) }.to_physical())
}

/// Mass of the diffusive atoms lying outside `[-L, L)` at time `t`.
pub fn mass_outside(ex: &ZeroExpansion, t: f64, half_length: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for f in &ex.families {
        for sub in &f.sub {
            let gamma = (-sub.value).sqrt();
            let gamma = if gamma.re < 0.0 { -gamma } else { gamma };
            // the envelope of |g| is a real Gaussian with variance 2 t |gamma|^4 / Re(gamma^2)
            let var = 2.0 * t * gamma.norm_sqr().powi(2) / (gamma * gamma).re;
            let sd = var.sqrt();
            let left = (half_length + f.speed * t) / sd;
            let right = (half_length - f.speed * t) / sd;
            let tail = 0.5 * (erfc(left / 2f64.sqrt()) + erfc(right / 2f64.sqrt()));
            let amp = gamma.norm() / (gamma * gamma).re.sqrt();
            worst = worst.max(amp * tail);
        }
    }
    worst
}

fn erfc(x: f64) -> f64 {
    // Numerical Recipes rational approximation, relative error below 1.2e-7
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockFit {
    pub block: Block,
    pub sup: Vec<f64>,
    pub exponent: f64,
    pub residual: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub times: Vec<f64>,
    pub half_length: f64,
    pub points: usize,
    pub blocks: Vec<BlockFit>,
    /// Largest remainder entry outside the wave cone (plus a margin of 10 sqrt(t)).
    pub outside_cone: f64,
    pub passes: bool,
}

impl RemainderReport {
    pub fn block(&self, b: Block) -> &BlockFit {
        self.blocks.iter().find(|f| f.block == b).expect("every block is fitted")
    }
}

/// Expected remainder exponents and tolerances per block.
pub const REMAINDER_RATES: [(Block, f64, f64); 4] =
    [(Block::CC, -1.0, 0.15), (Block::CD, -1.5, 0.15), (Block::DC, -1.5, 0.15), (Block::DD, -2.0, 0.25)];

/// Remainder `Gamma - K - transport` evaluated column-wise on a grid delta,
/// with block sup norms fitted against `t`.
pub fn measure_remainder(cd: &CdSystem, times: &[f64], grid: &Grid) -> Result<RemainderReport> {
    if cd.m != 1 || grid.dim() != 1 {
        return Err(Error::Unsupported("remainder measurement is one-dimensional".into()));
    }
    if times.len() < 6 {
        return Err(Error::InsufficientSamples(format!("{} time samples, need at least 6", times.len())));
    }
    let tmax = times.iter().cloned().fold(0.0, f64::max);
    check_wave_cone(cd, grid, tmax)?;
    let ex = expand_zero(cd, &[1.0])?;
    let inf = expand_infinity(cd, &[1.0])?;
    let spill = mass_outside(&ex, tmax, grid.half_length);
    if spill > 1e-6 {
        return Err(Error::GridTooSmall(format!("kernel mass {spill:.3e} leaves the box by t = {tmax}")));
    }
    let (n1, n) = (cd.n1, cd.n());
    let len = grid.len();
    let dx = grid.dx(0);
    let x = grid.axis_coordinates(0);
    let speed = inf.max_speed();
    let centre = len / 2;
    let per_time: Vec<(Vec<f64>, f64)> = times
        .iter()
        .map(|&t| -> Result<(Vec<f64>, f64)> {
            let prop = Propagator::new(cd, grid, t)?;
            let kern = eval_k(cd, &ex, t, &x)?;
            let mut sup = [0.0f64; 4];
            let mut outside: f64 = 0.0;
            for col in 0..n {
                let mut delta = vec![0.0; n * len];
                delta[col * len + centre] = 1.0 / dx;
                let d = GridField::from_physical(grid, n, delta)?;
                let mut spec = d.spectral();
                for c in 0..n {
                    spec[c * len + len / 2] = Complex64::new(0.0, 0.0);
                }
                let gamma = prop.apply_spectral(&spec);
                let trans = apply_modewise(&spec, n, len, |idx| transport_symbol(&inf, grid.xi(idx)[0], t));
                let diff: Vec<Complex64> = gamma.iter().zip(&trans).map(|(a, b)| a - b).collect();
                let rem = GridField::from_spectral(grid, n, diff)?.physical();
                for row in 0..n {
                    let block = match (row < n1, col < n1) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    for i in 0..len {
                        let r = (rem[row * len + i] - kern.entry(i, row, col)).abs();
                        sup[block] = sup[block].max(r);
                        if x[i].abs() > speed * t + 10.0 * t.sqrt() {
                            outside = outside.max(r);
                        }
                    }
                }
            }
            Ok((sup.to_vec(), outside))
        })
        .collect::<Result<_>>()?;
    let window = (times.iter().cloned().fold(f64::INFINITY, f64::min), tmax);
    let mut blocks = Vec::new();
    for (b, (block, expected, tol)) in REMAINDER_RATES.iter().enumerate() {
        let sup: Vec<f64> = per_time.iter().map(|p| p.0[b]).collect();
        let (exponent, residual) = match fit_decay_exponent(times, &sup, window) {
            Ok(f) => (f.exponent, f.residual),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let pass = (exponent - expected).abs() <= *tol;
        blocks.push(BlockFit { block: *block, sup, exponent, residual, expected: *expected, tolerance: *tol, pass });
    }
    let outside_cone = per_time.iter().map(|p| p.1).fold(0.0, f64::max);
    let passes = blocks.iter().all(|b| b.pass);
    Ok(RemainderReport { times: times.to_vec(), half_length: grid.half_length, points: len, blocks, outside_cone, passes })
}
