//! Shizuta-Kawashima condition and the uniform dissipation constant.

use rayon::prelude::*;
use serde::Serialize;

use crate::cd_form::CdSystem;
use crate::linalg::{cluster_sorted, complex_schur, op_norm_real, select_columns, sym_eigen};

/// Clustering gap for degenerate eigenvalues of `A(zeta)`, relative to its norm.
pub const CLUSTER_GAP: f64 = 1e-8;
/// Smallest principal angle below which an eigenspace meets the kernel of `B`.
pub const ANGLE_TOL: f64 = 1e-6;
pub const TOL_C: f64 = 1e-10;

/// An eigenvector of `A(zeta)` annihilated by the dissipation. An empty
/// `vector` means the spectral gap closed at `zeta` (a frequency) without an
/// exact kernel vector on the sampled directions.
#[derive(Clone, Debug, Serialize)]
pub struct SkWitness {
    pub zeta: Vec<f64>,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenTrace {
    pub xi: Vec<f64>,
    /// Eigenvalues of `E(i xi)` as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkReport {
    pub holds: bool,
    pub c_estimate: f64,
    pub worst_xi: Vec<f64>,
    /// Minimum of the dissipation ratio along each sampled direction.
    pub c_per_direction: Vec<f64>,
    pub eigen_traces: Vec<EigenTrace>,
    pub violation: Option<SkWitness>,
}

/// Tests whether some eigenspace of `A(zeta)` meets the conservative subspace.
/// Returns `None` when the condition holds, otherwise a unit witness vector.
pub fn sk_violation_at(cd: &CdSystem, zeta: &[f64]) -> Option<Vec<f64>> {
    let a = cd.a_of(zeta);
    let (vals, vecs) = sym_eigen(&a);
    let gap = CLUSTER_GAP * op_norm_real(&a).max(f64::MIN_POSITIVE);
    let n1 = cd.n1;
    for range in cluster_sorted(&vals, gap) {
        let v = select_columns(&vecs, range);
        let k = v.ncols();
        let bottom = v.rows(n1, cd.n2).into_owned();
        let coeffs = if k > cd.n2 {
            let null = crate::linalg::null_space(&bottom, 1e-12);
            null.column(0).into_owned()
        } else {
            let svd = bottom.svd(false, true);
            let v_t = svd.v_t.expect("requested right singular vectors");
            let (idx, &smin) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("cluster is non-empty");
            if smin >= ANGLE_TOL {
                continue;
            }
            v_t.row(idx).transpose()
        };
        let w = &v * coeffs;
        let w = &w / w.norm();
        return Some(w.iter().copied().collect());
    }
    None
}

pub fn sk_holds_at(cd: &CdSystem, zeta: &[f64]) -> (bool, Option<Vec<f64>>) {
    let witness = sk_violation_at(cd, zeta);
    (witness.is_none(), witness)
}

/// 256 log-spaced radii in `[1e-3, 1e3]`.
pub fn default_rho_grid() -> Vec<f64> {
    log_space(1e-3, 1e3, 256)
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp()).collect()
}

/// Quasi-uniform unit directions: `{+1, -1}`, 64 angles, or 242 Fibonacci points.
pub fn default_directions(m: usize) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let count = 242;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

/// Scans `E(i rho zeta)` for the largest `c` with
/// `Re lambda <= -c rho^2 / (1 + rho^2)` on the sample set.
pub fn estimate_dissipation_constant(cd: &CdSystem, rho_grid: &[f64], zetas: &[Vec<f64>]) -> SkReport {
    let per_direction: Vec<(f64, Vec<f64>, Vec<EigenTrace>, Option<Vec<f64>>)> = zetas
        .par_iter()
        .map(|zeta| {
            let mut best = f64::INFINITY;
            let mut worst_xi = zeta.clone();
            let mut traces = Vec::with_capacity(rho_grid.len());
            for &rho in rho_grid {
                let xi: Vec<f64> = zeta.iter().map(|z| z * rho).collect();
                let e = cd.symbol(&xi);
                let eig = match complex_schur(&e) {
                    Ok(s) => s.eigenvalues(),
                    Err(_) => continue,
                };
                let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                let ratio = -max_re * (1.0 + rho * rho) / (rho * rho);
                if ratio < best {
                    best = ratio;
                    worst_xi = xi.clone();
                }
                traces.push(EigenTrace { xi, eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect() });
            }
            (best, worst_xi, traces, sk_violation_at(cd, zeta))
        })
        .collect();
    let mut c_estimate = f64::INFINITY;
    let mut worst_xi = Vec::new();
    let mut eigen_traces = Vec::new();
    let mut violation = None;
    let mut c_per_direction = Vec::with_capacity(zetas.len());
    for ((best, xi, traces, witness), zeta) in per_direction.into_iter().zip(zetas) {
        c_per_direction.push(best);
        if best < c_estimate {
            c_estimate = best;
            worst_xi = xi;
        }
        eigen_traces.extend(traces);
        if violation.is_none() {
            violation = witness.map(|vector| SkWitness { zeta: zeta.clone(), vector });
        }
    }
    let c_estimate = if c_estimate.is_finite() { c_estimate.max(0.0) } else { 0.0 };
    let holds = c_estimate > TOL_C && violation.is_none();
    if !holds && violation.is_none() {
        // the scan found no spectral gap although every eigenspace is transversal
        violation = Some(SkWitness { zeta: worst_xi.clone(), vector: Vec::new() });
    }
    SkReport { holds, c_estimate, worst_xi, c_per_direction, eigen_traces, violation }
}

/// True when no sampled direction has an eigenspace meeting the conservative subspace.
pub fn sk_holds_everywhere(cd: &CdSystem, zetas: &[Vec<f64>]) -> bool {
    zetas.iter().all(|z| sk_violation_at(cd, z).is_none())
}
