//! Eigenvalue clustering and Riesz projectors for possibly defective matrices.

use num_complex::Complex64;

use super::{complex_schur, op_norm, CMat};
use crate::error::{Error, Result};

/// One group of numerically coincident eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralCluster {
    /// Mean of the clustered eigenvalues.
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
    /// Riesz projector onto the generalized eigenspace.
    pub projector: CMat,
    /// `(A - eigenvalue) * projector`, zero when the cluster is semisimple.
    pub nilpotent: CMat,
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub clusters: Vec<SpectralCluster>,
}

impl SpectralDecomposition {
    /// Largest projector norm, a measure of eigenvector conditioning.
    pub fn projector_condition(&self) -> f64 {
        self.clusters.iter().map(|c| op_norm(&c.projector)).fold(1.0, f64::max)
    }

    pub fn is_defective(&self, tol: f64) -> bool {
        self.clusters.iter().any(|c| super::max_abs_c(&c.nilpotent) > tol)
    }
}

/// Single-linkage clustering of complex values with distance threshold `tol`.
/// Clusters are ordered by the real part, then the imaginary part, of their mean.
pub fn cluster_complex(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    let mean = |g: &Vec<usize>| g.iter().map(|&i| values[i]).sum::<Complex64>() / g.len() as f64;
    groups.sort_by(|a, b| {
        let (ma, mb) = (mean(a), mean(b));
        ma.re.total_cmp(&mb.re).then(ma.im.total_cmp(&mb.im))
    });
    groups
}

/// Solves `t11 x - x t22 = c` for upper-triangular `t11`, `t22`.
fn triangular_sylvester(t11: &CMat, t22: &CMat, c: &CMat) -> CMat {
    let (p, q) = (t11.nrows(), t22.nrows());
    let mut x = CMat::zeros(p, q);
    for j in 0..q {
        let mut rhs: Vec<Complex64> = (0..p).map(|i| c[(i, j)]).collect();
        for k in 0..j {
            let f = t22[(k, j)];
            for i in 0..p {
                rhs[i] += x[(i, k)] * f;
            }
        }
        let shift = t22[(j, j)];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for k in i + 1..p {
                s -= t11[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / (t11[(i, i)] - shift);
        }
    }
    x
}

fn projector_from_flags(schur: &super::ComplexSchur, select: &[bool]) -> CMat {
    let n = select.len();
    let mut s = schur.clone();
    let p = s.reorder_leading(select);
    let t11 = s.t.view((0, 0), (p, p)).into_owned();
    let t12 = s.t.view((0, p), (p, n - p)).into_owned();
    let t22 = s.t.view((p, p), (n - p, n - p)).into_owned();
    let x = triangular_sylvester(&t11, &t22, &(-t12));
    let mut core = CMat::zeros(n, n);
    for i in 0..p {
        core[(i, i)] = Complex64::new(1.0, 0.0);
        for j in 0..n - p {
            core[(i, p + j)] = -x[(i, j)];
        }
    }
    &s.q * core * s.q.adjoint()
}

/// Riesz projector onto the eigenvalues for which `select` holds.
pub fn spectral_projector(a: &CMat, select: impl Fn(Complex64) -> bool) -> Result<CMat> {
    let schur = complex_schur(a)?;
    let flags: Vec<bool> = schur.eigenvalues().into_iter().map(select).collect();
    Ok(projector_from_flags(&schur, &flags))
}

/// Clusters eigenvalues closer than `rel_tol * max(1, |a|)` and returns the
/// projector and nilpotent part of each cluster.
pub fn spectral_decomposition(a: &CMat, rel_tol: f64) -> Result<SpectralDecomposition> {
    let n = a.nrows();
    let schur = complex_schur(a)?;
    let eig = schur.eigenvalues();
    let tol = rel_tol * op_norm(a).max(1.0);
    let groups = cluster_complex(&eig, tol);
    let mut clusters = Vec::with_capacity(groups.len());
    for g in groups {
        let lam = g.iter().map(|&i| eig[i]).sum::<Complex64>() / g.len() as f64;
        let projector = if g.len() == n {
            CMat::identity(n, n)
        } else {
            let mut flags = vec![false; n];
            for &i in &g {
                flags[i] = true;
            }
            projector_from_flags(&schur, &flags)
        };
        let shifted = a - CMat::identity(n, n) * lam;
        let nilpotent = &shifted * &projector;
        clusters.push(SpectralCluster { eigenvalue: lam, multiplicity: g.len(), projector, nilpotent });
    }
    Ok(SpectralDecomposition { clusters })
}

/// Riesz projector onto the `count` eigenvalues of smallest modulus.
pub fn projector_smallest(a: &CMat, count: usize) -> Result<CMat> {
    let n = a.nrows();
    if count == 0 {
        return Ok(CMat::zeros(n, n));
    }
    if count >= n {
        return Ok(CMat::identity(n, n));
    }
    let schur = complex_schur(a)?;
    let eig = schur.eigenvalues();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig[i].norm().total_cmp(&eig[j].norm()));
    let mut flags = vec![false; n];
    for &i in &order[..count] {
        flags[i] = true;
    }
    let p = projector_from_flags(&schur, &flags);
    if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    Ok(p)
}
