//! Complex Schur decomposition with adjacent-swap reordering.

use num_complex::Complex64;

use super::CMat;
use crate::error::{Error, Result};

/// Unitary `q` and upper-triangular `t` with `a = q t q^H`.
#[derive(Clone, Debug)]
pub struct ComplexSchur {
    pub q: CMat,
    pub t: CMat,
}

/// Plane rotation `[c s; -conj(s) c]` mapping `(f, g)` to `(r, 0)`.
fn rotation(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let (af, ag) = (f.norm(), g.norm());
    if ag == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if af == 0.0 {
        return (0.0, g.conj() / ag);
    }
    let r = af.hypot(ag);
    (af / r, (f / af) * g.conj() / r)
}

/// Rows `i`, `i+1` of `m` over columns `cols` multiplied from the left.
fn rotate_rows(m: &mut CMat, i: usize, cols: std::ops::Range<usize>, c: f64, s: Complex64) {
    for j in cols {
        let x = m[(i, j)];
        let y = m[(i + 1, j)];
        m[(i, j)] = x * c + s * y;
        m[(i + 1, j)] = y * c - s.conj() * x;
    }
}

/// Columns `j`, `j+1` of `m` over rows `rows` multiplied by the adjoint rotation.
fn rotate_cols(m: &mut CMat, j: usize, rows: std::ops::Range<usize>, c: f64, s: Complex64) {
    for i in rows {
        let p = m[(i, j)];
        let q = m[(i, j + 1)];
        m[(i, j)] = p * c + s.conj() * q;
        m[(i, j + 1)] = q * c - s * p;
    }
}

fn hessenberg(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMat::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // h <- (I - 2 v v^H) h (I - 2 v v^H), q <- q (I - 2 v v^H)
        for j in 0..n {
            let dot: Complex64 = (0..v.len()).map(|r| v[r].conj() * h[(k + 1 + r, j)]).sum();
            for r in 0..v.len() {
                h[(k + 1 + r, j)] -= v[r] * dot * 2.0;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let dot: Complex64 = (0..v.len()).map(|r| m[(i, k + 1 + r)] * v[r]).sum();
                for r in 0..v.len() {
                    m[(i, k + 1 + r)] -= dot * v[r].conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    (h, q)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let den = if (half + disc).norm() >= (half - disc).norm() { half + disc } else { half - disc };
    if den.norm() == 0.0 {
        d
    } else {
        d - b * c / den
    }
}

/// Computes the complex Schur form by shifted QR iteration on the Hessenberg form.
pub fn complex_schur(a: &CMat) -> Result<ComplexSchur> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("Schur form needs a square matrix".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoConvergence);
    }
    let (mut t, mut q) = hessenberg(a);
    let eps = f64::EPSILON;
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let mut hi = n.saturating_sub(1);
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let diag = t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm();
            if sub <= eps * diag || sub <= eps * eps * scale {
                t[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n.max(4) {
            return Err(Error::NoConvergence);
        }
        let sigma = if iter % 11 == 0 {
            t[(hi, hi)] + Complex64::new(t[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };
        for k in lo..=hi {
            t[(k, k)] -= sigma;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = rotation(t[(k, k)], t[(k + 1, k)]);
            rotate_rows(&mut t, k, k..n, c, s);
            t[(k + 1, k)] = Complex64::new(0.0, 0.0);
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            rotate_cols(&mut t, k, 0..(k + 2).min(hi + 1), c, s);
            rotate_cols(&mut q, k, 0..n, c, s);
        }
        for k in lo..=hi {
            t[(k, k)] += sigma;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { q, t })
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Exchanges the diagonal entries at positions `k` and `k + 1`.
    pub fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.nrows();
        let t11 = self.t[(k, k)];
        let t22 = self.t[(k + 1, k + 1)];
        let (c, s) = rotation(self.t[(k, k + 1)], t22 - t11);
        if k + 2 < n {
            rotate_rows(&mut self.t, k, k + 2..n, c, s);
        }
        rotate_cols(&mut self.t, k, 0..k, c, s);
        rotate_cols(&mut self.q, k, 0..n, c, s);
        self.t[(k, k)] = t22;
        self.t[(k + 1, k + 1)] = t11;
    }

    /// Moves the diagonal entries flagged in `select` to the leading block,
    /// preserving their relative order. Returns the size of the leading block.
    pub fn reorder_leading(&mut self, select: &[bool]) -> usize {
        let mut flags = select.to_vec();
        let mut dest = 0;
        for i in 0..flags.len() {
            if flags[i] {
                let mut k = i;
                while k > dest {
                    self.swap_adjacent(k - 1);
                    flags.swap(k - 1, k);
                    k -= 1;
                }
                dest += 1;
            }
        }
        dest
    }
}
