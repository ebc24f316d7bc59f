//! Strang splitting of an exactly solvable linear flow and an explicit
//! nonlinear remainder, both acting on component-major spectra.

use num_complex::Complex64;

pub type Spectrum = Vec<Complex64>;

fn axpy(base: &[Complex64], k: &[Complex64], h: f64) -> Spectrum {
    base.iter().zip(k).map(|(b, k)| b + k * h).collect()
}

/// Classical four-stage Runge-Kutta step for `v' = rhs(v)`.
pub fn rk4_step(v: &[Complex64], dt: f64, rhs: &mut dyn FnMut(&[Complex64]) -> Spectrum) -> Spectrum {
    let k1 = rhs(v);
    let k2 = rhs(&axpy(v, &k1, 0.5 * dt));
    let k3 = rhs(&axpy(v, &k2, 0.5 * dt));
    let k4 = rhs(&axpy(v, &k3, dt));
    v.iter()
        .enumerate()
        .map(|(i, x)| x + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

/// One step `L(dt/2) N(dt) L(dt/2)`.
pub fn strang_step(
    v: &[Complex64],
    dt: f64,
    half_linear: &dyn Fn(&[Complex64]) -> Spectrum,
    rhs: &mut dyn FnMut(&[Complex64]) -> Spectrum,
) -> Spectrum {
    let a = half_linear(v);
    let b = rk4_step(&a, dt, rhs);
    half_linear(&b)
}

/// Zeroes the modes removed by the two-thirds rule.
pub fn dealias(spec: &mut [Complex64], keep: &[bool]) {
    let len = keep.len();
    for (i, z) in spec.iter_mut().enumerate() {
        if !keep[i % len] {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}
