use num_complex::Complex64;
use relaxlab::expansion::{expand_infinity, expand_zero};
use relaxlab::grid::{Grid, GridField};
use relaxlab::kernel1d::{apply_transport, eval_k, gaussian_derivatives, kernel_symbol, measure_remainder, Block};
use relaxlab::linalg::{expm, max_abs_c, to_complex, CMat, Mat};
use relaxlab::sk::log_space;
use relaxlab::{make_builtin, to_cd_form, CdSystem, RawSystem};

fn cd(name: &str, params: &[f64]) -> CdSystem {
    to_cd_form(&make_builtin(name, params).unwrap()).unwrap().1
}

/// Two conservative and two damped unknowns whose damping rotates, giving complex diffusion.
fn rotating_damping() -> CdSystem {
    #[rustfmt::skip]
    let a = Mat::from_row_slice(4, 4, &[
        0.3, 0.0, 1.0, 0.0,
        0.0, 0.3, 0.0, 1.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    ]);
    let mut b = Mat::zeros(4, 4);
    b[(2, 2)] = -1.0;
    b[(2, 3)] = 2.0;
    b[(3, 2)] = -2.0;
    b[(3, 3)] = -1.0;
    let sys = RawSystem::new("rotating", 2, 2, vec![a], b, Mat::identity(4, 4)).unwrap();
    to_cd_form(&sys).unwrap().1
}

fn heat(t: f64, x: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

fn trapezoid_transform(xs: &[f64], f: impl Fn(usize) -> Complex64, xi: f64) -> Complex64 {
    let h = xs[1] - xs[0];
    xs.iter().enumerate().map(|(i, &x)| f(i) * Complex64::new(0.0, -xi * x).exp()).sum::<Complex64>() * h
}

#[test]
fn p_system_kernel_closed_forms() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let ex = expand_zero(&sys, &[1.0]).unwrap();
    let xs: Vec<f64> = (0..81).map(|i| -20.0 + 0.5 * i as f64).collect();
    for t in [1.0, 3.5, 20.0] {
        let k = eval_k(&sys, &ex, t, &xs).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let g = heat(t, x);
            assert!((k.entry(i, 0, 0) - g).abs() < 1e-14);
            assert!((k.entry(i, 0, 1) - x / (2.0 * t) * g).abs() < 1e-14);
            assert!((k.entry(i, 1, 0) - x / (2.0 * t) * g).abs() < 1e-14);
            let gxx = (x * x / (4.0 * t * t) - 1.0 / (2.0 * t)) * g;
            assert!((k.entry(i, 1, 1) - gxx).abs() < 1e-14);
        }
        assert!(k.max_imag() < 1e-15);
    }
    assert!(eval_k(&sys, &ex, 0.0, &xs).is_err());
    assert!(eval_k(&sys, &ex, -1.0, &xs).is_err());
}

#[test]
fn conservative_block_has_unit_mass() {
    for sys in [cd("p_system", &[2.0, 1.0]), cd("jin_xin", &[1.5]), rotating_damping()] {
        let ex = expand_zero(&sys, &[1.0]).unwrap();
        let xs: Vec<f64> = (0..8001).map(|i| -100.0 + 0.025 * i as f64).collect();
        let k = eval_k(&sys, &ex, 4.0, &xs).unwrap();
        let n1 = sys.n1;
        let n = sys.n();
        let h = xs[1] - xs[0];
        for r in 0..n {
            for c in 0..n {
                let mass: f64 = (0..xs.len()).map(|i| k.entry(i, r, c)).sum::<f64>() * h;
                let want = if r < n1 && c < n1 { ex.p0[(r, c)] } else { 0.0 };
                assert!((mass - want).abs() < 1e-10, "{} ({r},{c}): {mass}", sys.origin.name);
            }
        }
    }
}

#[test]
fn complex_diffusion_gives_real_kernel() {
    let sys = rotating_damping();
    let ex = expand_zero(&sys, &[1.0]).unwrap();
    let values: Vec<Complex64> = ex.families.iter().flat_map(|f| f.sub.iter().map(|s| s.value)).collect();
    assert!(values.iter().any(|c| c.im.abs() > 0.1), "{values:?}");
    assert!(ex.max_re_c() < 0.0);
    let xs: Vec<f64> = (0..201).map(|i| -30.0 + 0.3 * i as f64).collect();
    let k = eval_k(&sys, &ex, 2.0, &xs).unwrap();
    assert!(k.max_imag() < 1e-10, "{}", k.max_imag());
}

#[test]
fn atoms_obey_gaussian_envelope() {
    let gamma = Complex64::new(0.9, 0.4);
    let arg = gamma.arg();
    let cbound = 4.0 * gamma.norm_sqr() / (2.0 * arg).cos();
    for t in [1.0, 10.0] {
        let s = gamma * (2.0 * f64::sqrt(t));
        for i in 0..200 {
            let y = -20.0 + 0.2 * i as f64;
            let g = gaussian_derivatives(y, s, 0)[0].norm();
            let env = (-(y * y) / (cbound * t)).exp() / (2.0 * gamma.norm() * (std::f64::consts::PI * t).sqrt());
            assert!(g <= env * (1.0 + 1e-12));
        }
    }
}

#[test]
fn hermite_derivatives_match_differences() {
    let s = Complex64::new(1.3, 0.2);
    let y = 0.7;
    let h = 1e-4;
    let d = gaussian_derivatives(y, s, 4);
    for k in 0..4 {
        let fd = (gaussian_derivatives(y + h, s, 4)[k] - gaussian_derivatives(y - h, s, 4)[k]) / (2.0 * h);
        assert!((fd - d[k + 1]).norm() < 1e-6, "order {k}");
    }
}

#[test]
fn kernel_transform_matches_symbol_at_low_frequency() {
    for sys in [cd("p_system", &[2.0, 1.0]), rotating_damping(), cd("jin_xin", &[1.0])] {
        let ex = expand_zero(&sys, &[1.0]).unwrap();
        let t = 3.0;
        let xs: Vec<f64> = (0..12001).map(|i| -150.0 + 0.025 * i as f64).collect();
        let k = eval_k(&sys, &ex, t, &xs).unwrap();
        let n = sys.n();
        for xi in [0.0, 0.03, -0.07, 0.1] {
            let sym = kernel_symbol(&ex, xi, t);
            for r in 0..n {
                for c in 0..n {
                    let got = trapezoid_transform(&xs, |i| k.values[i][(r, c)], xi);
                    assert!((got - sym[(r, c)]).norm() < 1e-6, "{} xi={xi} ({r},{c})", sys.origin.name);
                }
            }
        }
    }
}

#[test]
fn defective_kernel_matches_quadrature() {
    let lambda = 1.5;
    let sys = cd("jin_xin", &[lambda]);
    let ex = expand_zero(&sys, &[1.0]).unwrap();
    assert!(ex.families.iter().any(|f| f.sub.iter().any(|s| s.is_defective())));
    let t = 2.0;
    let xs: Vec<f64> = (0..41).map(|i| -10.0 + 0.5 * i as f64).collect();
    let k = eval_k(&sys, &ex, t, &xs).unwrap();
    // inverse Fourier integral of exp(F(i xi) t), F(z) = -z A11 - z^2 A12 D^{-1} A21
    let (a11, a12, a21, _) = sys.blocks(&sys.a[0]);
    let visc = to_complex(&(&a12 * sys.d_inv() * &a21));
    let a11 = to_complex(&a11);
    let (lo, hi, count) = (-12.0, 12.0, 24001);
    let h = (hi - lo) / (count - 1) as f64;
    let mats: Vec<(f64, CMat)> = (0..count)
        .map(|j| {
            let xi = lo + h * j as f64;
            let z = Complex64::new(0.0, xi);
            let f = (&a11 * (-z) - &visc * (z * z)) * Complex64::new(t, 0.0);
            (xi, expm(&f))
        })
        .collect();
    for (i, &x) in xs.iter().enumerate() {
        let mut acc = CMat::zeros(2, 2);
        for (j, (xi, m)) in mats.iter().enumerate() {
            let w = if j == 0 || j == count - 1 { 0.5 } else { 1.0 };
            acc += m * (Complex64::new(0.0, xi * x).exp() * w);
        }
        acc *= Complex64::new(h / (2.0 * std::f64::consts::PI), 0.0);
        let got = k.values[i].view((0, 0), (2, 2)).into_owned();
        assert!(max_abs_c(&(got - acc)) < 1e-9, "x = {x}");
    }
}

#[test]
fn transport_examples() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let inf = expand_infinity(&sys, &[1.0]).unwrap();
    let g = Grid::new(vec![512], 32.0).unwrap();
    let w0 = GridField::from_fn(&g, 2, |x, o| {
        o[0] = (-(x[0] - 1.0).powi(2)).exp();
        o[1] = 0.5 * (-(x[0] + 1.0).powi(2) / 3.0).exp();
    });
    let same = apply_transport(&sys, &inf, &w0, 0.0).unwrap();
    assert!(same.sub(&w0).sup() < 1e-13);
    // shift by an integer number of cells
    let dx = g.dx(0);
    let t = 40.0 * dx;
    let out = apply_transport(&sys, &inf, &w0, t).unwrap();
    let u = w0.physical();
    let len = g.len();
    let damp = (-t / 2.0).exp();
    let got = out.physical();
    for i in 0..len {
        let ip = (i + len - 40) % len;
        let im = (i + 40) % len;
        let plus = 0.5 * (u[ip] + u[len + ip]);
        let minus = 0.5 * (u[im] - u[len + im]);
        assert!((got[i] - damp * (plus + minus)).abs() < 1e-12);
        assert!((got[len + i] - damp * (plus - minus)).abs() < 1e-12);
    }
    for t in [0.5, 3.0, 9.0] {
        let out = apply_transport(&sys, &inf, &w0, t).unwrap();
        assert!(out.norm(0, relaxlab::decay::Norm::L2) <= (-t / 2.0).exp() * w0.norm(0, relaxlab::decay::Norm::L2) * (1.0 + 1e-12));
    }
}

#[test]
fn remainder_guards_and_cone() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let times = log_space(20.0, 50.0, 6);
    let small = Grid::new(vec![1024], 40.0).unwrap();
    assert!(measure_remainder(&sys, &times, &small).is_err());
    assert!(measure_remainder(&sys, &times[..3], &Grid::new(vec![4096], 200.0).unwrap()).is_err());
    let r = measure_remainder(&sys, &times, &Grid::new(vec![1 << 14], 200.0).unwrap()).unwrap();
    assert!(r.outside_cone <= 1e-8, "{}", r.outside_cone);
    for b in Block::ALL {
        let fit = r.block(b);
        assert_eq!(fit.sup.len(), times.len());
        assert!(fit.sup.windows(2).all(|w| w[1] < w[0]), "{:?}", b);
    }
}
