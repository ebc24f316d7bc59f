use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxlab::decay::{fit_decay_exponent, Norm};
use relaxlab::grid::{Grid, GridField};
use relaxlab::linalg::{expm, max_abs_c, CMat, Mat};
use relaxlab::solver::{
    check_wave_cone, default_cutoff, leray_project, propagate_linear, spectral_divergence, split_low_high,
    LinearSolver, Propagator,
};
use relaxlab::{make_builtin, to_cd_form, CdSystem};

fn cd(name: &str, params: &[f64]) -> CdSystem {
    to_cd_form(&make_builtin(name, params).unwrap()).unwrap().1
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bump(grid: &Grid, n: usize, amp: &[f64], width: f64) -> GridField {
    GridField::from_fn(grid, n, |x, out| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for (o, a) in out.iter_mut().zip(amp) {
            *o = a * (-r2 / (width * width)).exp();
        }
    })
}

fn random_field(grid: &Grid, n: usize, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridField::from_physical(grid, n, data).unwrap()
}

fn max_diff(a: &GridField, b: &GridField) -> f64 {
    a.sub(b).sup()
}

#[test]
fn grid_wavenumbers_and_coordinates() {
    let g = Grid::new(vec![8], 4.0).unwrap();
    assert_eq!(g.coordinate(0, 0), -4.0);
    assert_eq!(g.coordinate(0, 4), 0.0);
    let xi: Vec<f64> = (0..8).map(|k| g.wavenumber(0, k)).collect();
    let pi = std::f64::consts::PI;
    assert_eq!(xi, vec![0.0, pi / 4.0, pi / 2.0, 3.0 * pi / 4.0, 0.0, -3.0 * pi / 4.0, -pi / 2.0, -pi / 4.0]);
    assert!(Grid::new(vec![12], 1.0).is_err());
    assert!(Grid::new(vec![8], 0.0).is_err());
    assert!(Grid::new(vec![8; 4], 1.0).is_err());
}

#[test]
fn spectral_derivatives_and_norms() {
    let g = Grid::new(vec![128], std::f64::consts::PI).unwrap();
    let f = GridField::from_fn(&g, 1, |x, o| o[0] = (3.0 * x[0]).sin());
    let d = f.derivative(&[1]);
    let want = GridField::from_fn(&g, 1, |x, o| o[0] = 3.0 * (3.0 * x[0]).cos());
    assert!(max_diff(&d, &want) < 1e-12);
    let g = Grid::new(vec![512], 20.0).unwrap();
    let gauss = bump(&g, 1, &[1.0], 1.0);
    let pi = std::f64::consts::PI;
    assert!((gauss.norm(0, Norm::L1) - pi.sqrt()).abs() < 1e-12);
    assert!((gauss.norm(0, Norm::L2) - (pi / 2.0).sqrt().sqrt()).abs() < 1e-12);
    assert!((gauss.norm(0, Norm::Inf) - 1.0).abs() < 1e-15);
    // |d/dx e^{-x^2}| = 2|x| e^{-x^2}, whose integral is 2; the kink limits the rule to second order
    assert!((gauss.norm(1, Norm::L1) - 2.0).abs() < 1e-2);
}

#[test]
fn derivative_tensor_norm_in_two_dimensions() {
    let g = Grid::new(vec![64, 64], std::f64::consts::PI).unwrap();
    let f = GridField::from_fn(&g, 1, |x, o| o[0] = x[0].sin() * (2.0 * x[1]).sin());
    let mag = f.derivative_magnitude(2);
    for idx in (0..g.len()).step_by(97) {
        let x = g.point(idx);
        let (s0, c0, s1, c1) = (x[0].sin(), x[0].cos(), (2.0 * x[1]).sin(), (2.0 * x[1]).cos());
        let want = (s0 * s1).powi(2) + 2.0 * (2.0 * c0 * c1).powi(2) + (4.0 * s0 * s1).powi(2);
        assert!((mag[idx] - want.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn binary_container_roundtrip() {
    let g = Grid::new(vec![16, 8], 3.0).unwrap();
    let f = random_field(&g, 3, 7);
    for field in [f.clone(), f.to_spectral()] {
        let mut buf = Vec::new();
        field.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"RLXFLD01");
        let back = GridField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, field);
    }
    assert!(GridField::read_binary(&mut &b"garbage-bytes"[..]).is_err());
    let csv = f.slice_csv();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("x,u0,u1,u2\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds(seed in any::<u64>(), dims in 1usize..=3) {
        let g = Grid::new(vec![8; dims], 2.5).unwrap();
        let f = random_field(&g, 2, seed);
        let phys = f.norm(0, Norm::L2);
        prop_assert!((phys - f.l2_norm_spectral()).abs() <= 1e-10 * phys.max(1.0));
        let s = f.spectral();
        let len = g.len();
        for idx in 0..len {
            let ix = g.unravel(idx);
            let mut jx = [0usize; 3];
            for a in 0..dims {
                jx[a] = (g.sizes[a] - ix[a]) % g.sizes[a];
            }
            let partner = (0..dims).fold(0, |acc, a| acc * g.sizes[a] + jx[a]);
            prop_assert!((s[idx] - s[partner].conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn expm_matches_eigendecomposition(vals in proptest::collection::vec((-3.0f64..1.0, -3.0f64..3.0), 3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CMat::from_fn(3, 3, |i, j| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) + if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) });
        let vinv = v.clone().try_inverse().unwrap();
        let lam = CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, vals.iter().map(|&(a, b)| c(a, b))));
        let a = &v * &lam * &vinv;
        let elam = CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, vals.iter().map(|&(a, b)| c(a, b).exp())));
        let want = &v * elam * &vinv;
        let got = expm(&a);
        prop_assert!(max_abs_c(&(&got - &want)) <= 1e-10 * max_abs_c(&want).max(1.0));
    }

    #[test]
    fn leray_is_idempotent_and_divergence_free(seed in any::<u64>()) {
        let g = Grid::new(vec![16, 16], 3.0).unwrap();
        let v = random_field(&g, 2, seed);
        let p = leray_project(&v).unwrap();
        let pp = leray_project(&p).unwrap();
        prop_assert!(max_diff(&p, &pp) < 1e-12);
        prop_assert!(spectral_divergence(&p) < 1e-10);
    }
}

#[test]
fn expm_examples() {
    let z = CMat::zeros(3, 3);
    assert_eq!(expm(&z), CMat::identity(3, 3));
    let t = 1.7;
    let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-t, 0.0), c(-2.0 * t, 0.0)]));
    let e = expm(&d);
    assert!((e[(0, 0)].re - (-t).exp()).abs() < 1e-15);
    assert!((e[(1, 1)].re - (-2.0 * t).exp()).abs() < 1e-15);
    let n = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    assert_eq!(expm(&n), CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]));
}

#[test]
fn p_system_modes_match_closed_form() {
    let sys = cd("p_system", &[1.0, 0.0]);
    assert_eq!(sys.a[0], Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    assert_eq!(sys.d, Mat::from_row_slice(1, 1, &[-1.0]));
    let g = Grid::new(vec![64], 10.0).unwrap();
    let t = 2.3;
    let prop = Propagator::new(&sys, &g, t).unwrap();
    for idx in 0..g.len() {
        let xi = g.xi(idx)[0];
        if (4.0 * xi * xi - 1.0).abs() < 1e-3 {
            continue;
        }
        let e = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -xi), c(0.0, -xi), c(-1.0, 0.0)]);
        let disc = c(1.0 - 4.0 * xi * xi, 0.0).sqrt();
        let (mp, mm) = ((c(-1.0, 0.0) + disc) / 2.0, (c(-1.0, 0.0) - disc) / 2.0);
        let id = CMat::identity(2, 2);
        let want = ((&e - &id * mm) * (mp * t).exp() - (&e - &id * mp) * (mm * t).exp()) / (mp - mm);
        assert!(max_abs_c(&(prop.mode(idx) - want)) < 1e-10, "mode {xi}");
    }
}

#[test]
fn zero_mode_and_mass() {
    let sys = cd("p_system", &[2.0, 1.0]);
    let g = Grid::new(vec![128], 30.0).unwrap();
    let w0 = GridField::from_fn(&g, 2, |x, o| {
        o[0] = (-(x[0] - 1.0).powi(2)).exp();
        o[1] = 0.5 * (-(x[0] + 2.0).powi(2) / 2.0).exp();
    });
    let m0 = w0.integrals();
    for t in [0.5, 3.0, 11.0] {
        let w = propagate_linear(&sys, &w0, t).unwrap();
        let m = w.integrals();
        assert!((m[0] - m0[0]).abs() < 1e-12 * m0[0].abs().max(1.0));
        let dt = (sys.d[(0, 0)] * t).exp();
        assert!((m[1] - dt * m0[1]).abs() < 1e-12);
    }
}

#[test]
fn skew_evolution_preserves_l2() {
    let mut sys = cd("euler_damping", &[2.0, 1.4]);
    sys.b.fill(0.0);
    let g = Grid::new(vec![32, 32], 8.0).unwrap();
    let w0 = random_field(&g, sys.n(), 3);
    let w = propagate_linear(&sys, &w0, 4.0).unwrap();
    let (a, b) = (w0.norm(0, Norm::L2), w.norm(0, Norm::L2));
    assert!((a - b).abs() < 1e-10 * a);
}

#[test]
fn semigroup_law_and_real_output() {
    for (name, params, m) in [("p_system", vec![2.0, 1.0], 1), ("euler_damping", vec![2.0, 1.4], 2), ("jin_xin", vec![1.5], 1)] {
        let sys = cd(name, &params);
        let g = Grid::new(vec![32; m], 6.0).unwrap();
        let w0 = random_field(&g, sys.n(), 11);
        let one = propagate_linear(&sys, &w0, 1.3).unwrap();
        let two = propagate_linear(&sys, &one, 0.9).unwrap();
        let direct = propagate_linear(&sys, &w0, 2.2).unwrap();
        assert!(max_diff(&two, &direct) < 1e-9, "{name}");
        let spec = Propagator::new(&sys, &g, 2.2).unwrap().apply_spectral(&w0.spectral());
        let imag = relaxlab::grid::inverse_complex(&g.sizes, spec, sys.n()).iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
        assert!(imag < 1e-10, "{name}: {imag}");
    }
}

#[test]
fn three_dimensional_size_guard() {
    let sys = cd("euler_damping", &[3.0, 1.4]);
    let g = Grid::new(vec![128, 4, 4], 6.0).unwrap();
    let w0 = GridField::zeros(&g, sys.n());
    assert!(propagate_linear(&sys, &w0, 1.0).is_err());
    let g = Grid::new(vec![8, 8, 8], 6.0).unwrap();
    let w0 = random_field(&g, sys.n(), 5);
    assert!(propagate_linear(&sys, &w0, 1.0).is_ok());
}

#[test]
fn propagators_stay_bounded() {
    let sys = cd("p_system", &[2.0, 1.0]);
    let g = Grid::new(vec![256], 40.0).unwrap();
    let mut sup: f64 = 0.0;
    for k in 0..=20 {
        sup = sup.max(Propagator::new(&sys, &g, 5.0 * k as f64).unwrap().max_norm());
    }
    assert!(sup.is_finite() && sup < 5.0, "sup = {sup}");
}

#[test]
fn cached_solver_reuses_propagators() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let solver = LinearSolver::new(sys.clone());
    let g = Grid::new(vec![64], 10.0).unwrap();
    let p1 = solver.propagator(&g, 0.5).unwrap();
    let p2 = solver.propagator(&g, 0.5).unwrap();
    assert!(std::sync::Arc::ptr_eq(&p1, &p2));
    let w0 = random_field(&g, 2, 1);
    assert!(max_diff(&solver.propagate(&w0, 0.5).unwrap(), &propagate_linear(&sys, &w0, 0.5).unwrap()) < 1e-14);
}

#[test]
fn wave_cone_guard() {
    let sys = cd("p_system", &[1.0, 0.0]);
    assert!(check_wave_cone(&sys, &Grid::new(vec![64], 20.0).unwrap(), 50.0).is_err());
    assert!(check_wave_cone(&sys, &Grid::new(vec![64], 200.0).unwrap(), 50.0).is_ok());
}

#[test]
fn leray_examples() {
    let g = Grid::new(vec![32, 32], std::f64::consts::PI).unwrap();
    // gradient of sin(x) cos(2y)
    let grad = GridField::from_fn(&g, 2, |x, o| {
        o[0] = x[0].cos() * (2.0 * x[1]).cos();
        o[1] = -2.0 * x[0].sin() * (2.0 * x[1]).sin();
    });
    assert!(leray_project(&grad).unwrap().sup() < 1e-12);
    // curl of a stream function
    let free = GridField::from_fn(&g, 2, |x, o| {
        o[0] = -2.0 * x[0].sin() * (2.0 * x[1]).sin();
        o[1] = -x[0].cos() * (2.0 * x[1]).cos();
    });
    assert!(max_diff(&leray_project(&free).unwrap(), &free) < 1e-12);
    assert!(leray_project(&GridField::zeros(&Grid::new(vec![8], 1.0).unwrap(), 1)).is_err());
}

#[test]
fn low_high_split_is_additive_and_high_part_decays() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let a = default_cutoff(&sys).unwrap();
    assert_eq!(a, 0.25);
    let g = Grid::new(vec![1024], 100.0).unwrap();
    let w0 = bump(&g, 2, &[1.0, 0.3], 1.0);
    let times: Vec<f64> = (0..10).map(|k| 20.0 + 5.0 * k as f64).collect();
    let mut kcal = Vec::new();
    for &t in &times {
        let s = split_low_high(&sys, &w0, t, None).unwrap();
        let full = propagate_linear(&sys, &w0, t).unwrap();
        assert!(max_diff(&s.kpart.add(&s.kcalpart), &full) < 1e-12);
        assert!(s.projector_norm < 2.0);
        let half = split_low_high(&sys, &w0, t, Some(a / 2.0)).unwrap();
        assert!(half.model_defect < s.model_defect / 2.5, "{} vs {}", half.model_defect, s.model_defect);
        kcal.push(s.kcalpart.norm(0, Norm::L2));
    }
    let logs: Vec<f64> = kcal.iter().map(|v| v.ln()).collect();
    let (slope, _, _) = relaxlab::decay::least_squares_slope(&times, &logs);
    let bound = 0.9 * f64::min(1.0, 0.5 * a * a / (1.0 + a * a));
    assert!(-slope >= bound, "rate {} < {bound}", -slope);
}

#[test]
fn low_frequency_part_splits_rates() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let g = Grid::new(vec![2048], 200.0).unwrap();
    let w0 = bump(&g, 2, &[1.0, 0.0], 1.0);
    let times: Vec<f64> = (0..8).map(|k| 20.0 * 1.25f64.powi(k)).collect();
    let (mut c0, mut cm) = (Vec::new(), Vec::new());
    for &t in &times {
        let s = split_low_high(&sys, &w0, t, None).unwrap();
        c0.push(s.kpart.select(&[0]).norm(0, Norm::L2));
        cm.push(s.kpart.select(&[1]).norm(0, Norm::L2));
    }
    let w = (times[0], *times.last().unwrap());
    let e0 = fit_decay_exponent(&times, &c0, w).unwrap().exponent;
    let em = fit_decay_exponent(&times, &cm, w).unwrap().exponent;
    assert!((e0 + 0.25).abs() < 0.1, "{e0}");
    assert!((em + 0.75).abs() < 0.1, "{em}");
}

#[test]
fn oversized_cutoff_is_rejected() {
    let sys = cd("p_system", &[1.0, 0.0]);
    let g = Grid::new(vec![256], 8.0 * std::f64::consts::PI).unwrap();
    let w0 = bump(&g, 2, &[1.0, 0.0], 1.0);
    // the two eigenvalues collide at |xi| = 1/2
    let r = split_low_high(&sys, &w0, 1.0, Some(0.5));
    assert!(r.is_err(), "{:?}", r.map(|s| s.projector_norm));
}
