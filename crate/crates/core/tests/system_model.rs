use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use relaxlab::linalg::{max_abs, Mat};
use relaxlab::{make_builtin, validate_h1, Error, RawSystem};

fn all_builtins() -> Vec<RawSystem> {
    vec![
        make_builtin("p_system", &[2.0, 1.0]).unwrap(),
        make_builtin("p_system", &[1.0, 0.0]).unwrap(),
        make_builtin("euler_damping", &[1.0]).unwrap(),
        make_builtin("euler_damping", &[2.0]).unwrap(),
        make_builtin("euler_damping", &[3.0]).unwrap(),
        make_builtin("euler_relaxation", &[2.0]).unwrap(),
        make_builtin("euler_relaxation", &[3.0]).unwrap(),
        make_builtin("jin_xin", &[1.5]).unwrap(),
    ]
}

#[test]
fn p_system_matrices() {
    let sys = make_builtin("p_system", &[2.0, 1.0]).unwrap();
    assert_eq!(sys.a[0], Mat::from_row_slice(2, 2, &[0.0, 1.0, 4.0, 0.0]));
    assert_eq!(sys.b, Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]));
    assert_eq!(sys.a0, Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 4.0]));
    let sys = make_builtin("p_system", &[1.0, 0.0]).unwrap();
    assert_eq!(sys.a[0], Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    assert_eq!(sys.b, Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
    assert_eq!(sys.a0, Mat::identity(2, 2));
}

#[test]
fn euler_damping_three_dimensional() {
    let sys = make_builtin("euler_damping", &[3.0]).unwrap();
    assert_eq!((sys.n1, sys.n2, sys.m), (1, 3, 3));
    for alpha in 0..3 {
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i == 0 && j == 1 + alpha) || (j == 0 && i == 1 + alpha) { 1.0 } else { 0.0 };
                assert_eq!(sys.a[alpha][(i, j)], expect);
            }
        }
    }
    let mut b = Mat::zeros(4, 4);
    for i in 1..4 {
        b[(i, i)] = -1.0;
    }
    assert_eq!(sys.b, b);
}

#[test]
fn unknown_and_invalid_builtins() {
    assert!(matches!(make_builtin("burgers", &[]), Err(Error::UnknownBuiltin(_))));
    assert!(matches!(make_builtin("p_system", &[1.0, 1.0]), Err(Error::Subcharacteristic { .. })));
    assert!(matches!(make_builtin("p_system", &[1.0, -2.0]), Err(Error::Subcharacteristic { .. })));
    assert!(make_builtin("euler_damping", &[4.0]).is_err());
}

#[test]
fn h1_report_for_p_system() {
    let r = validate_h1(&make_builtin("p_system", &[2.0, 1.0]).unwrap());
    assert!(r.passes);
    assert_eq!(r.d_spectrum.len(), 1);
    assert_abs_diff_eq!(r.d_spectrum[0][0], -3.0, epsilon = 1e-12);
}

#[test]
fn h1_trivial_and_singular_symmetrizer() {
    let sys = RawSystem::new(
        "sym",
        1,
        1,
        vec![Mat::from_row_slice(2, 2, &[0.3, 1.0, 1.0, -0.2])],
        Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
        Mat::identity(2, 2),
    )
    .unwrap();
    assert!(validate_h1(&sys).passes);
    let mut forced = make_builtin("p_system", &[2.0, 1.0]).unwrap();
    forced.a0 = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let r = validate_h1(&forced);
    assert!(!r.a0_spd);
    assert!(!r.passes);
}

#[test]
fn b_rows_must_vanish() {
    let err = RawSystem::new(
        "bad",
        1,
        1,
        vec![Mat::identity(2, 2)],
        Mat::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]),
        Mat::identity(2, 2),
    );
    assert!(matches!(err, Err(Error::Hypothesis(_))));
}

#[test]
fn every_builtin_passes_h1() {
    for sys in all_builtins() {
        assert!(validate_h1(&sys).passes, "{}", sys.name);
    }
}

#[test]
fn symbol_examples() {
    let sys = make_builtin("p_system", &[1.0, 0.0]).unwrap();
    let e0 = sys.symbol(&[0.0]);
    assert_eq!(e0.map(|z| z.re), sys.b);
    assert!(e0.iter().all(|z| z.im == 0.0));
    let e = sys.symbol(&[1.0]);
    let i = Complex64::new(0.0, 1.0);
    assert_eq!(e[(0, 0)], Complex64::new(0.0, 0.0));
    assert_eq!(e[(0, 1)], -i);
    assert_eq!(e[(1, 0)], -i);
    assert_eq!(e[(1, 1)], Complex64::new(-1.0, 0.0));

    let sys = make_builtin("euler_damping", &[2.0]).unwrap();
    let e = sys.symbol(&[1.0, 0.0]);
    assert_eq!(e[(0, 1)], -i);
    assert_eq!(e[(1, 0)], -i);
    assert_eq!(e[(1, 1)], Complex64::new(-1.0, 0.0));
    assert_eq!(e[(2, 2)], Complex64::new(-1.0, 0.0));
    assert_eq!(e[(0, 2)], Complex64::new(0.0, 0.0));
}

#[test]
fn finite_difference_jacobians_match_linearization() {
    for sys in all_builtins() {
        let Some(nl) = sys.nonlinearity.clone() else { continue };
        let zero = vec![0.0; sys.n()];
        for alpha in 0..sys.m {
            assert!(max_abs(&(nl.flux_jacobian(&zero, alpha) - &sys.a[alpha])) <= 1e-6, "{}", sys.name);
        }
        assert!(max_abs(&(nl.source_jacobian(&zero) - &sys.b)) <= 1e-6, "{}", sys.name);
        let mut g = vec![0.0; sys.n()];
        nl.source(&[0.3, -0.2, 0.1, 0.05][..sys.n()], &mut g);
        assert!(g[..sys.n1].iter().all(|&x| x == 0.0));
    }
}

proptest! {
    #[test]
    fn symbol_is_affine_in_xi(x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let sys = make_builtin("euler_relaxation", &[2.0]).unwrap();
        let sum = sys.symbol(&[x, y]) + sys.symbol(&[-x, -y]);
        let two_b = sys.b.map(|v| Complex64::new(2.0 * v, 0.0));
        prop_assert_eq!(sum, two_b);
    }
}
