use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxlab::linalg::{complex_schur, expm, spectral_decomposition, spectral_projector, CMat};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Taylor series with many terms, accurate for small norms.
fn taylor_expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut term = CMat::identity(n, n);
    let mut sum = term.clone();
    for k in 1..60 {
        term = &term * a / c(k as f64, 0.0);
        sum += &term;
    }
    sum
}

#[test]
fn schur_reconstructs_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..9 {
        let a = random_matrix(&mut rng, n);
        let s = complex_schur(&a).unwrap();
        let back = &s.q * &s.t * s.q.adjoint();
        assert!(max_diff(&back, &a) < 1e-12, "n = {n}");
        assert!(max_diff(&(s.q.adjoint() * &s.q), &CMat::identity(n, n)) < 1e-12);
        for j in 0..n {
            for i in j + 1..n {
                assert_eq!(s.t[(i, j)], c(0.0, 0.0));
            }
        }
    }
}

#[test]
fn reordering_keeps_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_matrix(&mut rng, 6);
    let mut s = complex_schur(&a).unwrap();
    let eig = s.eigenvalues();
    let flags = [false, true, false, false, true, true];
    let k = s.reorder_leading(&flags);
    assert_eq!(k, 3);
    let moved = s.eigenvalues();
    assert!((moved[0] - eig[1]).norm() < 1e-12);
    assert!((moved[1] - eig[4]).norm() < 1e-12);
    assert!((moved[2] - eig[5]).norm() < 1e-12);
    assert!(max_diff(&(&s.q * &s.t * s.q.adjoint()), &a) < 1e-12);
}

#[test]
fn projectors_resolve_identity_and_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_matrix(&mut rng, 5);
    let dec = spectral_decomposition(&a, 1e-7).unwrap();
    assert_eq!(dec.clusters.len(), 5);
    let mut sum = CMat::zeros(5, 5);
    for cl in &dec.clusters {
        let p = &cl.projector;
        assert!(max_diff(&(p * p), p) < 1e-10);
        assert!(max_diff(&(&a * p), &(p * &a)) < 1e-10);
        assert!(max_diff(&(&a * p), &(p * cl.eigenvalue)) < 1e-10);
        sum += p;
    }
    assert!(max_diff(&sum, &CMat::identity(5, 5)) < 1e-10);
}

#[test]
fn jordan_block_yields_nilpotent_part() {
    // similarity transform of a 2x2 Jordan block plus a simple eigenvalue
    let j = CMat::from_row_slice(3, 3, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let s = CMat::from_row_slice(3, 3, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let si = s.clone().try_inverse().unwrap();
    let a = &s * &j * &si;
    let dec = spectral_decomposition(&a, 1e-7).unwrap();
    assert_eq!(dec.clusters.len(), 2);
    let double = dec.clusters.iter().find(|cl| cl.multiplicity == 2).unwrap();
    assert!((double.eigenvalue - c(2.0, 0.0)).norm() < 1e-9);
    let mut e = CMat::zeros(3, 3);
    e[(0, 0)] = c(1.0, 0.0);
    e[(1, 1)] = c(1.0, 0.0);
    let p_exact = &s * &e * &si;
    let mut n_exact = CMat::zeros(3, 3);
    n_exact[(0, 1)] = c(1.0, 0.0);
    let n_exact = &s * n_exact * &si;
    assert!(max_diff(&double.projector, &p_exact) < 1e-7);
    assert!(max_diff(&double.nilpotent, &n_exact) < 1e-7);
    assert!(max_diff(&(&double.nilpotent * &double.nilpotent), &CMat::zeros(3, 3)) < 1e-7);
}

#[test]
fn projector_selection_matches_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_matrix(&mut rng, 4);
    let p = spectral_projector(&a, |z| z.re < 0.0).unwrap();
    let dec = spectral_decomposition(&a, 1e-7).unwrap();
    let mut expect = CMat::zeros(4, 4);
    for cl in dec.clusters.iter().filter(|cl| cl.eigenvalue.re < 0.0) {
        expect += &cl.projector;
    }
    assert!(max_diff(&p, &expect) < 1e-10);
}

#[test]
fn expm_matches_series_and_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for scale in [1e-3, 0.1, 0.5, 1.5, 3.0] {
        let a = random_matrix(&mut rng, 4) * c(scale, 0.0);
        let want = taylor_expm(&a);
        assert!(max_diff(&expm(&a), &want) < 1e-12 * want.norm().max(1.0), "scale {scale}");
    }
    let theta = 40.0;
    let rot = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)]);
    let e = expm(&rot);
    let want = CMat::from_row_slice(2, 2, &[c(theta.cos(), 0.0), c(-theta.sin(), 0.0), c(theta.sin(), 0.0), c(theta.cos(), 0.0)]);
    assert!(max_diff(&e, &want) < 1e-11);
    let nil = CMat::from_row_slice(2, 2, &[c(-50.0, 0.0), c(7.0, 0.0), c(0.0, 0.0), c(-50.0, 0.0)]);
    let e = expm(&nil);
    let d = (-50.0f64).exp();
    let want = CMat::from_row_slice(2, 2, &[c(d, 0.0), c(7.0 * d, 0.0), c(0.0, 0.0), c(d, 0.0)]);
    assert!(max_diff(&e, &want) < 1e-30);
}
