use num_complex::Complex64;

use super::CMat;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];

const THETA: [(usize, f64); 4] = [(3, 1.495585217958292e-2), (5, 2.539398330063230e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068)];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let mut power = id.clone();
    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for k in 0..b.len() / 2 {
        u += &power * Complex64::new(b[2 * k + 1], 0.0);
        v += &power * Complex64::new(b[2 * k], 0.0);
        power = &power * &a2;
    }
    (a * u, v)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let b = |k: usize| Complex64::new(B13[k], 0.0);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    (u, v)
}

/// Matrix exponential by scaling and squaring with Padé approximants.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    if n == 1 {
        return CMat::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = one_norm(a);
    let (u, v, squarings) = if let Some(&(deg, _)) = THETA.iter().find(|(_, th)| norm <= *th) {
        let b: &[f64] = match deg {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        let (u, v) = pade_low(a, b);
        (u, v, 0)
    } else {
        let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
        let scaled = a * Complex64::new(0.5f64.powi(s), 0.0);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| CMat::from_element(n, n, Complex64::new(f64::NAN, 0.0)));
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
