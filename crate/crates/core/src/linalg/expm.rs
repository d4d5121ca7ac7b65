//! Scaling and squaring with diagonal Padé approximants (Higham 2005).

use super::{CMatrix, C64};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[
            17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
        ],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
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
        ],
        _ => unreachable!("no Padé table for degree {m}"),
    }
}

fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled(a: &CMatrix, s: f64) -> CMatrix {
    a * C64::new(s, 0.0)
}

/// Matrix exponential of a dense complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let ident = CMatrix::identity(n, n);
    let nrm = norm1(a);
    for &(m, theta) in &THETA {
        if nrm <= theta {
            let (u, v) = pade_low(a, m, &ident);
            return solve_pade(u, v);
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scaled(a, 0.5_f64.powi(s));
    let (u, v) = pade13(&a, &ident);
    let mut r = solve_pade(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &CMatrix, m: usize, ident: &CMatrix) -> (CMatrix, CMatrix) {
    let b = pade_coefficients(m);
    let a2 = a * a;
    let mut u_inner = scaled(ident, b[1]);
    let mut v = scaled(ident, b[0]);
    let mut pow = ident.clone();
    for k in 1..=(m / 2) {
        pow = &pow * &a2;
        u_inner += scaled(&pow, b[2 * k + 1]);
        v += scaled(&pow, b[2 * k]);
    }
    (a * u_inner, v)
}

fn pade13(a: &CMatrix, ident: &CMatrix) -> (CMatrix, CMatrix) {
    let b = pade_coefficients(13);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u =
        a * (&a6 * inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(ident, b[1]));
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(ident, b[0]);
    (u, v)
}

fn solve_pade(u: CMatrix, v: CMatrix) -> CMatrix {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular inside the theta bounds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_zero_is_identity() {
        let z = CMatrix::zeros(4, 4);
        let e = expm(&z);
        assert!((e - CMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_is_entrywise() {
        let d = [C64::new(-3.0, 1.0), C64::new(0.5, -2.0), C64::new(12.0, 0.0)];
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let e = expm(&m);
        for k in 0..3 {
            let want = d[k].exp();
            assert!((e[(k, k)] - want).norm() <= 1e-13 * want.norm());
        }
        assert!(e[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn nilpotent_jordan_block() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        for &a in &[0.001, 0.3, 2.0, 40.0] {
            let m = CMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(a, 0.0),
                    C64::new(1.0, 0.0),
                    C64::default(),
                    C64::new(a, 0.0),
                ],
            );
            let e = expm(&m);
            let ea = a.exp();
            assert!((e[(0, 0)].re - ea).abs() <= 1e-13 * ea);
            assert!((e[(0, 1)].re - ea).abs() <= 1e-12 * ea);
        }
    }

    #[test]
    fn rotation_generator() {
        let th = 2.5_f64;
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::default(),
                C64::new(-th, 0.0),
                C64::new(th, 0.0),
                C64::default(),
            ],
        );
        let e = expm(&m);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-14);
    }
}
