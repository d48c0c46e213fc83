//! Matrix exponential by scaling and squaring with the degree-13 Padé approximant.

use nalgebra::DMatrix;

use crate::model::C64;

const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn scale(m: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
    m * C64::new(s, 0.0)
}

/// `exp(a)` for a square complex matrix.
///
/// # Panics
/// If `a` is not square or the Padé denominator is singular (only possible for
/// non-finite input).
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let a = scale(a, 0.5f64.powi(squarings));

    let b = &PADE_13;
    let ident = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u_poly = &a6 * u_inner + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&ident, b[1]);
    let u = &a * u_poly;

    let v_inner = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v = &a6 * v_inner + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&ident, b[0]);

    let numerator = &v + &u;
    let denominator = v - u;
    let mut r = denominator
        .lu()
        .solve(&numerator)
        .expect("Padé denominator is singular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_gives_identity() {
        let z = DMatrix::<C64>::zeros(5, 5);
        assert_eq!(expm(&z), DMatrix::identity(5, 5));
    }

    #[test]
    fn diagonal_matches_scalar_exponentials() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-3.0, 2.0), c(0.5, 0.0), c(-40.0, -7.0)]));
        let e = expm(&d);
        for i in 0..3 {
            assert!((e[(i, i)] - d[(i, i)].exp()).norm() < 1e-13 * d[(i, i)].exp().norm().max(1.0));
        }
    }

    #[test]
    fn rotation_generator() {
        // exp(-i w t sigma1) = cos(wt) I - i sin(wt) sigma1
        let w = 37.0;
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -w), c(0.0, -w), c(0.0, 0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)] - c(w.cos(), 0.0)).norm() < 1e-12);
        assert!((e[(0, 1)] - c(0.0, -w.sin())).norm() < 1e-12);
    }

    #[test]
    fn nilpotent_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let e = expm(&a);
        let e2 = 2f64.exp();
        assert!((e[(0, 0)].re - e2).abs() < 1e-12 * e2);
        assert!((e[(0, 1)].re - e2).abs() < 1e-12 * e2);
        assert!(e[(1, 0)].norm() < 1e-14);
    }
}
