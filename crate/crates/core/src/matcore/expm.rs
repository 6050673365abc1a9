use super::matrix::SquareMatrix;
use crate::scalar::Scalar;

// Padé [6/6] numerator coefficients; the denominator uses alternating signs.
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Matrix exponential by scaling and squaring with a [6/6] Padé approximant.
/// The argument is scaled until its Frobenius norm is at most 1/2.
pub fn expm<T: Scalar>(w: &SquareMatrix<T>) -> SquareMatrix<T> {
    let n = w.dim();
    let norm = w.norm().as_f64();
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let x = w.scale(T::lit(0.5f64.powi(s)));
    let mut num = SquareMatrix::identity(n);
    let mut den = SquareMatrix::identity(n);
    let mut power = SquareMatrix::identity(n);
    for (k, &c) in PADE6.iter().enumerate().skip(1) {
        power = power.matmul(&x);
        num.axpy(T::lit(c), &power);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        den.axpy(T::lit(sign * c), &power);
    }
    let mut r = match den.lu() {
        Some(lu) => lu.solve_matrix(&num),
        None => unreachable!("Padé denominator is nonsingular for ‖X‖ <= 1/2"),
    };
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}
