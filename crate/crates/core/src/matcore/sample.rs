use rand::Rng;
use rand_distr::StandardNormal;

use super::expm::expm;
use super::matrix::{normalize, SquareMatrix};
use super::orthogonal::{nearest_orthogonal, OrthogonalMatrix};
use crate::scalar::Scalar;

pub fn random_matrix<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> SquareMatrix<T> {
    SquareMatrix::from_fn(n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

pub fn random_symmetric<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> SquareMatrix<T> {
    random_matrix::<T, R>(rng, n).sym()
}

pub fn random_antisym<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> SquareMatrix<T> {
    random_matrix::<T, R>(rng, n).antisym()
}

pub fn random_unit<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
        if normalize(&mut v) > T::lit(1e-6) {
            return v;
        }
    }
}

/// Haar-distributed orthogonal matrix with the requested determinant sign.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, det_sign: i8) -> OrthogonalMatrix<T> {
    loop {
        let m = random_matrix::<T, R>(rng, n);
        if let Ok(q) = nearest_orthogonal(&m) {
            if q.det_sign() == det_sign {
                return q;
            }
            let mut flipped = q.into_mat();
            for i in 0..n {
                flipped[(i, 0)] = -flipped[(i, 0)];
            }
            return OrthogonalMatrix::from_trusted(flipped, det_sign);
        }
    }
}

/// exp of a random antisymmetric matrix scaled to Frobenius norm `scale`.
pub fn random_rotation_near_identity<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> OrthogonalMatrix<T> {
    let w = random_antisym::<T, R>(rng, n);
    let norm = w.norm();
    let w = if norm > T::zero() { w.scale(T::lit(scale) / norm) } else { w };
    OrthogonalMatrix::from_trusted(expm(&w), 1)
}
