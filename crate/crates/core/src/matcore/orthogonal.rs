use super::eigen::symmetric_eigen;
use super::expm::expm;
use super::matrix::{canonical_sign, vec_norm, SquareMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Element of O₊(n) or O₋(n), with its determinant class.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix<T> {
    mat: SquareMatrix<T>,
    det_sign: i8,
}

impl<T: Scalar> OrthogonalMatrix<T> {
    /// Validates against the default tolerance of the scalar type.
    pub fn new(mat: SquareMatrix<T>) -> Result<Self> {
        Self::with_tol(mat, T::TOL_ORTH)
    }

    pub fn with_tol(mat: SquareMatrix<T>, tol: f64) -> Result<Self> {
        if mat.dim() < 2 {
            return Err(Error::DimensionTooSmall(mat.dim()));
        }
        let residual = mat.orthogonality_residual().as_f64();
        let det = mat.det().as_f64();
        if !mat.is_finite() || residual > tol || (det.abs() - 1.0).abs() > tol {
            return Err(Error::NotOrthogonal { residual, det });
        }
        let det_sign = if det > 0.0 { 1 } else { -1 };
        Ok(Self { mat, det_sign })
    }

    /// Checks the determinant class as well.
    pub fn with_sign(mat: SquareMatrix<T>, det_sign: i8) -> Result<Self> {
        let q = Self::new(mat)?;
        if q.det_sign != det_sign {
            return Err(Error::WrongDeterminant { expected: det_sign, got: q.det_sign });
        }
        Ok(q)
    }

    /// Wraps a matrix the caller already knows to be orthogonal.
    pub(crate) fn from_trusted(mat: SquareMatrix<T>, det_sign: i8) -> Self {
        Self { mat, det_sign }
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: SquareMatrix::identity(n), det_sign: 1 }
    }

    #[inline]
    pub fn mat(&self) -> &SquareMatrix<T> {
        &self.mat
    }

    pub fn into_mat(self) -> SquareMatrix<T> {
        self.mat
    }

    #[inline]
    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn transpose(&self) -> Self {
        Self { mat: self.mat.transpose(), det_sign: self.det_sign }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { mat: self.mat.matmul(&other.mat), det_sign: self.det_sign * other.det_sign }
    }
}

/// Element of ℙₙ, stored through its unit axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionMatrix<T> {
    axis: Vec<T>,
}

impl<T: Scalar> ReflectionMatrix<T> {
    pub fn new(axis: Vec<T>) -> Result<Self> {
        check_unit(&axis)?;
        Ok(Self { axis })
    }

    pub fn axis(&self) -> &[T] {
        &self.axis
    }

    /// I - 2 axis⊗axis
    pub fn matrix(&self) -> SquareMatrix<T> {
        SquareMatrix::reflection(&self.axis)
    }

    pub fn to_orthogonal(&self) -> OrthogonalMatrix<T> {
        OrthogonalMatrix::from_trusted(self.matrix(), -1)
    }
}

pub(crate) fn check_unit<T: Scalar>(axis: &[T]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::DimensionTooSmall(axis.len()));
    }
    let len = vec_norm(axis).as_f64();
    if !len.is_finite() || (len - 1.0).abs() > T::TOL_ORTH {
        return Err(Error::NonUnitAxis(len));
    }
    Ok(())
}

/// Projection of X onto the tangent space of O(n) at A: A·antisym(AᵀX).
pub fn tangent_project<T: Scalar>(a: &OrthogonalMatrix<T>, x: &SquareMatrix<T>) -> Result<SquareMatrix<T>> {
    a.mat.check_same_dim(x)?;
    Ok(a.mat.matmul(&a.mat.tr_mul(x).antisym()))
}

/// Exponential of an antisymmetric matrix.
pub fn exp_antisym<T: Scalar>(w: &SquareMatrix<T>) -> Result<OrthogonalMatrix<T>> {
    if w.dim() < 2 {
        return Err(Error::DimensionTooSmall(w.dim()));
    }
    let res = w.antisymmetry_residual().as_f64();
    if !w.is_finite() || res > T::TOL_ORTH {
        return Err(Error::NotAntisymmetric(res));
    }
    Ok(OrthogonalMatrix::from_trusted(expm(&w.antisym()), 1))
}

/// One-sided Jacobi SVD: returns (U, σ, V) with M = U diag(σ) Vᵀ, σ unsorted.
fn jacobi_svd<T: Scalar>(m: &SquareMatrix<T>) -> (SquareMatrix<T>, Vec<T>, SquareMatrix<T>) {
    let n = m.dim();
    let mut u = m.clone();
    let mut v = SquareMatrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for k in 0..n {
                    alpha += u[(k, p)] * u[(k, p)];
                    beta += u[(k, q)] * u[(k, q)];
                    gamma += u[(k, p)] * u[(k, q)];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    u[(k, p)] = c * up - s * uq;
                    u[(k, q)] = s * up + c * uq;
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![T::zero(); n];
    for (j, s) in sigma.iter_mut().enumerate() {
        let len = (0..n).map(|k| u[(k, j)] * u[(k, j)]).sum::<T>().sqrt();
        *s = len;
        if len > T::zero() {
            for k in 0..n {
                u[(k, j)] /= len;
            }
        }
    }
    (u, sigma, v)
}

/// Orthogonal polar factor of M, the closest element of O(n) in Frobenius distance.
pub fn nearest_orthogonal<T: Scalar>(m: &SquareMatrix<T>) -> Result<OrthogonalMatrix<T>> {
    if m.dim() < 2 {
        return Err(Error::DimensionTooSmall(m.dim()));
    }
    let norm = m.norm();
    let (u, sigma, v) = jacobi_svd(m);
    let sigma_min = sigma.iter().copied().fold(T::infinity(), T::min);
    if !m.is_finite() || norm == T::zero() || sigma_min <= T::lit(1e-12) * norm {
        return Err(Error::RankDeficient { sigma_min: sigma_min.as_f64(), norm: norm.as_f64() });
    }
    let mut q = u.mul_tr(&v);
    // One Newton–Schulz step removes residual drift from the column normalization.
    let mut corr = q.tr_mul(&q).scale(-T::lit(0.5));
    for i in 0..q.dim() {
        corr[(i, i)] += T::lit(1.5);
    }
    q = q.matmul(&corr);
    let det_sign = if q.det() > T::zero() { 1 } else { -1 };
    Ok(OrthogonalMatrix::from_trusted(q, det_sign))
}

/// Distance of (A₊, A₋) from being a minimal pair, and the extracted axis.
pub fn minimal_pair_residual<T: Scalar>(
    a_plus: &OrthogonalMatrix<T>,
    a_minus: &OrthogonalMatrix<T>,
) -> Result<(T, Vec<T>)> {
    a_plus.mat.check_same_dim(&a_minus.mat)?;
    Ok(pair_residual_raw(a_plus.mat(), a_minus.mat()))
}

pub(crate) fn pair_residual_raw<T: Scalar>(a_plus: &SquareMatrix<T>, a_minus: &SquareMatrix<T>) -> (T, Vec<T>) {
    let n = a_plus.dim();
    let r = a_plus.tr_mul(a_minus);
    let mut s = r.scale(-T::lit(0.5));
    for i in 0..n {
        s[(i, i)] += T::lit(0.5);
    }
    let eig = symmetric_eigen(&s);
    let mut axis = eig.vector(0);
    canonical_sign(&mut axis);
    let residual = r.dist_sq(&SquareMatrix::reflection(&axis)).sqrt();
    (residual, axis)
}
