use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inline storage covers n <= 5 without touching the heap.
type Storage<T> = SmallVec<[T; 25]>;

/// Dense n x n real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Storage<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: SmallVec::from_elem(T::zero(), n * n) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(n: usize, entries: &[T]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        Ok(Self { n, data: SmallVec::from_slice(entries) })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// u ⊗ v, the matrix with entries u_i v_j.
    pub fn outer(u: &[T], v: &[T]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j])
    }

    /// Reflection I - 2 a⊗a.
    pub fn reflection(axis: &[T]) -> Self {
        let two = T::lit(2.0);
        Self::from_fn(axis.len(), |i, j| {
            let d = if i == j { T::one() } else { T::zero() };
            d - two * axis[i] * axis[j]
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    /// (M + M^T) / 2
    pub fn sym(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    /// (M - M^T) / 2
    pub fn antisym(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |i, j| half * (self[(i, j)] - self[(j, i)]))
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product X:Y.
    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.n, other.n);
        let mut acc = T::zero();
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            acc += *a * *b;
        }
        acc
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// ‖self - other‖² without a temporary.
    #[inline]
    pub fn dist_sq(&self, other: &Self) -> T {
        debug_assert_eq!(self.n, other.n);
        let mut acc = T::zero();
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            let d = *a - *b;
            acc += d * d;
        }
        acc
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: T) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    /// self += s * other
    #[inline]
    pub fn axpy(&mut self, s: T, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * *b;
        }
    }

    /// Linear combination (1 - s) * a + s * b.
    pub fn lerp(a: &Self, b: &Self, s: T) -> Self {
        let mut out = a.scale(T::one() - s);
        out.axpy(s, b);
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// self^T * other
    pub fn tr_mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let a = self.data[k * n + i];
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// self * other^T
    pub fn mul_tr(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut acc = T::zero();
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[j * n + k];
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// v^T * self
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|j| (0..self.n).map(|i| v[i] * self[(i, j)]).sum())
            .collect()
    }

    /// ‖M^T M - I‖ (Frobenius).
    pub fn orthogonality_residual(&self) -> T {
        let mut g = self.tr_mul(self);
        for i in 0..self.n {
            g[(i, i)] -= T::one();
        }
        g.norm()
    }

    /// ‖M + M^T‖ (Frobenius).
    pub fn antisymmetry_residual(&self) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let s = self[(i, j)] + self[(j, i)];
                acc += s * s;
            }
        }
        acc.sqrt()
    }

    /// ‖M - M^T‖ (Frobenius).
    pub fn symmetry_residual(&self) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let s = self[(i, j)] - self[(j, i)];
                acc += s * s;
            }
        }
        acc.sqrt()
    }

    /// LU factorization with partial pivoting. Returns None for an exactly singular matrix.
    pub(crate) fn lu(&self) -> Option<Lu<T>> {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                let v = a[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                for j in k + 1..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= f * u;
                }
            }
        }
        Some(Lu { lu: a, perm, sign })
    }

    pub fn det(&self) -> T {
        match self.lu() {
            Some(lu) => {
                let mut d = lu.sign;
                for i in 0..self.n {
                    d *= lu.lu[(i, i)];
                }
                d
            }
            None => T::zero(),
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let lu = self.lu()?;
        Some(lu.solve_matrix(&Self::identity(self.n)))
    }

    pub fn cast<U: Scalar>(&self) -> SquareMatrix<U> {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

pub(crate) struct Lu<T> {
    lu: SquareMatrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Scalar> Lu<T> {
    /// Solves A X = B column by column.
    pub(crate) fn solve_matrix(&self, b: &SquareMatrix<T>) -> SquareMatrix<T> {
        let n = self.lu.n;
        let mut x = SquareMatrix::zeros(n);
        for col in 0..n {
            let mut y: Vec<T> = (0..n).map(|i| b[(self.perm[i], col)]).collect();
            for i in 0..n {
                for k in 0..i {
                    let l = self.lu[(i, k)];
                    y[i] = y[i] - l * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let u = self.lu[(i, k)];
                    y[i] = y[i] - u * y[k];
                }
                y[i] /= self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, col)] = y[i];
            }
        }
        x
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> Add<&SquareMatrix<T>> for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn add(self, rhs: &SquareMatrix<T>) -> SquareMatrix<T> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<T: Scalar> Sub<&SquareMatrix<T>> for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn sub(self, rhs: &SquareMatrix<T>) -> SquareMatrix<T> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<T: Scalar> Mul<&SquareMatrix<T>> for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn mul(self, rhs: &SquareMatrix<T>) -> SquareMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Scalar> Mul<T> for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn mul(self, rhs: T) -> SquareMatrix<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Neg for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn neg(self) -> SquareMatrix<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> AddAssign<&SquareMatrix<T>> for SquareMatrix<T> {
    fn add_assign(&mut self, rhs: &SquareMatrix<T>) {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += *b;
        }
    }
}

impl<T: Scalar> SubAssign<&SquareMatrix<T>> for SquareMatrix<T> {
    fn sub_assign(&mut self, rhs: &SquareMatrix<T>) {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a -= *b;
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for SquareMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SquareMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:?}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Normalizes a vector in place, returning its original length.
pub fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let len = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if len > T::zero() {
        for x in v.iter_mut() {
            *x /= len;
        }
    }
    len
}

pub fn vec_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn vec_norm<T: Scalar>(a: &[T]) -> T {
    vec_dot(a, a).sqrt()
}

/// Sign convention for eigen/axis vectors: first coordinate with magnitude
/// above `tiny` is made positive.
pub fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let tiny = T::lit(1e-12);
    if let Some(first) = v.iter().copied().find(|x| x.abs() > tiny) {
        if first < T::zero() {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse() {
        let m = SquareMatrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]).unwrap();
        assert!((m.det() - 18.0f64).abs() < 1e-12);
        let inv = m.inverse().unwrap();
        let prod = m.matmul(&inv);
        assert!(prod.dist_sq(&SquareMatrix::identity(3)) < 1e-28);
        let singular = SquareMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert_eq!(singular.det(), 0.0);
    }

    #[test]
    fn transposed_products_agree() {
        let a = SquareMatrix::from_fn(3, |i, j| (i * 3 + j) as f64 + 0.5);
        let b = SquareMatrix::from_fn(3, |i, j| (i as f64) - 2.0 * j as f64);
        assert!(a.tr_mul(&b).dist_sq(&a.transpose().matmul(&b)) < 1e-24);
        assert!(a.mul_tr(&b).dist_sq(&a.matmul(&b.transpose())) < 1e-24);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(SquareMatrix::<f64>::from_row_major(2, &[1.0, 2.0, 3.0]).is_err());
        let a = SquareMatrix::<f64>::zeros(2);
        assert!(a.check_same_dim(&SquareMatrix::zeros(3)).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let r = SquareMatrix::<f32>::reflection(&[0.6, 0.8]);
        assert!(r.orthogonality_residual() < 1e-6);
        assert!((r.det() + 1.0).abs() < 1e-6);
    }
}
