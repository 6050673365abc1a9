use super::matrix::SquareMatrix;
use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric matrix: `values` sorted descending,
/// `vectors` holds the matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: SquareMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        let n = self.vectors.dim();
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic Jacobi sweeps on the symmetric part of `s`.
pub fn symmetric_eigen<T: Scalar>(s: &SquareMatrix<T>) -> SymmetricEigen<T> {
    let n = s.dim();
    let mut a = s.sym();
    let mut v = SquareMatrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        let scale = a.norm_sq();
        if off <= eps * eps * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = SquareMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    SymmetricEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_symmetric_input() {
        let s = SquareMatrix::from_rows(&[
            &[4.0f64, 1.0, -2.0, 0.5],
            &[1.0, 3.0, 0.0, 1.5],
            &[-2.0, 0.0, 1.0, 0.25],
            &[0.5, 1.5, 0.25, -2.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&s);
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let d = SquareMatrix::diagonal(&e.values);
        let rebuilt = e.vectors.matmul(&d).mul_tr(&e.vectors);
        assert!(rebuilt.dist_sq(&s).sqrt() < 1e-12);
        assert!(e.vectors.orthogonality_residual() < 1e-12);
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let e = symmetric_eigen(&SquareMatrix::diagonal(&[1.0, 3.0, 2.0]));
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
    }
}
