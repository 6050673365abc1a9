use super::matrix::SquareMatrix;
use super::orthogonal::check_unit;
use crate::error::Result;
use crate::scalar::Scalar;

/// The five mutually orthogonal components of a matrix relative to an axis n:
/// v1 spans n⊗n, v2/v3 the symmetric/antisymmetric mixed n–ℓ parts,
/// v4/v5 the antisymmetric/symmetric parts on the complement of n.
#[derive(Clone, Debug)]
pub struct VSplit<T> {
    pub axis: Vec<T>,
    pub parts: [SquareMatrix<T>; 5],
}

impl<T: Scalar> VSplit<T> {
    pub fn v(&self, k: usize) -> &SquareMatrix<T> {
        &self.parts[k - 1]
    }

    pub fn reconstruct(&self) -> SquareMatrix<T> {
        let mut out = self.parts[0].clone();
        for p in &self.parts[1..] {
            out += p;
        }
        out
    }
}

/// Dimensions of V1..V5 for matrices of size n.
pub fn v_dimensions(n: usize) -> [usize; 5] {
    [1, n - 1, n - 1, (n - 1) * (n - 2) / 2, n * (n - 1) / 2]
}

pub fn v_decompose<T: Scalar>(m: &SquareMatrix<T>, axis: &[T]) -> Result<VSplit<T>> {
    check_unit(axis)?;
    if axis.len() != m.dim() {
        return Err(crate::Error::DimensionMismatch { expected: m.dim(), got: axis.len() });
    }
    Ok(split_unchecked(m, axis))
}

fn split_unchecked<T: Scalar>(m: &SquareMatrix<T>, axis: &[T]) -> VSplit<T> {
    let n = m.dim();
    let p = SquareMatrix::outer(axis, axis);
    let mut q = p.scale(-T::one());
    for i in 0..n {
        q[(i, i)] += T::one();
    }
    let pm = p.matmul(m);
    let qm = q.matmul(m);
    let v1 = pm.matmul(&p);
    let mut mixed = pm.matmul(&q);
    mixed += &qm.matmul(&p);
    let block = qm.matmul(&q);
    VSplit {
        axis: axis.to_vec(),
        parts: [v1, mixed.sym(), mixed.antisym(), block.antisym(), block.sym()],
    }
}

/// The V4 component of M for the given axis.
pub fn v4_component<T: Scalar>(m: &SquareMatrix<T>, axis: &[T]) -> SquareMatrix<T> {
    let n = m.dim();
    let mut q = SquareMatrix::outer(axis, axis).scale(-T::one());
    for i in 0..n {
        q[(i, i)] += T::one();
    }
    q.matmul(m).matmul(&q).antisym()
}

/// W minus its V4 component; for antisymmetric W this is the V3 part.
pub fn project_v4_complement<T: Scalar>(w: &SquareMatrix<T>, axis: &[T]) -> Result<SquareMatrix<T>> {
    check_unit(axis)?;
    if axis.len() != w.dim() {
        return Err(crate::Error::DimensionMismatch { expected: w.dim(), got: axis.len() });
    }
    let res = w.antisymmetry_residual().as_f64();
    if res > T::TOL_ORTH * (1.0 + w.norm().as_f64()) {
        return Err(crate::Error::NotAntisymmetric(res));
    }
    Ok(w - &v4_component(w, axis))
}

/// Orthonormal frame whose first column is `axis`, completed by a Householder
/// reflection pivoted on the largest axis coordinate (first index on ties).
pub fn complete_frame<T: Scalar>(axis: &[T]) -> SquareMatrix<T> {
    let n = axis.len();
    let mut k = 0;
    for i in 1..n {
        if axis[i].abs() > axis[k].abs() {
            k = i;
        }
    }
    let sign = if axis[k] >= T::zero() { T::one() } else { -T::one() };
    let mut u = axis.to_vec();
    u[k] += sign;
    let uu: T = u.iter().map(|x| *x * *x).sum();
    let two = T::lit(2.0);
    let h = SquareMatrix::from_fn(n, |i, j| {
        let d = if i == j { T::one() } else { T::zero() };
        d - two * u[i] * u[j] / uu
    });
    let mut frame = SquareMatrix::zeros(n);
    for i in 0..n {
        frame[(i, 0)] = axis[i];
    }
    let mut col = 1;
    for j in 0..n {
        if j == k {
            continue;
        }
        for i in 0..n {
            frame[(i, col)] = h[(i, j)];
        }
        col += 1;
    }
    frame
}

/// Orthonormal basis (Frobenius) of V_k, k in 1..=5, built on the completed frame.
pub fn v_basis<T: Scalar>(k: usize, axis: &[T]) -> Result<Vec<SquareMatrix<T>>> {
    check_unit(axis)?;
    let n = axis.len();
    let f = complete_frame(axis);
    let col = |j: usize| -> Vec<T> { (0..n).map(|i| f[(i, j)]).collect() };
    let r = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let e0 = col(0);
    let mut out = Vec::new();
    match k {
        1 => out.push(SquareMatrix::outer(&e0, &e0)),
        2 | 3 => {
            for j in 1..n {
                let l = col(j);
                let a = SquareMatrix::outer(&e0, &l);
                let b = SquareMatrix::outer(&l, &e0);
                out.push(if k == 2 { (&a + &b).scale(r) } else { (&a - &b).scale(r) });
            }
        }
        4 | 5 => {
            for i in 1..n {
                for j in i..n {
                    let (li, lj) = (col(i), col(j));
                    if i == j {
                        if k == 5 {
                            out.push(SquareMatrix::outer(&li, &li));
                        }
                        continue;
                    }
                    let a = SquareMatrix::outer(&li, &lj);
                    let b = SquareMatrix::outer(&lj, &li);
                    out.push(if k == 5 { (&a + &b).scale(r) } else { (&a - &b).scale(r) });
                }
            }
        }
        _ => {
            return Err(crate::Error::InvalidParameter {
                name: "k",
                reason: format!("subspace index {k} not in 1..=5"),
            })
        }
    }
    Ok(out)
}

/// Dimension of V_k measured as the trace of its projector on 𝕄ₙ.
pub fn projector_trace<T: Scalar>(k: usize, axis: &[T]) -> Result<T> {
    check_unit(axis)?;
    let n = axis.len();
    let mut tr = T::zero();
    for i in 0..n {
        for j in 0..n {
            let mut e = SquareMatrix::zeros(n);
            e[(i, j)] = T::one();
            let s = split_unchecked(&e, axis);
            tr += s.parts[k - 1][(i, j)];
        }
    }
    Ok(tr)
}
