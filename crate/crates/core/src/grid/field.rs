use std::sync::Arc;

use super::{Phase, PhaseGrid, TwoPhaseGrid};
use crate::error::{Error, Result};
use crate::matcore::{check_unit, pair_residual_raw, vec_dot, SquareMatrix};
use crate::scalar::Scalar;

/// One matrix per node of one phase.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField<T> {
    pub phase: Phase,
    pub values: Vec<SquareMatrix<T>>,
}

impl<T: Scalar> MatrixField<T> {
    pub fn constant(phase: Phase, len: usize, value: &SquareMatrix<T>) -> Self {
        Self { phase, values: vec![value.clone(); len] }
    }

    /// Largest ‖AᵀA − I‖ over the nodes.
    pub fn max_orthogonality_residual(&self) -> T {
        self.values
            .iter()
            .map(SquareMatrix::orthogonality_residual)
            .fold(T::zero(), T::max)
    }

    /// Σ_edges coef·‖A(b) − A(a)‖² on the given phase grid.
    pub fn dirichlet(&self, grid: &PhaseGrid) -> T {
        let mut acc = T::zero();
        for e in &grid.edges {
            acc += T::lit(e.coef) * self.values[e.b].dist_sq(&self.values[e.a]);
        }
        acc
    }
}

/// Matrix fields on both phases together with the interface axes n(x).
#[derive(Clone, Debug)]
pub struct PairedField<T> {
    grid: Arc<TwoPhaseGrid>,
    n: usize,
    plus: MatrixField<T>,
    minus: MatrixField<T>,
    axes: Vec<Vec<T>>,
}

impl<T: Scalar> PartialEq for PairedField<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.plus == other.plus && self.minus == other.minus && self.axes == other.axes
    }
}

impl<T: Scalar> PairedField<T> {
    /// Assembles a field, checking shapes and the axes' unit length.
    pub fn new(
        grid: Arc<TwoPhaseGrid>,
        plus: Vec<SquareMatrix<T>>,
        minus: Vec<SquareMatrix<T>>,
        axes: Vec<Vec<T>>,
    ) -> Result<Self> {
        let np = grid.phase(Phase::Plus).len();
        let nm = grid.phase(Phase::Minus).len();
        if plus.len() != np {
            return Err(Error::DimensionMismatch { expected: np, got: plus.len() });
        }
        if minus.len() != nm {
            return Err(Error::DimensionMismatch { expected: nm, got: minus.len() });
        }
        if axes.len() != grid.pairs().len() {
            return Err(Error::DimensionMismatch { expected: grid.pairs().len(), got: axes.len() });
        }
        let n = plus.first().map(SquareMatrix::dim).unwrap_or(0);
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        for m in plus.iter().chain(minus.iter()) {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
            }
        }
        for a in &axes {
            if a.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.len() });
            }
            check_unit(a)?;
        }
        Ok(Self {
            grid,
            n,
            plus: MatrixField { phase: Phase::Plus, values: plus },
            minus: MatrixField { phase: Phase::Minus, values: minus },
            axes,
        })
    }

    /// Assembles a field and extracts the interface axes from the pairs.
    pub fn from_values(grid: Arc<TwoPhaseGrid>, plus: Vec<SquareMatrix<T>>, minus: Vec<SquareMatrix<T>>) -> Result<Self> {
        let axes = grid
            .pairs()
            .iter()
            .map(|p| {
                let a = plus.get(p.plus).ok_or(Error::GridMismatch)?;
                let b = minus.get(p.minus).ok_or(Error::GridMismatch)?;
                if a.dim() != b.dim() {
                    return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
                }
                Ok(pair_residual_raw(a, b).1)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, plus, minus, axes)
    }

    pub fn grid(&self) -> &Arc<TwoPhaseGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self, phase: Phase) -> &MatrixField<T> {
        match phase {
            Phase::Plus => &self.plus,
            Phase::Minus => &self.minus,
        }
    }

    pub fn values(&self, phase: Phase) -> &[SquareMatrix<T>] {
        &self.field(phase).values
    }

    pub fn values_mut(&mut self, phase: Phase) -> &mut Vec<SquareMatrix<T>> {
        match phase {
            Phase::Plus => &mut self.plus.values,
            Phase::Minus => &mut self.minus.values,
        }
    }

    pub fn axes(&self) -> &[Vec<T>] {
        &self.axes
    }

    pub fn axes_mut(&mut self) -> &mut Vec<Vec<T>> {
        &mut self.axes
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.geometry() == other.grid.geometry()
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(())
    }

    pub fn max_orthogonality_residual(&self) -> T {
        self.plus.max_orthogonality_residual().max(self.minus.max_orthogonality_residual())
    }

    /// Minimal-pair residual at every interface pair.
    pub fn pair_residuals(&self) -> Vec<T> {
        self.grid
            .pairs()
            .iter()
            .map(|p| pair_residual_raw(&self.plus.values[p.plus], &self.minus.values[p.minus]).0)
            .collect()
    }

    pub fn max_pair_residual(&self) -> T {
        self.pair_residuals().into_iter().fold(T::zero(), T::max)
    }

    /// Checks membership in the discrete admissible set: orthogonal node
    /// values with the phase determinant, and minimal pairs whose extracted
    /// axis agrees with the stored one up to sign.
    pub fn validate(&self, tol_orth: f64, tol_pair: f64) -> Result<()> {
        for phase in Phase::BOTH {
            for m in self.values(phase) {
                let residual = m.orthogonality_residual().as_f64();
                let det = m.det().as_f64();
                if !m.is_finite() || residual > tol_orth || (det.abs() - 1.0).abs() > tol_orth {
                    return Err(Error::NotOrthogonal { residual, det });
                }
                let sign = if det > 0.0 { 1 } else { -1 };
                if sign != phase.det_sign() {
                    return Err(Error::WrongDeterminant { expected: phase.det_sign(), got: sign });
                }
            }
        }
        for (k, p) in self.grid.pairs().iter().enumerate() {
            let (residual, axis) = pair_residual_raw(&self.plus.values[p.plus], &self.minus.values[p.minus]);
            let residual = residual.as_f64();
            if residual > tol_pair {
                return Err(Error::NotMinimalPair { pair: k, residual });
            }
            let align = vec_dot(&axis, &self.axes[k]).abs().as_f64();
            if (align - 1.0).abs() > tol_pair.max(1e-8) {
                return Err(Error::NotMinimalPair { pair: k, residual: 1.0 - align });
            }
        }
        Ok(())
    }

    pub fn dirichlet_phase(&self, phase: Phase) -> T {
        self.field(phase).dirichlet(self.grid.phase(phase))
    }

    /// Replaces each node value by its image under `f`.
    pub fn map_values(&self, mut f: impl FnMut(Phase, usize, &SquareMatrix<T>) -> SquareMatrix<T>) -> Self {
        let mut out = self.clone();
        for phase in Phase::BOTH {
            for (i, v) in out.values_mut(phase).iter_mut().enumerate() {
                *v = f(phase, i, v);
            }
        }
        out
    }

    /// The same field in another precision.
    pub fn cast<U: Scalar>(&self) -> PairedField<U> {
        let conv = |v: &[SquareMatrix<T>]| v.iter().map(SquareMatrix::cast).collect::<Vec<_>>();
        PairedField {
            grid: self.grid.clone(),
            n: self.n,
            plus: MatrixField { phase: Phase::Plus, values: conv(&self.plus.values) },
            minus: MatrixField { phase: Phase::Minus, values: conv(&self.minus.values) },
            axes: self.axes.iter().map(|a| a.iter().map(|x| U::lit(x.as_f64())).collect()).collect(),
        }
    }
}

/// Discrete Dirichlet energy over both phases.
pub fn dirichlet_energy<T: Scalar>(f: &PairedField<T>) -> T {
    f.dirichlet_phase(Phase::Plus) + f.dirichlet_phase(Phase::Minus)
}

/// Volume-weighted squared L² distance over both phases.
pub fn l2_distance_sq<T: Scalar>(f: &PairedField<T>, g: &PairedField<T>) -> Result<T> {
    f.check_compatible(g)?;
    let mut acc = T::zero();
    for phase in Phase::BOTH {
        let nodes = &f.grid.phase(phase).nodes;
        for (i, node) in nodes.iter().enumerate() {
            acc += T::lit(node.volume) * f.values(phase)[i].dist_sq(&g.values(phase)[i]);
        }
    }
    Ok(acc)
}
