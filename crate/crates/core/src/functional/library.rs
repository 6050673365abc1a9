use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, PairedField, Phase, TwoPhaseGrid};
use crate::matcore::{v4_component, SquareMatrix};
use crate::scalar::Scalar;

use super::admissible_direction_project;

/// Sparse antisymmetric test field W: (phase, node, W(node)).
#[derive(Clone, Debug, PartialEq)]
pub struct TestField<T> {
    pub entries: Vec<(Phase, usize, SquareMatrix<T>)>,
}

impl<T: Scalar> TestField<T> {
    pub fn dense(&self, a: &PairedField<T>) -> [Vec<Option<SquareMatrix<T>>>; 2] {
        let grid = a.grid();
        let mut out = [vec![None; grid.phase(Phase::Plus).len()], vec![None; grid.phase(Phase::Minus).len()]];
        for (phase, i, w) in &self.entries {
            out[phase.index()][*i] = Some(w.clone());
        }
        out
    }

    /// (Σ vol ‖W‖²)^½
    pub fn l2_norm(&self, a: &PairedField<T>) -> T {
        let grid = a.grid();
        let mut acc = T::zero();
        for (phase, i, w) in &self.entries {
            acc += T::lit(grid.phase(*phase).nodes[*i].volume) * w.norm_sq();
        }
        acc.sqrt()
    }

    /// Errors if some interface pair sees W₊ − W₋ with a V4 part. Pairs whose
    /// own residual exceeds `skip` are not inspected.
    pub fn check_admissible(&self, a: &PairedField<T>, pair_residuals: &[T], skip: f64) -> Result<()> {
        let dense = self.dense(a);
        let zero = SquareMatrix::zeros(a.n());
        for (k, pair) in a.grid().pairs().iter().enumerate() {
            if pair_residuals[k].as_f64() > skip {
                continue;
            }
            let wp = dense[0][pair.plus].as_ref().unwrap_or(&zero);
            let wm = dense[1][pair.minus].as_ref().unwrap_or(&zero);
            let component = v4_component(&(wp - wm), &a.axes()[k]).norm().as_f64();
            if component > 1e-10 {
                return Err(Error::InadmissibleTest { pair: k, component });
            }
        }
        Ok(())
    }
}

/// A tensor-product hat φ(x) = Π_d (1 − |x_d − c_d|/radius)₊ times the
/// antisymmetric basis element E_ij − E_ji.
///
/// With `jump` the minus side carries −φB and the pair differences are then
/// projected to be admissible; otherwise both sides carry φB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub basis: (usize, usize),
    pub jump: bool,
}

impl BumpSpec {
    pub fn weight(&self, dim: usize, pos: [f64; 2]) -> f64 {
        (0..dim).map(|d| (1.0 - (pos[d] - self.center[d]).abs() / self.radius).max(0.0)).product()
    }

    fn basis_matrix<T: Scalar>(&self, n: usize) -> SquareMatrix<T> {
        let (i, j) = self.basis;
        let mut b = SquareMatrix::zeros(n);
        b[(i, j)] = T::one();
        b[(j, i)] = -T::one();
        b
    }

    /// The continuous-across-the-interface scalar profile on `grid`.
    pub fn weights(&self, grid: &TwoPhaseGrid) -> [Vec<f64>; 2] {
        let dim = grid.dim();
        Phase::BOTH.map(|p| grid.phase(p).nodes.iter().map(|n| self.weight(dim, n.pos)).collect())
    }

    pub fn on_field<T: Scalar>(&self, a: &PairedField<T>) -> TestField<T> {
        let grid = a.grid();
        let b = self.basis_matrix::<T>(a.n());
        let w = self.weights(grid);
        let mut dense: [Vec<Option<SquareMatrix<T>>>; 2] = [vec![None; w[0].len()], vec![None; w[1].len()]];
        for phase in Phase::BOTH {
            let sign = if self.jump && phase == Phase::Minus { -T::one() } else { T::one() };
            for (i, &phi) in w[phase.index()].iter().enumerate() {
                if phi > 0.0 {
                    dense[phase.index()][i] = Some(b.scale(sign * T::lit(phi)));
                }
            }
        }
        if self.jump {
            let zero = SquareMatrix::zeros(a.n());
            for (k, pair) in grid.pairs().iter().enumerate() {
                let wp = dense[0][pair.plus].clone().unwrap_or_else(|| zero.clone());
                let wm = dense[1][pair.minus].clone().unwrap_or_else(|| zero.clone());
                if wp.max_abs() == T::zero() && wm.max_abs() == T::zero() {
                    continue;
                }
                let (p, m) = admissible_direction_project(&wp, &wm, &a.axes()[k]);
                dense[0][pair.plus] = Some(p);
                dense[1][pair.minus] = Some(m);
            }
        }
        let mut entries = Vec::new();
        for phase in Phase::BOTH {
            for (i, w) in dense[phase.index()].iter().enumerate() {
                if let Some(w) = w {
                    entries.push((phase, i, w.clone()));
                }
            }
        }
        TestField { entries }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibrarySpec {
    /// Bump centers per coordinate direction.
    pub per_axis: usize,
    /// Support radius in units of the center spacing.
    pub radius_factor: f64,
    /// Add the interface-jumping variant of every bump.
    pub jumps: bool,
}

impl Default for LibrarySpec {
    fn default() -> Self {
        Self { per_axis: 3, radius_factor: 1.0, jumps: true }
    }
}

impl LibrarySpec {
    /// Bump specifications for `geometry` and matrix size `n`.
    pub fn bumps(&self, geometry: &Geometry, n: usize) -> Vec<BumpSpec> {
        let half = match geometry {
            Geometry::FlatBox { .. } => 1.0,
            Geometry::PolarDisk { r_outer, .. } => *r_outer,
        };
        let dim = geometry.dim();
        let spacing = 2.0 * half / (self.per_axis as f64 + 1.0);
        let coords: Vec<f64> = (1..=self.per_axis).map(|k| -half + k as f64 * spacing).collect();
        let centers: Vec<[f64; 2]> = if dim == 1 {
            coords.iter().map(|&x| [x, 0.0]).collect()
        } else {
            coords.iter().flat_map(|&x| coords.iter().map(move |&y| [x, y])).collect()
        };
        let mut out = Vec::new();
        for c in centers {
            for i in 0..n {
                for j in i + 1..n {
                    for jump in [false, true] {
                        if jump && !self.jumps {
                            continue;
                        }
                        out.push(BumpSpec { center: c, radius: self.radius_factor * spacing, basis: (i, j), jump });
                    }
                }
            }
        }
        out
    }
}

/// Hat-bump test fields with nonempty support on the grid of `a`.
pub fn hat_bump_library<T: Scalar>(a: &PairedField<T>, spec: &LibrarySpec) -> Vec<TestField<T>> {
    spec.bumps(a.grid().geometry(), a.n())
        .iter()
        .map(|b| b.on_field(a))
        .filter(|t| t.entries.iter().any(|(_, _, w)| w.max_abs() > T::zero()))
        .collect()
}
