//! The one-step energy E_h(V, Ã; A) = Σ_ζ ∫ ‖∇A‖² + h⁻¹‖A − Ã‖² + 2(V·∇Ã):(A − Ã),
//! its gradients, and the discrete Euler–Lagrange and weak-form residuals.

mod library;
mod weak;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, PairedField, Phase};
use crate::matcore::{v4_component, SquareMatrix};
use crate::motion::VelocityField;
use crate::scalar::Scalar;

pub use library::{hat_bump_library, BumpSpec, LibrarySpec, TestField};
pub use weak::{
    interior_weak_formula_residual, weak_neumann_residual, Frame, Slab, SpaceTimeTest, TimeHat, TimePairing,
    WeakFormOptions,
};

/// Per-phase arrays of node matrices, indexed by `Phase::index`.
pub type NodeMatrices<T> = [Vec<SquareMatrix<T>>; 2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown<T> {
    pub dirichlet: T,
    pub proximity: T,
    pub transport: T,
    pub total: T,
}

/// V·∇F at every node, with centered differences in the interior and
/// one-sided differences at the interface and the outer boundary.
pub fn directional_derivative<T: Scalar>(field: &PairedField<T>, v: &VelocityField) -> NodeMatrices<T> {
    let grid = field.grid().clone();
    let mut out: NodeMatrices<T> = [Vec::new(), Vec::new()];
    for phase in Phase::BOTH {
        let pg = grid.phase(phase);
        let values = field.values(phase);
        let vel = v.phase(phase);
        out[phase.index()] = pg
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let mut acc = SquareMatrix::zeros(field.n());
                for axis in 0..grid.dim() {
                    let dir = node.axes[axis];
                    let comp = vel[i][0] * dir[0] + vel[i][1] * dir[1];
                    if comp == 0.0 {
                        continue;
                    }
                    let st = node.stencil[axis];
                    let (hi, lo, dist) = match (st.prev, st.next) {
                        (Some(p), Some(n)) => (n, p, st.h_prev + st.h_next),
                        (None, Some(n)) => (n, i, st.h_next),
                        (Some(p), None) => (i, p, st.h_prev),
                        (None, None) => continue,
                    };
                    let s = T::lit(comp / dist);
                    acc.axpy(s, &values[hi]);
                    acc.axpy(-s, &values[lo]);
                }
                acc
            })
            .collect();
    }
    out
}

/// Everything about E_h(V, Ã; ·) that does not depend on the argument.
#[derive(Clone, Debug)]
pub struct EnergyContext<T> {
    atilde: PairedField<T>,
    vgrad: Option<NodeMatrices<T>>,
    h: T,
}

impl<T: Scalar> EnergyContext<T> {
    pub fn new(atilde: &PairedField<T>, v: Option<&VelocityField>, h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameter { name: "h", reason: "time step must be positive".into() });
        }
        let vgrad = match v {
            Some(v) => {
                for phase in Phase::BOTH {
                    if v.phase(phase).len() != atilde.values(phase).len() {
                        return Err(Error::GridMismatch);
                    }
                }
                Some(directional_derivative(atilde, v))
            }
            None => None,
        };
        Ok(Self { atilde: atilde.clone(), vgrad, h })
    }

    pub fn atilde(&self) -> &PairedField<T> {
        &self.atilde
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn has_transport(&self) -> bool {
        self.vgrad.is_some()
    }

    /// V·∇Ã per node, if a velocity is present.
    pub fn transport_field(&self) -> Option<&NodeMatrices<T>> {
        self.vgrad.as_ref()
    }

    pub fn energy(&self, a: &PairedField<T>) -> Result<EnergyBreakdown<T>> {
        a.check_compatible(&self.atilde)?;
        let grid = a.grid();
        let dirichlet = dirichlet_energy(a);
        let mut prox = T::zero();
        let mut transport = T::zero();
        for phase in Phase::BOTH {
            let nodes = &grid.phase(phase).nodes;
            let (av, tv) = (a.values(phase), self.atilde.values(phase));
            for (i, node) in nodes.iter().enumerate() {
                let w = T::lit(node.volume);
                prox += w * av[i].dist_sq(&tv[i]);
                if let Some(vg) = &self.vgrad {
                    transport += w * (vg[phase.index()][i].dot(&av[i]) - vg[phase.index()][i].dot(&tv[i]));
                }
            }
        }
        let proximity = prox / self.h;
        let transport = T::lit(2.0) * transport;
        Ok(EnergyBreakdown { dirichlet, proximity, transport, total: dirichlet + proximity + transport })
    }

    /// E(new) − E(old), assembled from local differences so that tiny
    /// changes are resolved well below the rounding level of E itself.
    pub fn energy_difference(&self, old: &PairedField<T>, new: &PairedField<T>) -> T {
        let grid = old.grid();
        let mut edge = T::zero();
        let mut prox = T::zero();
        let mut transport = T::zero();
        for phase in Phase::BOTH {
            let pg = grid.phase(phase);
            let (o, nw, tv) = (old.values(phase), new.values(phase), self.atilde.values(phase));
            let n = old.n();
            for e in &pg.edges {
                let mut acc = T::zero();
                for k in 0..n * n {
                    let ob = o[e.b].as_slice()[k];
                    let oa = o[e.a].as_slice()[k];
                    let nb = nw[e.b].as_slice()[k];
                    let na = nw[e.a].as_slice()[k];
                    let diff = (nb - ob) - (na - oa);
                    let sum = (nb - na) + (ob - oa);
                    acc += diff * sum;
                }
                edge += T::lit(e.coef) * acc;
            }
            for (i, node) in pg.nodes.iter().enumerate() {
                let w = T::lit(node.volume);
                let mut acc = T::zero();
                let mut lin = T::zero();
                for k in 0..n * n {
                    let d = nw[i].as_slice()[k] - o[i].as_slice()[k];
                    let s = nw[i].as_slice()[k] + o[i].as_slice()[k] - T::lit(2.0) * tv[i].as_slice()[k];
                    acc += d * s;
                    if let Some(vg) = &self.vgrad {
                        lin += vg[phase.index()][i].as_slice()[k] * d;
                    }
                }
                prox += w * acc;
                transport += w * lin;
            }
        }
        edge + prox / self.h + T::lit(2.0) * transport
    }

    /// ∂E/∂A at every node (Euclidean, entrywise).
    pub fn euclidean_gradient(&self, a: &PairedField<T>) -> NodeMatrices<T> {
        let grid = a.grid();
        let two = T::lit(2.0);
        let mut out: NodeMatrices<T> = [Vec::new(), Vec::new()];
        for phase in Phase::BOTH {
            let pg = grid.phase(phase);
            let (av, tv) = (a.values(phase), self.atilde.values(phase));
            let mut g: Vec<SquareMatrix<T>> = pg
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| {
                    let w = T::lit(node.volume);
                    let mut gi = &av[i] - &tv[i];
                    gi.scale_mut(two * w / self.h);
                    if let Some(vg) = &self.vgrad {
                        gi.axpy(two * w, &vg[phase.index()][i]);
                    }
                    gi
                })
                .collect();
            for e in &pg.edges {
                let d = (&av[e.b] - &av[e.a]).scale(two * T::lit(e.coef));
                g[e.b] += &d;
                g[e.a] -= &d;
            }
            out[phase.index()] = g;
        }
        out
    }

    /// antisym(AᵀE) per node, before any interface projection. Pairing with
    /// an antisymmetric W-field gives d/dε E(A·exp(εW)) at ε = 0.
    pub fn raw_riemannian_gradient(&self, a: &PairedField<T>) -> NodeMatrices<T> {
        let e = self.euclidean_gradient(a);
        let mut out: NodeMatrices<T> = [Vec::new(), Vec::new()];
        for phase in Phase::BOTH {
            out[phase.index()] = a
                .values(phase)
                .iter()
                .zip(&e[phase.index()])
                .map(|(ai, ei)| ai.tr_mul(ei).antisym())
                .collect();
        }
        out
    }
}

pub fn energy<T: Scalar>(
    a: &PairedField<T>,
    atilde: &PairedField<T>,
    v: Option<&VelocityField>,
    h: T,
) -> Result<EnergyBreakdown<T>> {
    EnergyContext::new(atilde, v, h)?.energy(a)
}

/// Splits the pair difference so that it has no V4 component, moving both
/// sides by the same amount.
pub fn admissible_direction_project<T: Scalar>(
    w_plus: &SquareMatrix<T>,
    w_minus: &SquareMatrix<T>,
    axis: &[T],
) -> (SquareMatrix<T>, SquareMatrix<T>) {
    let half = v4_component(&(w_plus - w_minus), axis).scale(T::lit(0.5));
    (w_plus - &half, w_minus + &half)
}

fn check_manifold<T: Scalar>(a: &PairedField<T>) -> Result<()> {
    let tol = T::TOL_ORTH.max(1e-8);
    for phase in Phase::BOTH {
        for m in a.values(phase) {
            let residual = m.orthogonality_residual().as_f64();
            if !(residual <= tol) {
                return Err(Error::NotOrthogonal { residual, det: m.det().as_f64() });
            }
        }
    }
    Ok(())
}

/// Riemannian gradient with the interface pairs projected onto the
/// admissible variations (W₊ − W₋ ⊥ V4 for the stored axis).
pub fn riemannian_gradient<T: Scalar>(
    a: &PairedField<T>,
    atilde: &PairedField<T>,
    v: Option<&VelocityField>,
    h: T,
) -> Result<NodeMatrices<T>> {
    check_manifold(a)?;
    let ctx = EnergyContext::new(atilde, v, h)?;
    a.check_compatible(atilde)?;
    let mut g = ctx.raw_riemannian_gradient(a);
    for (k, pair) in a.grid().pairs().iter().enumerate() {
        let (p, m) = admissible_direction_project(&g[0][pair.plus], &g[1][pair.minus], &a.axes()[k]);
        g[0][pair.plus] = p;
        g[1][pair.minus] = m;
    }
    Ok(g)
}

/// Terms of the Euler–Lagrange form for one test field, with the Dirichlet
/// part split as ∇A:(∇A·W̄) + ∇A:(Ā·∇W) per edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ElTerms<T> {
    pub gradient_cancelling: T,
    pub gradient_main: T,
    pub proximity: T,
    pub transport: T,
}

impl<T: Scalar> ElTerms<T> {
    pub fn total(&self) -> T {
        self.gradient_cancelling + self.gradient_main + self.proximity + self.transport
    }
}

/// Result of an Euler–Lagrange residual evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ElReport<T> {
    /// max over tests of |form(W)| / ‖W‖_{L²}
    pub residual: T,
    /// Interface pairs skipped because the pair itself is far from minimal.
    pub skipped_pairs: usize,
}

/// Pair-residual level above which admissibility is not checked.
const PAIR_SKIP: f64 = 1e-8;

/// Assembles Σ_ζ ∫ ∇A:∇(AW) + h⁻¹(A − Ã):(AW) + (V·∇Ã):(AW) for one test.
pub fn el_form_terms<T: Scalar>(ctx: &EnergyContext<T>, a: &PairedField<T>, test: &TestField<T>) -> ElTerms<T> {
    let grid = a.grid();
    let n = a.n();
    let mut terms = ElTerms::default();
    let dense = test.dense(a);
    let half = T::lit(0.5);
    for phase in Phase::BOTH {
        let pg = grid.phase(phase);
        let av = a.values(phase);
        let w = &dense[phase.index()];
        let zero = SquareMatrix::zeros(n);
        let get = |i: usize| w[i].as_ref().unwrap_or(&zero);
        for e in &pg.edges {
            let (wa, wb) = (get(e.a), get(e.b));
            if w[e.a].is_none() && w[e.b].is_none() {
                continue;
            }
            let da = &av[e.b] - &av[e.a];
            let wbar = (wa + wb).scale(half);
            let abar = (&av[e.a] + &av[e.b]).scale(half);
            let dw = wb - wa;
            let c = T::lit(e.coef);
            terms.gradient_cancelling += c * da.dot(&da.matmul(&wbar));
            terms.gradient_main += c * da.dot(&abar.matmul(&dw));
        }
        let tv = ctx.atilde.values(phase);
        for (i, node) in pg.nodes.iter().enumerate() {
            let Some(wi) = &w[i] else { continue };
            let aw = av[i].matmul(wi);
            let vol = T::lit(node.volume);
            terms.proximity += vol * (&av[i] - &tv[i]).dot(&aw) / ctx.h;
            if let Some(vg) = &ctx.vgrad {
                terms.transport += vol * vg[phase.index()][i].dot(&aw);
            }
        }
    }
    terms
}

/// max over the tests of the normalized Euler–Lagrange form.
pub fn euler_lagrange_residual<T: Scalar>(
    a: &PairedField<T>,
    atilde: &PairedField<T>,
    v: Option<&VelocityField>,
    h: T,
    tests: &[TestField<T>],
) -> Result<ElReport<T>> {
    a.check_compatible(atilde)?;
    let ctx = EnergyContext::new(atilde, v, h)?;
    let pair_res = a.pair_residuals();
    let skipped_pairs = pair_res.iter().filter(|r| r.as_f64() > PAIR_SKIP).count();
    let raw = ctx.raw_riemannian_gradient(a);
    let mut worst = T::zero();
    for test in tests {
        test.check_admissible(a, &pair_res, PAIR_SKIP)?;
        let norm = test.l2_norm(a);
        if norm == T::zero() {
            return Err(Error::InvalidParameter { name: "test", reason: "zero test field".into() });
        }
        // ½ Σ ⟨antisym(AᵀE), W⟩ equals the assembled form.
        let mut form = T::zero();
        for (phase, i, w) in &test.entries {
            form += raw[phase.index()][*i].dot(w);
        }
        worst = worst.max((T::lit(0.5) * form).abs() / norm);
    }
    Ok(ElReport { residual: worst, skipped_pairs })
}
