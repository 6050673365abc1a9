//! One minimizing-movement step: minimize E_h(V, Ã; ·) over orthogonal node
//! values with exact reflection pairs on the interface.
//!
//! Interface pairs are parameterized by (A₊, n) with A₋ = A₊(I − 2n⊗n), so
//! every iterate is a minimal pair by construction.

use serde::Serialize;

use crate::descent::{minimize, DescentProblem};
use crate::error::{Error, Result};
use crate::functional::{EnergyBreakdown, EnergyContext};
use crate::grid::{PairedField, Phase};
use crate::matcore::{expm, nearest_orthogonal, normalize, vec_dot, SquareMatrix};
use crate::motion::VelocityField;
use crate::scalar::Scalar;

pub use crate::descent::StepConfig;

/// Warm starts must satisfy the constraints to this level (or to the
/// precision's own orthogonality tolerance, if looser).
pub const FEASIBLE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct StepResult<T> {
    #[serde(skip)]
    pub field: PairedField<T>,
    pub iterations: usize,
    pub final_grad_norm: T,
    pub energy_before: EnergyBreakdown<T>,
    pub energy_after: EnergyBreakdown<T>,
    /// At least one line search accepted a step.
    pub descent_accepted: bool,
    pub converged: bool,
}

struct Layout {
    n: usize,
    offsets: [usize; 2],
    axes: usize,
    /// Minus node → pair index, for nodes that are slaved to their partner.
    slaved: Vec<Option<usize>>,
    /// Plus node → pair index.
    paired_plus: Vec<Option<usize>>,
}

impl Layout {
    fn node(&self, phase: Phase, i: usize) -> usize {
        self.offsets[phase.index()] + i * self.n * self.n
    }

    fn axis(&self, k: usize) -> usize {
        self.axes + k * self.n
    }
}

pub(crate) struct StepProblem<T> {
    ctx: EnergyContext<T>,
    layout: Layout,
    metric: Vec<T>,
    /// Diagonal of the preconditioner, 1 + h·(edge stiffness)/(node weight).
    stiffness: Vec<T>,
}

impl<T: Scalar> StepProblem<T> {
    pub(crate) fn new(ctx: EnergyContext<T>) -> Self {
        let field = ctx.atilde();
        let grid = field.grid().clone();
        let n = field.n();
        let nn = n * n;
        let np = grid.phase(Phase::Plus).len();
        let nm = grid.phase(Phase::Minus).len();
        let mut slaved = vec![None; nm];
        let mut paired_plus = vec![None; np];
        for (k, p) in grid.pairs().iter().enumerate() {
            slaved[p.minus] = Some(k);
            paired_plus[p.plus] = Some(k);
        }
        let layout = Layout { n, offsets: [0, np * nn], axes: (np + nm) * nn, slaved, paired_plus };
        let mut metric = vec![T::zero(); layout.axes + grid.pairs().len() * n];
        for phase in Phase::BOTH {
            for (i, node) in grid.phase(phase).nodes.iter().enumerate() {
                let w = match phase {
                    Phase::Minus if layout.slaved[i].is_some() => 0.0,
                    Phase::Plus => match layout.paired_plus[i] {
                        Some(k) => node.volume + grid.phase(Phase::Minus).nodes[grid.pairs()[k].minus].volume,
                        None => node.volume,
                    },
                    Phase::Minus => node.volume,
                };
                let o = layout.node(phase, i);
                metric[o..o + nn].fill(T::lit(w));
            }
        }
        for (k, p) in grid.pairs().iter().enumerate() {
            let w = 8.0 * grid.phase(Phase::Minus).nodes[p.minus].volume;
            let o = layout.axis(k);
            metric[o..o + n].fill(T::lit(w));
        }
        let h = ctx.h().as_f64();
        let mut stiff = [vec![0.0; np], vec![0.0; nm]];
        for phase in Phase::BOTH {
            for e in &grid.phase(phase).edges {
                stiff[phase.index()][e.a] += e.coef;
                stiff[phase.index()][e.b] += e.coef;
            }
        }
        let mut stiffness = vec![T::one(); metric.len()];
        for phase in Phase::BOTH {
            for (i, node) in grid.phase(phase).nodes.iter().enumerate() {
                let (c, w) = match (phase, layout.paired_plus[i.min(np - 1)]) {
                    (Phase::Minus, _) if layout.slaved[i].is_some() => continue,
                    (Phase::Plus, Some(k)) => {
                        let q = grid.pairs()[k].minus;
                        (stiff[0][i] + stiff[1][q], node.volume + grid.phase(Phase::Minus).nodes[q].volume)
                    }
                    _ => (stiff[phase.index()][i], node.volume),
                };
                let o = layout.node(phase, i);
                stiffness[o..o + nn].fill(T::lit(1.0 + h * c / w));
            }
        }
        for (k, p) in grid.pairs().iter().enumerate() {
            let o = layout.axis(k);
            let val = 1.0 + h * stiff[1][p.minus] / grid.phase(Phase::Minus).nodes[p.minus].volume;
            stiffness[o..o + n].fill(T::lit(val));
        }
        Self { ctx, layout, metric, stiffness }
    }

    /// Rebuilds every slaved minus value from its partner and axis.
    fn enforce_pairs(&self, x: &mut PairedField<T>) {
        let pairs = x.grid().pairs().to_vec();
        for (k, p) in pairs.iter().enumerate() {
            let r = SquareMatrix::reflection(&x.axes()[k]);
            let v = x.values(Phase::Plus)[p.plus].matmul(&r);
            x.values_mut(Phase::Minus)[p.minus] = v;
        }
    }

    pub(crate) fn grad_norm(&self, g: &[T]) -> T {
        let mut acc = T::zero();
        for (w, gi) in self.metric.iter().zip(g) {
            acc += *w * *gi * *gi;
        }
        acc.sqrt()
    }
}

impl<T: Scalar> DescentProblem<T> for StepProblem<T> {
    type Point = PairedField<T>;

    fn metric(&self) -> &[T] {
        &self.metric
    }

    fn energy(&self, x: &PairedField<T>) -> T {
        self.ctx.energy(x).map(|e| e.total).unwrap_or(T::infinity())
    }

    fn energy_difference(&self, old: &PairedField<T>, new: &PairedField<T>) -> T {
        self.ctx.energy_difference(old, new)
    }

    fn gradient(&self, x: &PairedField<T>) -> Vec<T> {
        let e = self.ctx.euclidean_gradient(x);
        let grid = x.grid();
        let n = self.layout.n;
        let nn = n * n;
        let mut out = vec![T::zero(); self.metric.len()];
        for phase in Phase::BOTH {
            for (i, a) in x.values(phase).iter().enumerate() {
                if phase == Phase::Minus && self.layout.slaved[i].is_some() {
                    continue;
                }
                let mut m = e[phase.index()][i].clone();
                if phase == Phase::Plus {
                    if let Some(k) = self.layout.paired_plus[i] {
                        let q = grid.pairs()[k].minus;
                        m += &e[1][q].matmul(&SquareMatrix::reflection(&x.axes()[k]));
                    }
                }
                let o = self.layout.node(phase, i);
                let g = a.tr_mul(&m).antisym();
                let w = self.metric[o];
                for (dst, src) in out[o..o + nn].iter_mut().zip(g.as_slice()) {
                    *dst = *src / w;
                }
            }
        }
        for (k, p) in grid.pairs().iter().enumerate() {
            let axis = &x.axes()[k];
            let s = x.values(Phase::Plus)[p.plus].tr_mul(&e[1][p.minus]);
            let sym = &s + &s.transpose();
            let mut g: Vec<T> = sym.mul_vec(axis).into_iter().map(|v| -T::lit(2.0) * v).collect();
            let along = vec_dot(&g, axis);
            for (gi, ai) in g.iter_mut().zip(axis) {
                *gi -= along * *ai;
            }
            let o = self.layout.axis(k);
            let w = self.metric[o];
            for (dst, src) in out[o..o + n].iter_mut().zip(&g) {
                *dst = *src / w;
            }
        }
        out
    }

    fn retract(&self, x: &PairedField<T>, dir: &[T], tau: T) -> PairedField<T> {
        let n = self.layout.n;
        let nn = n * n;
        let mut y = x.clone();
        for phase in Phase::BOTH {
            let values = y.values_mut(phase);
            for (i, a) in values.iter_mut().enumerate() {
                if phase == Phase::Minus && self.layout.slaved[i].is_some() {
                    continue;
                }
                let o = self.layout.node(phase, i);
                let d = &dir[o..o + nn];
                if d.iter().all(|v| *v == T::zero()) {
                    continue;
                }
                let w = SquareMatrix::from_fn(n, |r, c| -tau * d[r * n + c]);
                *a = a.matmul(&expm(&w));
            }
        }
        for k in 0..y.axes().len() {
            let o = self.layout.axis(k);
            let axis = &mut y.axes_mut()[k];
            for (ai, di) in axis.iter_mut().zip(&dir[o..o + n]) {
                *ai -= tau * *di;
            }
            normalize(axis);
        }
        self.enforce_pairs(&mut y);
        y
    }

    fn precondition(&self, g: &[T]) -> Vec<T> {
        g.iter().zip(&self.stiffness).map(|(gi, s)| *gi / *s).collect()
    }

    fn transport(&self, x: &PairedField<T>, v: &mut [T]) {
        let n = self.layout.n;
        for (k, axis) in x.axes().iter().enumerate() {
            let o = self.layout.axis(k);
            let along = vec_dot(&v[o..o + n], axis);
            for (vi, ai) in v[o..o + n].iter_mut().zip(axis) {
                *vi -= along * *ai;
            }
        }
    }

    fn reorthogonalize(&self, x: &mut PairedField<T>) -> Result<()> {
        for phase in Phase::BOTH {
            for (i, a) in x.values_mut(phase).iter_mut().enumerate() {
                if phase == Phase::Minus && self.layout.slaved[i].is_some() {
                    continue;
                }
                *a = nearest_orthogonal(a)?.into_mat();
            }
        }
        for axis in x.axes_mut() {
            normalize(axis);
        }
        self.enforce_pairs(x);
        Ok(())
    }
}

/// Minimizes E_h(V, Ã; ·) starting from the feasible warm start Ã.
pub fn minimize_step<T: Scalar>(
    atilde: &PairedField<T>,
    v: Option<&VelocityField>,
    h: T,
    cfg: &StepConfig,
) -> Result<StepResult<T>> {
    cfg.validate()?;
    let tol = FEASIBLE_TOL.max(T::TOL_ORTH);
    atilde.validate(tol, tol)?;
    let ctx = EnergyContext::new(atilde, v.filter(|v| !v.is_zero()), h)?;
    let energy_before = ctx.energy(atilde)?;
    let problem = StepProblem::new(ctx);
    let mut start = atilde.clone();
    problem.enforce_pairs(&mut start);
    let outcome = minimize(&problem, start, cfg)?;
    let mut field = outcome.point;
    // Leave the result clean regardless of where the cadence fell.
    if outcome.accepted_steps % cfg.reorthogonalize_every != 0 {
        let before = field.clone();
        problem.reorthogonalize(&mut field)?;
        if problem.ctx.energy_difference(&before, &field) > T::lit(1e-12) {
            return Err(Error::InvalidParameter { name: "field", reason: "re-orthogonalization moved the minimizer".into() });
        }
    }
    let energy_after = problem.ctx.energy(&field)?;
    Ok(StepResult {
        field,
        iterations: outcome.iterations,
        final_grad_norm: outcome.grad_norm,
        energy_before,
        energy_after,
        descent_accepted: outcome.accepted_steps > 0,
        converged: outcome.converged,
    })
}

/// Metric norm of the constrained gradient of E_h(V, Ã; ·) at `a`.
pub fn step_gradient_norm<T: Scalar>(
    a: &PairedField<T>,
    atilde: &PairedField<T>,
    v: Option<&VelocityField>,
    h: T,
) -> Result<T> {
    a.check_compatible(atilde)?;
    let problem = StepProblem::new(EnergyContext::new(atilde, v, h)?);
    Ok(problem.grad_norm(&problem.gradient(a)))
}
