//! Time marching: the minimizing-movement loop on a fixed interface and on
//! an interface moving through a family of slab maps, together with the
//! time interpolants and the per-step trace.
//!
//! Slabs are right-continuous: slab m covers (t_m, t_{m+1}] and t = 0 is a
//! separate query that returns the initial data.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{
    euler_lagrange_residual, hat_bump_library, EnergyBreakdown, LibrarySpec, Slab,
};
use crate::grid::{dirichlet_energy, l2_distance_sq, Geometry, PairedField, Phase, TwoPhaseGrid};
use crate::matcore::{nearest_orthogonal, pair_residual_raw, SquareMatrix};
use crate::motion::{build_diffeos, velocity_field, DiffeoFamily, InterfaceMotion, VelocityField};
use crate::stepper::{minimize_step, StepConfig};
use crate::Field;

pub const DEFAULT_LAMBDA: f64 = 0.9;

/// Slack allowed on the monotonicity checks, relative to the initial energy.
pub const MONOTONE_SLACK: f64 = 1e-10;

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_motion() -> InterfaceMotion {
    InterfaceMotion::Stationary
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_motion")]
    pub motion: InterfaceMotion,
    /// Defaults to `StepConfig::for_step(h)`.
    #[serde(default)]
    pub stepper: Option<StepConfig>,
    /// Keep every k-th step for snapshots; 0 disables.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub el_tests: LibrarySpec,
}

impl FlowConfig {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self {
            horizon,
            steps,
            lambda: DEFAULT_LAMBDA,
            motion: InterfaceMotion::Stationary,
            stepper: None,
            snapshot_every: 0,
            el_tests: LibrarySpec::default(),
        }
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn step_config(&self) -> StepConfig {
        self.stepper.unwrap_or_else(|| StepConfig::for_step(self.h()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("T", format!("horizon must be positive, got {}", self.horizon));
        }
        if self.steps < 2 {
            return bad("N", format!("need at least 2 steps, got {}", self.steps));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda", format!("must lie in (0, 1), got {}", self.lambda));
        }
        self.step_config().validate()
    }
}

/// One line of the trace. Row 0 is the initial state.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceRow {
    pub m: usize,
    pub t: f64,
    pub dirichlet_plus: f64,
    pub dirichlet_minus: f64,
    /// Step functional at the accepted minimizer (the dirichlet energy on row 0).
    pub energy: EnergyBreakdown<f64>,
    /// ‖A^{m} − Ã^{m−1}‖²/h for the step that produced this row.
    pub kinetic: f64,
    pub orth_residual_max: f64,
    pub pair_residual_max: f64,
    pub el_residual: f64,
    /// Smallest C̃ making e^{−C̃t}·dirichlet non-increasing up to this row.
    pub c_tilde_running: f64,
    /// max |J − 1| of the slab map at the nodes, at the slab end.
    pub jac_dev_max: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Largest distance between a chord-interpolated warm-start value and
    /// its orthogonal snap; zero on a fixed interface.
    pub transfer_defect: f64,
    /// ‖Ā − A0‖² / (t · dirichlet(A0)) at this row's slab start.
    pub attachment_ratio: f64,
    /// ∫ over the slab of ‖Ã − Ā‖².
    pub gap: f64,
}

impl TraceRow {
    pub fn dirichlet(&self) -> f64 {
        self.dirichlet_plus + self.dirichlet_minus
    }
}

pub const CSV_HEADER: &str = "m,t,E_dirichlet_plus,E_dirichlet_minus,E_total,kinetic_increment,orth_residual_max,pair_residual_max,el_residual,c_tilde_running,jac_dev_max";

/// A named yes/no outcome with the measured quantity behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, value: f64) -> Self {
        Self { name: name.to_string(), passed, value }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FlowTrace {
    pub moving: bool,
    pub h: f64,
    pub rows: Vec<TraceRow>,
}

impl FlowTrace {
    pub fn initial_dirichlet(&self) -> f64 {
        self.rows.first().map_or(0.0, TraceRow::dirichlet)
    }

    pub fn final_dirichlet(&self) -> f64 {
        self.rows.last().map_or(0.0, TraceRow::dirichlet)
    }

    pub fn kinetic_total(&self) -> f64 {
        self.rows.iter().map(|r| r.kinetic).sum()
    }

    /// Largest dirichlet energy over (0, T].
    pub fn sup_dirichlet(&self) -> f64 {
        self.rows.iter().skip(1).map(TraceRow::dirichlet).fold(0.0, f64::max)
    }

    pub fn gap_total(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).sum()
    }

    pub fn c_tilde(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.c_tilde_running)
    }

    /// Run-wide attachment constant C in ‖Ā(t) − A0‖² ≤ C(t+h)·dirichlet(A0).
    pub fn attachment_constant(&self) -> f64 {
        self.rows.iter().map(|r| r.attachment_ratio).fold(0.0, f64::max)
    }

    pub fn el_residual_max(&self) -> f64 {
        self.rows.iter().map(|r| r.el_residual).fold(0.0, f64::max)
    }

    pub fn horizon(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    /// The invariants the run is expected to satisfy, each with its verdict.
    pub fn check_invariants(&self) -> Vec<InvariantCheck> {
        let d0 = self.initial_dirichlet();
        let slack = MONOTONE_SLACK * d0.max(1.0);
        let mut out = Vec::new();
        if !self.moving {
            let worst = self.rows.windows(2).map(|w| w[1].dirichlet() - w[0].dirichlet()).fold(f64::NEG_INFINITY, f64::max);
            out.push(InvariantCheck::new("dirichlet_non_increasing", worst <= slack, worst.max(0.0)));
            let excess = self.kinetic_total() + self.final_dirichlet() - d0;
            out.push(InvariantCheck::new("cumulative_energy_inequality", excess <= slack, excess));
        } else {
            let c = self.c_tilde();
            let bound = (c * self.horizon()).exp() * d0;
            let excess = self.rows.iter().map(TraceRow::dirichlet).fold(0.0, f64::max) - bound;
            out.push(InvariantCheck::new("c_tilde_finite", c.is_finite(), c));
            out.push(InvariantCheck::new("weighted_energy_bound", excess <= slack, excess));
        }
        let orth = self.rows.iter().map(|r| r.orth_residual_max).fold(0.0, f64::max);
        out.push(InvariantCheck::new("orthogonality", orth <= 1e-8, orth));
        let pair = self.rows.iter().map(|r| r.pair_residual_max).fold(0.0, f64::max);
        out.push(InvariantCheck::new("minimal_pairs", pair <= 1e-12, pair));
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.m,
                r.t,
                r.dirichlet_plus,
                r.dirichlet_minus,
                r.energy.total,
                r.kinetic,
                r.orth_residual_max,
                r.pair_residual_max,
                r.el_residual,
                r.c_tilde_running,
                r.jac_dev_max
            )?;
        }
        Ok(())
    }
}

/// Which time interpolant to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolant {
    /// Chord between the slab's start and end values.
    Linear,
    /// The slab's end value.
    Constant,
    /// Chord traversed on (t_m, t_{m+1} − λh], then frozen at the end value.
    Lambda,
}

/// One completed step: the warm start carried to the new grid, the
/// minimizer, and the transport velocity used.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub warm_start: Field,
    pub field: Field,
    pub velocity: Option<VelocityField>,
}

#[derive(Clone, Debug)]
pub struct InterpolantSet {
    pub initial: Field,
    pub steps: Vec<StepRecord>,
    pub h: f64,
    pub lambda: f64,
}

impl InterpolantSet {
    pub fn horizon(&self) -> f64 {
        self.h * self.steps.len() as f64
    }

    pub fn final_field(&self) -> &Field {
        self.steps.last().map_or(&self.initial, |s| &s.field)
    }

    /// The slab containing t under the right-continuous convention.
    pub fn slab_index(&self, t: f64) -> Result<usize> {
        let horizon = self.horizon();
        if !(t > 0.0 && t <= horizon * (1.0 + 1e-14)) {
            return Err(Error::OutOfSlab { t, horizon });
        }
        let m = (t / self.h).ceil() as usize;
        Ok(m.clamp(1, self.steps.len()) - 1)
    }

    fn local_time(&self, m: usize, t: f64) -> f64 {
        ((t - m as f64 * self.h) / self.h).clamp(0.0, 1.0)
    }

    /// Chord parameter of the λ-interpolant, 1 on the plateau.
    fn lambda_param(&self, s: f64) -> f64 {
        let ramp = 1.0 - self.lambda;
        if s >= ramp {
            1.0
        } else {
            s / ramp
        }
    }

    /// The interpolant at one node of the grid of slab m(t).
    pub fn evaluate(&self, which: Interpolant, phase: Phase, node: usize, t: f64) -> Result<SquareMatrix<f64>> {
        if t == 0.0 {
            return node_value(&self.initial, phase, node).cloned();
        }
        let m = self.slab_index(t)?;
        let rec = &self.steps[m];
        let end = node_value(&rec.field, phase, node)?;
        let start = node_value(&rec.warm_start, phase, node)?;
        let s = self.local_time(m, t);
        let s = match which {
            Interpolant::Constant => return Ok(end.clone()),
            Interpolant::Linear => s,
            Interpolant::Lambda => self.lambda_param(s),
        };
        Ok(lerp(start, end, s))
    }

    /// ∂ₜ of the linear interpolant, constant on each slab.
    pub fn time_derivative(&self, phase: Phase, node: usize, t: f64) -> Result<SquareMatrix<f64>> {
        let m = self.slab_index(t)?;
        let rec = &self.steps[m];
        let d = node_value(&rec.field, phase, node)? - node_value(&rec.warm_start, phase, node)?;
        Ok(d.scale(1.0 / self.h))
    }

    /// The slabs in the form the weak-residual assemblers take.
    pub fn slabs(&self) -> Vec<Slab<f64>> {
        self.steps
            .iter()
            .enumerate()
            .map(|(m, r)| Slab {
                start: r.warm_start.clone(),
                end: r.field.clone(),
                t0: m as f64 * self.h,
                t1: (m + 1) as f64 * self.h,
                velocity: r.velocity.clone(),
            })
            .collect()
    }

    /// ∫∫‖Ã − Ā‖² over all slabs, from the closed form (h/3)·‖end − start‖².
    pub fn gap_total(&self) -> f64 {
        self.steps
            .iter()
            .map(|r| self.h / 3.0 * l2_distance_sq(&r.field, &r.warm_start).unwrap_or(f64::NAN))
            .sum()
    }
}

fn node_value(f: &Field, phase: Phase, node: usize) -> Result<&SquareMatrix<f64>> {
    f.values(phase).get(node).ok_or_else(|| Error::InvalidParameter {
        name: "node",
        reason: format!("node {node} outside the {} phase ({} nodes)", phase.name(), f.values(phase).len()),
    })
}

fn lerp(a: &SquareMatrix<f64>, b: &SquareMatrix<f64>, s: f64) -> SquareMatrix<f64> {
    if s == 1.0 {
        return b.clone();
    }
    if s == 0.0 {
        return a.clone();
    }
    let mut out = a.scale(1.0 - s);
    out += &b.scale(s);
    out
}

/// Pointwise-in-time summary of the λ-interpolant on the interface.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaPairStats {
    pub lambda: f64,
    /// Share of interface space-time samples sitting on a stored step value.
    pub fraction_exact: f64,
    pub samples: usize,
    /// Largest minimal-pair residual seen off the plateau.
    pub off_plateau_residual_max: f64,
    /// max over slabs and pairs of ‖end − start‖∞, the chord bound.
    pub chord_bound: f64,
}

/// Samples `per_slab` midpoint times in every slab at every interface pair.
pub fn lambda_pair_statistics(set: &InterpolantSet, lambda: f64, per_slab: usize) -> Result<LambdaPairStats> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter { name: "lambda", reason: format!("must lie in (0, 1), got {lambda}") });
    }
    if per_slab == 0 {
        return Err(Error::InvalidParameter { name: "per_slab", reason: "need at least one sample".into() });
    }
    let set = InterpolantSet { lambda, ..set.clone() };
    let (mut exact, mut total, mut worst, mut chord) = (0usize, 0usize, 0.0f64, 0.0f64);
    for (m, rec) in set.steps.iter().enumerate() {
        let pairs = rec.field.grid().pairs();
        for p in pairs {
            for phase in Phase::BOTH {
                let i = if phase == Phase::Plus { p.plus } else { p.minus };
                chord = chord.max((&rec.field.values(phase)[i] - &rec.warm_start.values(phase)[i]).max_abs());
            }
        }
        for k in 0..per_slab {
            let s = (k as f64 + 0.5) / per_slab as f64;
            let on_plateau = set.lambda_param(s) == 1.0;
            let t = (m as f64 + s) * set.h;
            for p in pairs {
                total += 1;
                if on_plateau {
                    exact += 1;
                    continue;
                }
                let a = set.evaluate(Interpolant::Lambda, Phase::Plus, p.plus, t)?;
                let b = set.evaluate(Interpolant::Lambda, Phase::Minus, p.minus, t)?;
                worst = worst.max(pair_residual_raw(&a, &b).0);
            }
        }
    }
    Ok(LambdaPairStats {
        lambda,
        fraction_exact: if total == 0 { 0.0 } else { exact as f64 / total as f64 },
        samples: total,
        off_plateau_residual_max: worst,
        chord_bound: chord,
    })
}

/// Coordinate along the interface normal: the abscissa (1D), the height (2D
/// box) or the radius (disk).
fn normal_coordinate(geometry: &Geometry, pos: [f64; 2]) -> f64 {
    match geometry {
        Geometry::FlatBox { dim, .. } => pos[dim - 1],
        Geometry::PolarDisk { .. } => (pos[0] * pos[0] + pos[1] * pos[1]).sqrt(),
    }
}

/// Carries `source` to `target`: each target node x takes the value of the
/// source at `map(x)`, found by chord interpolation along the normal line
/// through x and snapped back to the orthogonal group. Returns the field and
/// the largest snap distance.
fn transfer(source: &Field, target: &Arc<TwoPhaseGrid>, map: impl Fn([f64; 2]) -> [f64; 2]) -> Result<(Field, f64)> {
    let sgrid = source.grid();
    let sgeom = sgrid.geometry();
    let mut defect = 0.0f64;
    let mut values: [Vec<SquareMatrix<f64>>; 2] = [Vec::new(), Vec::new()];
    // Interface nodes copied verbatim from the source interface, per phase.
    let mut verbatim = [vec![false; target.pairs().len()], vec![false; target.pairs().len()]];
    for phase in Phase::BOTH {
        let sp = sgrid.phase(phase);
        let tp = target.phase(phase);
        if sp.tangential_count != tp.tangential_count {
            return Err(Error::GridMismatch);
        }
        let levels = sp.normal_levels;
        let rho_at = |j: usize| normal_coordinate(sgeom, sp.nodes[sp.node_id(j, 0)].pos);
        let (first, last) = (rho_at(0), rho_at(levels - 1));
        let dir = if last > first { 1.0 } else { -1.0 };
        let tol = 1e-12 * (1.0 + first.abs().max(last.abs()));
        let out = &mut values[phase.index()];
        for node in &tp.nodes {
            let y = map(node.pos);
            let rho = normal_coordinate(sgeom, y);
            // Progress along the normal line, 0 at the interface.
            let u = dir * (rho - first);
            let span = dir * (last - first);
            if u < -tol || u > span + tol {
                return Err(Error::Geometry(format!(
                    "pulled-back point {y:?} (normal coordinate {rho}) leaves the {} phase [{first}, {last}]",
                    phase.name()
                )));
            }
            let u = u.clamp(0.0, span);
            let mut j = 0;
            while j + 2 < levels && dir * (rho_at(j + 1) - first) <= u {
                j += 1;
            }
            let (u0, u1) = (dir * (rho_at(j) - first), dir * (rho_at(j + 1) - first));
            let mut s = (u - u0) / (u1 - u0);
            if s.abs() < 1e-12 {
                s = 0.0;
            } else if (1.0 - s).abs() < 1e-12 {
                s = 1.0;
            }
            let ti = node.tangential_index;
            let a = &source.values(phase)[sp.node_id(j, ti)];
            let b = &source.values(phase)[sp.node_id(j + 1, ti)];
            match node.pair {
                Some(k) if s == 0.0 && j == 0 => verbatim[phase.index()][k] = sp.nodes[sp.node_id(0, ti)].pair == node.pair,
                _ => {}
            }
            if s == 0.0 || s == 1.0 {
                out.push(if s == 0.0 { a.clone() } else { b.clone() });
                continue;
            }
            let chord = lerp(a, b, s);
            let snapped = nearest_orthogonal(&chord)?.into_mat();
            defect = defect.max(chord.dist_sq(&snapped).sqrt());
            out.push(snapped);
        }
    }
    let [plus, minus] = values;
    let axes = target
        .pairs()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if verbatim[0][k] && verbatim[1][k] {
                source.axes()[k].clone()
            } else {
                pair_residual_raw(&plus[p.plus], &minus[p.minus]).1
            }
        })
        .collect();
    Ok((PairedField::new(target.clone(), plus, minus, axes)?, defect))
}

/// Per-step bookkeeping shared by both loops.
struct Recorder<'a> {
    cfg: &'a FlowConfig,
    h: f64,
    d0: f64,
    rows: Vec<TraceRow>,
    c_running: f64,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a FlowConfig, a0: &Field) -> Self {
        let h = cfg.h();
        let d0 = dirichlet_energy(a0);
        let row = TraceRow {
            m: 0,
            t: 0.0,
            dirichlet_plus: a0.dirichlet_phase(Phase::Plus),
            dirichlet_minus: a0.dirichlet_phase(Phase::Minus),
            energy: EnergyBreakdown { dirichlet: d0, proximity: 0.0, transport: 0.0, total: d0 },
            orth_residual_max: a0.max_orthogonality_residual(),
            pair_residual_max: a0.max_pair_residual(),
            ..TraceRow::default()
        };
        Self { cfg, h, d0, rows: vec![row], c_running: 0.0 }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        m: usize,
        warm: &Field,
        v: Option<&VelocityField>,
        result: &crate::stepper::StepResult<f64>,
        jac_dev_max: f64,
        transfer_defect: f64,
        a0_here: &Field,
    ) -> Result<()> {
        let field = &result.field;
        let h = self.h;
        let t = (m + 1) as f64 * h;
        let dist = l2_distance_sq(field, warm)?;
        let tests = hat_bump_library(field, &self.cfg.el_tests);
        let el = euler_lagrange_residual(field, warm, v, h, &tests)?;
        let d_prev = self.rows.last().unwrap().dirichlet();
        let d_new = dirichlet_energy(field);
        if d_new > d_prev && d_new > 1e-14 * self.d0.max(1.0) && d_prev > 0.0 {
            self.c_running = self.c_running.max((d_new / d_prev).ln() / h);
        } else if d_new > d_prev && d_new > 1e-14 * self.d0.max(1.0) {
            self.c_running = f64::INFINITY;
        }
        let attachment = if self.d0 > 0.0 { l2_distance_sq(field, a0_here)? / (t * self.d0) } else { 0.0 };
        self.rows.push(TraceRow {
            m: m + 1,
            t,
            dirichlet_plus: field.dirichlet_phase(Phase::Plus),
            dirichlet_minus: field.dirichlet_phase(Phase::Minus),
            energy: result.energy_after,
            kinetic: dist / h,
            orth_residual_max: field.max_orthogonality_residual(),
            pair_residual_max: field.max_pair_residual(),
            el_residual: el.residual,
            c_tilde_running: self.c_running,
            jac_dev_max,
            iterations: result.iterations,
            grad_norm: result.final_grad_norm,
            transfer_defect,
            attachment_ratio: attachment,
            gap: h / 3.0 * dist,
        });
        Ok(())
    }
}

fn step(m: usize, warm: &Field, v: Option<&VelocityField>, h: f64, cfg: &StepConfig) -> Result<crate::stepper::StepResult<f64>> {
    minimize_step(warm, v, h, cfg).map_err(|e| Error::FlowStep { step: m, source: Box::new(e) })
}

fn check_initial(a0: &Field) -> Result<()> {
    a0.validate(1e-8, 1e-12)
}

/// Minimizing movement on a fixed interface.
pub fn run_fixed(a0: &Field, cfg: &FlowConfig) -> Result<(InterpolantSet, FlowTrace)> {
    cfg.validate()?;
    if cfg.motion != InterfaceMotion::Stationary {
        return Err(Error::InvalidParameter { name: "motion", reason: "run_fixed needs a stationary interface".into() });
    }
    check_initial(a0)?;
    let h = cfg.h();
    let scfg = cfg.step_config();
    let mut rec = Recorder::new(cfg, a0);
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut current = a0.clone();
    for m in 0..cfg.steps {
        let result = step(m, &current, None, h, &scfg)?;
        rec.record(m, &current, None, &result, 0.0, 0.0, a0)?;
        steps.push(StepRecord { warm_start: current, field: result.field.clone(), velocity: None });
        current = result.field;
    }
    let trace = FlowTrace { moving: false, h, rows: rec.rows };
    Ok((InterpolantSet { initial: a0.clone(), steps, h, lambda: cfg.lambda }, trace))
}

fn check_moving_geometry(geometry: &Geometry, motion: &InterfaceMotion) -> Result<()> {
    let p0 = motion.position(0.0).map(|p| p.0);
    let ok = matches!(
        (geometry, motion),
        (Geometry::PolarDisk { .. }, InterfaceMotion::ShrinkingCircle { .. })
            | (Geometry::FlatBox { dim: 1, .. }, InterfaceMotion::PrescribedPoint1D { .. })
    );
    if !ok {
        return Err(Error::Geometry(format!("motion {motion:?} does not fit geometry {geometry:?}")));
    }
    let p0 = p0.unwrap();
    if (geometry.interface_position() - p0).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "initial interface at {} but the motion starts at {p0}",
            geometry.interface_position()
        )));
    }
    Ok(())
}

/// Largest |J − 1| of Φ_h^m(·, t_{m+1}) over the nodes of `grid`.
fn jacobian_deviation(fam: &DiffeoFamily, m: usize, grid: &TwoPhaseGrid) -> f64 {
    let t = (m + 1) as f64 * fam.h();
    Phase::BOTH
        .iter()
        .flat_map(|&p| grid.phase(p).nodes.iter())
        .map(|n| (fam.eval(m, n.pos, t).jacobian - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Minimizing movement with the interface following `cfg.motion`.
pub fn run_moving(a0: &Field, cfg: &FlowConfig) -> Result<(InterpolantSet, FlowTrace)> {
    cfg.validate()?;
    if cfg.motion == InterfaceMotion::Stationary {
        return Err(Error::InvalidParameter { name: "motion", reason: "run_moving needs a moving interface".into() });
    }
    check_initial(a0)?;
    let geometry = a0.grid().geometry().clone();
    check_moving_geometry(&geometry, &cfg.motion)?;
    let h = cfg.h();
    let fam = build_diffeos(cfg.motion.clone(), h, cfg.horizon)?;
    let scfg = cfg.step_config();
    let mut rec = Recorder::new(cfg, a0);
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut current = a0.clone();
    for m in 0..cfg.steps {
        let t1 = (m + 1) as f64 * h;
        let position = fam.interface_at(t1).expect("moving interface has a position");
        let grid = Arc::new(TwoPhaseGrid::new(geometry.with_interface(position)).map_err(|e| Error::FlowStep {
            step: m,
            source: Box::new(e),
        })?);
        let (warm, defect) = transfer(&current, &grid, |x| fam.map(m, x, t1))?;
        let v = velocity_field(&fam, m, &grid)?;
        let v = (!v.is_zero()).then_some(v);
        let result = step(m, &warm, v.as_ref(), h, &scfg)?;
        // A0 carried along the composed maps Ω(t_{m+1}) → Ω(0).
        let (a0_here, _) = transfer(a0, &grid, |x| {
            let mut y = x;
            for k in (0..=m).rev() {
                y = fam.map(k, y, (k + 1) as f64 * h);
            }
            y
        })?;
        rec.record(m, &warm, v.as_ref(), &result, jacobian_deviation(&fam, m, &grid), defect, &a0_here)?;
        steps.push(StepRecord { warm_start: warm, field: result.field.clone(), velocity: v });
        current = result.field;
    }
    let trace = FlowTrace { moving: true, h, rows: rec.rows };
    Ok((InterpolantSet { initial: a0.clone(), steps, h, lambda: cfg.lambda }, trace))
}

/// Dispatches on the configured motion.
pub fn run_flow(a0: &Field, cfg: &FlowConfig) -> Result<(InterpolantSet, FlowTrace)> {
    match cfg.motion {
        InterfaceMotion::Stationary => run_fixed(a0, cfg),
        _ => run_moving(a0, cfg),
    }
}
