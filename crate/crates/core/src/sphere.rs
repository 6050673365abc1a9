//! Minimizing movement for maps from a flat torus into the unit sphere
//! S^{L−1}: each step minimizes Σ_edges c|u_b − u_a|² + h⁻¹Σ vol|u − ũ|²
//! over unit node vectors.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentProblem, StepConfig};
use crate::error::{Error, Result};
use crate::functional::TimeHat;
use crate::rng::{seeded, stream};

/// Allowed deviation of |u| from 1 at every node.
pub const UNIT_TOL: f64 = 1e-12;

/// Uniform periodic grid on [0,1)^dim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub cells: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, cells: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter { name: "dim", reason: format!("torus dimension must be 1 or 2, got {dim}") });
        }
        if cells < 3 {
            return Err(Error::InvalidParameter { name: "cells", reason: format!("need at least 3 cells, got {cells}") });
        }
        Ok(Self { dim, cells })
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coefficient of every edge: transverse measure over length.
    pub fn edge_coef(&self) -> f64 {
        self.spacing().powi(self.dim as i32 - 2)
    }

    pub fn pos(&self, i: usize) -> [f64; 2] {
        let dx = self.spacing();
        [(i % self.cells) as f64 * dx, (i / self.cells) as f64 * dx]
    }

    /// Each edge once, as (a, b) with b the forward neighbour of a.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let c = self.cells;
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for i in 0..self.len() {
            let (x, y) = (i % c, i / c);
            out.push((i, y * c + (x + 1) % c));
            if self.dim == 2 {
                out.push((i, ((y + 1) % c) * c + x));
            }
        }
        out
    }

    /// Node degree, 2·dim on a torus.
    pub fn degree(&self) -> usize {
        2 * self.dim
    }
}

/// One unit vector in ℝ^L per torus node, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereField {
    grid: TorusGrid,
    l: usize,
    data: Vec<f64>,
}

/// Initial data for the sphere flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereRecipe {
    Constant { value: Vec<f64> },
    /// A few random Fourier modes around a random base point, normalized.
    SmoothRandom { seed: u64, amplitude: f64 },
    NodalNoise { seed: u64, amplitude: f64 },
}

fn normalize_in_place(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    norm
}

impl SphereField {
    /// Checks shapes and |u| = 1 at every node.
    pub fn new(grid: TorusGrid, l: usize, data: Vec<f64>) -> Result<Self> {
        if l < 2 {
            return Err(Error::DimensionTooSmall(l));
        }
        if data.len() != grid.len() * l {
            return Err(Error::DimensionMismatch { expected: grid.len() * l, got: data.len() });
        }
        let f = Self { grid, l, data };
        let dev = f.max_norm_deviation();
        if !(dev <= UNIT_TOL) {
            return Err(Error::NonUnitAxis(1.0 + dev));
        }
        Ok(f)
    }

    /// Normalizes every node vector; fails on (near) zero vectors.
    pub fn from_raw(grid: TorusGrid, l: usize, mut data: Vec<f64>) -> Result<Self> {
        if l >= 2 && data.len() == grid.len() * l {
            for v in data.chunks_mut(l) {
                let norm = normalize_in_place(v);
                if !(norm > 1e-8) || !norm.is_finite() {
                    return Err(Error::NonUnitAxis(norm));
                }
            }
        }
        Self::new(grid, l, data)
    }

    pub fn from_recipe(grid: TorusGrid, l: usize, recipe: &SphereRecipe) -> Result<Self> {
        let n = grid.len();
        match recipe {
            SphereRecipe::Constant { value } => {
                if value.len() != l {
                    return Err(Error::DimensionMismatch { expected: l, got: value.len() });
                }
                Self::from_raw(grid, l, value.iter().copied().cycle().take(n * l).collect())
            }
            SphereRecipe::SmoothRandom { seed, amplitude } => {
                let mut rng = seeded(*seed, stream::SPHERE);
                let mut gauss = |k: usize| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(&mut rng)).collect() };
                let mut base = gauss(l);
                normalize_in_place(&mut base);
                // Modes (kx, ky) with 1 ≤ |k|∞ ≤ 2, one cosine and one sine vector each.
                let mut modes = Vec::new();
                let ky_range = if grid.dim == 2 { -2i32..=2 } else { 0..=0 };
                for ky in ky_range {
                    for kx in -2i32..=2 {
                        if !(ky > 0 || (ky == 0 && kx > 0)) {
                            continue;
                        }
                        modes.push(([kx as f64, ky as f64], gauss(l), gauss(l)));
                    }
                }
                let mut data = Vec::with_capacity(n * l);
                for i in 0..n {
                    let p = grid.pos(i);
                    let mut v = base.clone();
                    for (k, a, b) in &modes {
                        let phase = 2.0 * PI * (k[0] * p[0] + k[1] * p[1]);
                        let (s, c) = phase.sin_cos();
                        for j in 0..l {
                            v[j] += amplitude * (a[j] * c + b[j] * s) / (k[0].abs() + k[1].abs());
                        }
                    }
                    data.extend(v);
                }
                Self::from_raw(grid, l, data)
            }
            SphereRecipe::NodalNoise { seed, amplitude } => {
                let mut rng = seeded(*seed, stream::NOISE);
                let mut base: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
                normalize_in_place(&mut base);
                let mut data = Vec::with_capacity(n * l);
                for _ in 0..n {
                    data.extend(base.iter().map(|b| b + amplitude * Distribution::<f64>::sample(&StandardNormal, &mut rng)));
                }
                Self::from_raw(grid, l, data)
            }
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.l..(i + 1) * self.l]
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.data
            .chunks(self.l)
            .map(|v| (v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Σ_edges c|u_b − u_a|².
    pub fn dirichlet(&self) -> f64 {
        let c = self.grid.edge_coef();
        self.grid.edges().iter().map(|&(a, b)| c * dist_sq(self.node(a), self.node(b))).sum()
    }

    /// Σ vol |u − v|².
    pub fn l2_distance_sq(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let vol = self.grid.volume();
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| vol * (a - b) * (a - b)).sum())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.l != other.l {
            return Err(Error::DimensionMismatch { expected: self.l, got: other.l });
        }
        Ok(())
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dirichlet part, proximity part and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SphereEnergy {
    pub dirichlet: f64,
    pub proximity: f64,
    pub total: f64,
}

/// E_h(ũ; u) = Σ_edges c|Δu|² + h⁻¹ Σ vol|u − ũ|².
pub fn sphere_energy(utilde: &SphereField, u: &SphereField, h: f64) -> Result<SphereEnergy> {
    let dirichlet = u.dirichlet();
    let proximity = u.l2_distance_sq(utilde)? / h;
    Ok(SphereEnergy { dirichlet, proximity, total: dirichlet + proximity })
}

struct SphereProblem<'a> {
    utilde: &'a SphereField,
    h: f64,
    edges: Vec<(usize, usize)>,
    metric: Vec<f64>,
    /// Diagonal Hessian estimate over the metric weight, per node.
    curvature: f64,
}

impl<'a> SphereProblem<'a> {
    fn new(utilde: &'a SphereField, h: f64) -> Self {
        let g = utilde.grid;
        let vol = g.volume();
        let curvature = 2.0 * g.degree() as f64 * g.edge_coef() / vol + 2.0 / h;
        Self { utilde, h, edges: g.edges(), metric: vec![vol; utilde.data.len()], curvature }
    }

    fn field(&self, data: Vec<f64>) -> SphereField {
        SphereField { grid: self.utilde.grid, l: self.utilde.l, data }
    }

    /// ∂E/∂u per node, divided by the node volume.
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let l = self.utilde.l;
        let g = self.utilde.grid;
        let (c, vol) = (g.edge_coef(), g.volume());
        let mut out: Vec<f64> = x.iter().zip(&self.utilde.data).map(|(u, t)| 2.0 * (u - t) / self.h).collect();
        for &(a, b) in &self.edges {
            for j in 0..l {
                let d = 2.0 * c * (x[b * l + j] - x[a * l + j]) / vol;
                out[a * l + j] -= d;
                out[b * l + j] += d;
            }
        }
        out
    }
}

/// Removes the component along u from v, node by node.
fn project_tangent(u: &[f64], v: &mut [f64], l: usize) {
    for (un, vn) in u.chunks(l).zip(v.chunks_mut(l)) {
        let s = dot(un, vn);
        for (vi, ui) in vn.iter_mut().zip(un) {
            *vi -= s * ui;
        }
    }
}

impl DescentProblem<f64> for SphereProblem<'_> {
    type Point = Vec<f64>;

    fn metric(&self) -> &[f64] {
        &self.metric
    }

    fn energy(&self, x: &Vec<f64>) -> f64 {
        let c = self.utilde.grid.edge_coef();
        let l = self.utilde.l;
        let mut e = 0.0;
        for &(a, b) in &self.edges {
            e += c * dist_sq(&x[a * l..(a + 1) * l], &x[b * l..(b + 1) * l]);
        }
        let vol = self.utilde.grid.volume();
        e + x.iter().zip(&self.utilde.data).map(|(u, t)| vol * (u - t) * (u - t)).sum::<f64>() / self.h
    }

    /// Differences of squares written as (p − q)·(p + q) to avoid cancellation.
    fn energy_difference(&self, old: &Vec<f64>, new: &Vec<f64>) -> f64 {
        let c = self.utilde.grid.edge_coef();
        let l = self.utilde.l;
        let mut e = 0.0;
        for &(a, b) in &self.edges {
            for j in 0..l {
                let (p, q) = (new[b * l + j] - new[a * l + j], old[b * l + j] - old[a * l + j]);
                e += c * (p - q) * (p + q);
            }
        }
        let vol = self.utilde.grid.volume();
        let mut prox = 0.0;
        for ((n, o), t) in new.iter().zip(old).zip(&self.utilde.data) {
            prox += vol * (n - o) * (n + o - 2.0 * t);
        }
        e + prox / self.h
    }

    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        let mut g = self.euclidean_gradient(x);
        project_tangent(x, &mut g, self.utilde.l);
        g
    }

    fn retract(&self, x: &Vec<f64>, dir: &[f64], tau: f64) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(dir).map(|(u, d)| u - tau * d).collect();
        for v in out.chunks_mut(self.utilde.l) {
            normalize_in_place(v);
        }
        out
    }

    fn transport(&self, x: &Vec<f64>, v: &mut [f64]) {
        project_tangent(x, v, self.utilde.l);
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let s = 2.0 / (self.h * self.curvature);
        g.iter().map(|x| x * s).collect()
    }

    fn reorthogonalize(&self, x: &mut Vec<f64>) -> Result<()> {
        for v in x.chunks_mut(self.utilde.l) {
            normalize_in_place(v);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereStepResult {
    #[serde(skip)]
    pub field: SphereField,
    pub iterations: usize,
    pub grad_norm: f64,
    pub energy_before: SphereEnergy,
    pub energy_after: SphereEnergy,
    pub converged: bool,
}

/// One minimizing-movement step started from the warm start ũ.
pub fn sphere_minimize_step(utilde: &SphereField, h: f64, cfg: &StepConfig) -> Result<SphereStepResult> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter { name: "h", reason: format!("time step must be positive, got {h}") });
    }
    let problem = SphereProblem::new(utilde, h);
    let out = minimize(&problem, utilde.data.clone(), cfg)?;
    let mut data = out.point;
    problem.reorthogonalize(&mut data)?;
    let field = problem.field(data);
    Ok(SphereStepResult {
        energy_before: sphere_energy(utilde, utilde, h)?,
        energy_after: sphere_energy(utilde, &field, h)?,
        field,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        converged: out.converged,
    })
}

/// max over nodes of |−Δu + h⁻¹(u − ũ) − {|∇u|² + h⁻¹(1 − u·ũ)}u|, where
/// Δ and |∇u|² use the same edge quadrature as the energy.
pub fn discrete_el_residual(u: &SphereField, utilde: &SphereField, h: f64) -> Result<f64> {
    u.check_compatible(utilde)?;
    let g = u.grid;
    let (c, vol, l) = (g.edge_coef(), g.volume(), u.l);
    let mut lap = vec![0.0; u.data.len()];
    let mut grad_sq = vec![0.0; g.len()];
    for (a, b) in g.edges() {
        for j in 0..l {
            let d = c * (u.data[b * l + j] - u.data[a * l + j]) / vol;
            lap[a * l + j] += d;
            lap[b * l + j] -= d;
        }
        let w = c * (1.0 - dot(u.node(a), u.node(b))) / vol;
        grad_sq[a] += w;
        grad_sq[b] += w;
    }
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let (un, tn) = (u.node(i), utilde.node(i));
        let coef = grad_sq[i] + (1.0 - dot(un, tn)) / h;
        let mut r = 0.0;
        for j in 0..l {
            let v = -lap[i * l + j] + (un[j] - tn[j]) / h - coef * un[j];
            r += v * v;
        }
        worst = worst.max(r.sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SphereTraceRow {
    pub m: usize,
    pub t: f64,
    pub dirichlet: f64,
    pub energy: SphereEnergy,
    /// |u^m − u^{m−1}|²/h
    pub kinetic: f64,
    pub el_residual: f64,
    pub norm_deviation_max: f64,
    pub iterations: usize,
    /// ∫ over the slab of |ũ − ū|².
    pub gap: f64,
    /// |u^m − u0|² / (t_m · dirichlet(u0))
    pub attachment_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SphereTrace {
    pub h: f64,
    pub rows: Vec<SphereTraceRow>,
}

pub const SPHERE_CSV_HEADER: &str = "m,t,E_dirichlet,E_total,kinetic_increment,norm_deviation_max,el_residual";

impl SphereTrace {
    pub fn initial_dirichlet(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.dirichlet)
    }

    pub fn kinetic_total(&self) -> f64 {
        self.rows.iter().map(|r| r.kinetic).sum()
    }

    pub fn sup_dirichlet(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.dirichlet).fold(0.0, f64::max)
    }

    pub fn gap_total(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).sum()
    }

    pub fn el_residual_max(&self) -> f64 {
        self.rows.iter().skip(1).map(|r| r.el_residual).fold(0.0, f64::max)
    }

    pub fn norm_deviation_max(&self) -> f64 {
        self.rows.iter().map(|r| r.norm_deviation_max).fold(0.0, f64::max)
    }

    /// ∫∫|∂ₜũ|² + ½ sup_t dirichlet(ū) − ½ dirichlet(u0), as printed; may be
    /// positive since the sup and the full kinetic sum are taken separately.
    pub fn energy_excess_literal(&self) -> f64 {
        self.kinetic_total() + 0.5 * self.sup_dirichlet() - 0.5 * self.initial_dirichlet()
    }

    /// max over m of Σ_{k≤m} kinetic + ½ dirichlet(u^m) − ½ dirichlet(u0):
    /// the form the per-step comparison telescopes to.
    pub fn energy_excess_running(&self) -> f64 {
        let d0 = self.initial_dirichlet();
        let mut acc = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for r in self.rows.iter().skip(1) {
            acc += r.kinetic;
            worst = worst.max(acc + 0.5 * r.dirichlet - 0.5 * d0);
        }
        worst
    }

    /// Largest violation of kinetic_m ≤ ½(dirichlet_{m−1} − dirichlet_m).
    pub fn per_step_excess(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[1].kinetic - 0.5 * (w[0].dirichlet - w[1].dirichlet))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// C in ∫∫|ũ − ū|² ≤ C·h²·T·dirichlet(u0).
    pub fn gap_constant(&self) -> f64 {
        let d0 = self.initial_dirichlet();
        let t = self.rows.last().map_or(0.0, |r| r.t);
        if d0 == 0.0 {
            0.0
        } else {
            self.gap_total() / (self.h * self.h * t * d0)
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SPHERE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.m, r.t, r.dirichlet, r.energy.total, r.kinetic, r.norm_deviation_max, r.el_residual
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SphereHistory {
    pub initial: SphereField,
    pub steps: Vec<SphereField>,
    pub h: f64,
    pub lambda: f64,
}

impl SphereHistory {
    fn value(&self, k: usize) -> &SphereField {
        if k == 0 {
            &self.initial
        } else {
            &self.steps[k - 1]
        }
    }
}

/// Runs N steps of size T/N from u0.
pub fn run_sphere_flow(
    u0: &SphereField,
    horizon: f64,
    steps: usize,
    lambda: f64,
    cfg: Option<&StepConfig>,
) -> Result<(SphereHistory, SphereTrace)> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter { name: "T", reason: format!("horizon must be positive, got {horizon}") });
    }
    if steps < 2 {
        return Err(Error::InvalidParameter { name: "N", reason: format!("need at least 2 steps, got {steps}") });
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter { name: "lambda", reason: format!("must lie in (0, 1), got {lambda}") });
    }
    let h = horizon / steps as f64;
    let cfg = cfg.copied().unwrap_or_else(|| StepConfig::for_step(h));
    let d0 = u0.dirichlet();
    let mut rows = vec![SphereTraceRow {
        dirichlet: d0,
        energy: SphereEnergy { dirichlet: d0, proximity: 0.0, total: d0 },
        norm_deviation_max: u0.max_norm_deviation(),
        ..SphereTraceRow::default()
    }];
    let mut history = Vec::with_capacity(steps);
    let mut current = u0.clone();
    for m in 0..steps {
        let r = sphere_minimize_step(&current, h, &cfg).map_err(|e| Error::FlowStep { step: m, source: Box::new(e) })?;
        let dist = r.field.l2_distance_sq(&current)?;
        let t = (m + 1) as f64 * h;
        rows.push(SphereTraceRow {
            m: m + 1,
            t,
            dirichlet: r.field.dirichlet(),
            energy: r.energy_after,
            kinetic: dist / h,
            el_residual: discrete_el_residual(&r.field, &current, h)?,
            norm_deviation_max: r.field.max_norm_deviation(),
            iterations: r.iterations,
            gap: h / 3.0 * dist,
            attachment_ratio: if d0 > 0.0 { r.field.l2_distance_sq(u0)? / (t * d0) } else { 0.0 },
        });
        current = r.field.clone();
        history.push(r.field);
    }
    Ok((SphereHistory { initial: u0.clone(), steps: history, h, lambda }, SphereTrace { h, rows }))
}

/// Space-time test function ψ(x)·χ(t) with a periodic raised-cosine bump ψ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTest {
    pub center: [f64; 2],
    pub radius: f64,
    pub time: TimeHat,
}

impl SphereTest {
    pub fn space(&self, grid: TorusGrid, i: usize) -> f64 {
        let p = grid.pos(i);
        let mut d2 = 0.0;
        for k in 0..grid.dim {
            let mut d = (p[k] - self.center[k]).rem_euclid(1.0);
            if d > 0.5 {
                d = 1.0 - d;
            }
            d2 += d * d;
        }
        let d = d2.sqrt();
        if d >= self.radius {
            0.0
        } else {
            0.5 * (1.0 + (PI * d / self.radius).cos())
        }
    }
}

/// Which values stand in for u inside a slab.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WedgePairing {
    /// ū = u^k throughout the slab; this is the wedge of the discrete
    /// Euler–Lagrange equation and vanishes to solver accuracy for every N.
    StepEnd,
    /// ũ, the chord between u^{k−1} and u^k; measures time consistency.
    Linear,
}

/// Index pairs (i, j), i < j, in the order of the wedge components.
pub fn wedge_indices(l: usize) -> Vec<(usize, usize)> {
    (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).collect()
}

/// Components (a ∧ b)_{ij} = a_i b_j − a_j b_i for i < j.
pub fn wedge(a: &[f64], b: &[f64]) -> Vec<f64> {
    let idx = wedge_indices(a.len());
    let mut out = vec![0.0; idx.len()];
    add_wedge(&mut out, &idx, a, b, 1.0);
    out
}

/// (a ∧ b)_{ij} accumulated with weight w.
fn add_wedge(out: &mut [f64], idx: &[(usize, usize)], a: &[f64], b: &[f64], w: f64) {
    for (o, &(i, j)) in out.iter_mut().zip(idx) {
        *o += w * (a[i] * b[j] - a[j] * b[i]);
    }
}

const GAUSS3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// ∫∫ ∂ₜũ ∧ (u φ) + (∇u ∧ u)·∇φ, per wedge component.
pub fn wedge_residual(history: &SphereHistory, test: &SphereTest, pairing: WedgePairing) -> Vec<f64> {
    let u0 = &history.initial;
    let (grid, l, h) = (u0.grid, u0.l, history.h);
    let idx = wedge_indices(l);
    let mut out = vec![0.0; idx.len()];
    let psi: Vec<f64> = (0..grid.len()).map(|i| test.space(grid, i)).collect();
    if psi.iter().all(|&p| p == 0.0) {
        return out;
    }
    let (c, vol) = (grid.edge_coef(), grid.volume());
    let edges = grid.edges();
    let mut u = vec![0.0; u0.data.len()];
    for k in 1..=history.steps.len() {
        let (prev, next) = (history.value(k - 1), history.value(k));
        let (t0, t1) = ((k - 1) as f64 * h, k as f64 * h);
        let mut cuts = vec![t0];
        cuts.extend([test.time.start, test.time.peak, test.time.end].into_iter().filter(|&b| b > t0 && b < t1));
        cuts.push(t1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, wq) in GAUSS3 {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let chi = test.time.value(t) * 0.5 * (b - a) * wq;
                if chi == 0.0 {
                    continue;
                }
                let s = match pairing {
                    WedgePairing::StepEnd => 1.0,
                    WedgePairing::Linear => (t - t0) / h,
                };
                for ((ui, p), q) in u.iter_mut().zip(&prev.data).zip(&next.data) {
                    *ui = (1.0 - s) * p + s * q;
                }
                for i in 0..grid.len() {
                    if psi[i] == 0.0 {
                        continue;
                    }
                    let dt: Vec<f64> = (0..l).map(|j| (next.data[i * l + j] - prev.data[i * l + j]) / h).collect();
                    add_wedge(&mut out, &idx, &dt, &u[i * l..(i + 1) * l], chi * vol * psi[i]);
                }
                for &(ea, eb) in &edges {
                    let dpsi = psi[eb] - psi[ea];
                    if dpsi == 0.0 {
                        continue;
                    }
                    let (ua, ub) = (&u[ea * l..(ea + 1) * l], &u[eb * l..(eb + 1) * l]);
                    let grad: Vec<f64> = ua.iter().zip(ub).map(|(x, y)| y - x).collect();
                    let mid: Vec<f64> = ua.iter().zip(ub).map(|(x, y)| 0.5 * (x + y)).collect();
                    add_wedge(&mut out, &idx, &grad, &mid, chi * c * dpsi);
                }
            }
        }
    }
    out
}
