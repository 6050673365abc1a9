use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PairedField, Phase};
use crate::matcore::SquareMatrix;
use crate::motion::VelocityField;
use crate::scalar::Scalar;

use super::{directional_derivative, BumpSpec};

/// Which side the field multiplies the test matrix from.
///
/// `Left` pairs ∂ₜA:(AΨ) and ∇A:(A∇Ψ); `Right` pairs ∂ₜA Aᵀ:Ψ and ∇A Aᵀ:∇Ψ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Left,
    Right,
}

/// Where inside a slab the field is evaluated.
///
/// `StepEnd` uses A^{m+1} throughout the slab. Combined with `Frame::Left`
/// this is the Euler–Lagrange form of the step, so it vanishes up to the
/// optimizer tolerance for every N. `Linear` uses the chord between the
/// slab's start and end values and measures genuine time consistency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimePairing {
    StepEnd,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakFormOptions {
    pub frame: Frame,
    pub pairing: TimePairing,
}

impl Default for WeakFormOptions {
    fn default() -> Self {
        Self { frame: Frame::Left, pairing: TimePairing::Linear }
    }
}

/// One time slab (t0, t1]. `start` is the previous value already carried to
/// the grid of `end`; `velocity` is the transport velocity on that grid.
#[derive(Clone, Debug)]
pub struct Slab<T> {
    pub start: PairedField<T>,
    pub end: PairedField<T>,
    pub t0: f64,
    pub t1: f64,
    pub velocity: Option<VelocityField>,
}

/// Piecewise linear hat in time, zero outside (start, end).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeHat {
    pub start: f64,
    pub peak: f64,
    pub end: f64,
}

impl TimeHat {
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            0.0
        } else if t <= self.peak {
            (t - self.start) / (self.peak - self.start)
        } else {
            (self.end - t) / (self.end - self.peak)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeTest {
    pub space: BumpSpec,
    pub time: TimeHat,
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Quadrature nodes (t, weight) on (t0, t1), split at every breakpoint.
fn quadrature(t0: f64, t1: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts = vec![t0];
    cuts.extend(breaks.iter().copied().filter(|&b| b > t0 && b < t1));
    cuts.push(t1);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        for (x, wt) in GAUSS3 {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * wt));
        }
    }
    out
}

fn breakpoints(tests: &[SpaceTimeTest]) -> Vec<f64> {
    tests.iter().flat_map(|t| [t.time.start, t.time.peak, t.time.end]).collect()
}

fn check_slab<T: Scalar>(slab: &Slab<T>) -> Result<T> {
    slab.start.check_compatible(&slab.end)?;
    if !(slab.t1 > slab.t0) {
        return Err(Error::InvalidParameter { name: "slab", reason: "t1 must exceed t0".into() });
    }
    Ok(T::lit(slab.t1 - slab.t0))
}

/// Discrete time derivative on a slab: (end − start)/h + V·∇start.
fn slab_derivative<T: Scalar>(slab: &Slab<T>, h: T) -> [Vec<SquareMatrix<T>>; 2] {
    let vg = slab.velocity.as_ref().map(|v| directional_derivative(&slab.start, v));
    Phase::BOTH.map(|p| {
        slab.end
            .values(p)
            .iter()
            .zip(slab.start.values(p))
            .enumerate()
            .map(|(i, (e, s))| {
                let mut d = (e - s).scale(T::one() / h);
                if let Some(vg) = &vg {
                    d += &vg[p.index()][i];
                }
                d
            })
            .collect()
    })
}

fn field_at<T: Scalar>(slab: &Slab<T>, pairing: TimePairing, t: f64) -> [Vec<SquareMatrix<T>>; 2] {
    let s = T::lit((t - slab.t0) / (slab.t1 - slab.t0));
    Phase::BOTH.map(|p| match pairing {
        TimePairing::StepEnd => slab.end.values(p).to_vec(),
        TimePairing::Linear => slab
            .start
            .values(p)
            .iter()
            .zip(slab.end.values(p))
            .map(|(a, b)| SquareMatrix::lerp(a, b, s))
            .collect(),
    })
}

/// max over tests of |∫∫ ∂ₜA:Ψ-pairing + ∇A:∇Ψ-pairing| / ‖Ψ‖_{L²(space-time)}
/// for Ψ = χ(t)φ(x)B, with B antisymmetric and Ψ continuous across the
/// interface.
pub fn weak_neumann_residual<T: Scalar>(slabs: &[Slab<T>], tests: &[SpaceTimeTest], opts: WeakFormOptions) -> Result<T> {
    if tests.iter().any(|t| t.space.jump) {
        return Err(Error::InvalidParameter { name: "tests", reason: "space-time tests must be continuous".into() });
    }
    let breaks = breakpoints(tests);
    let mut form = vec![T::zero(); tests.len()];
    let mut norm_sq = vec![T::zero(); tests.len()];
    for slab in slabs {
        let h = check_slab(slab)?;
        let grid = slab.end.grid();
        let d = slab_derivative(slab, h);
        let weights: Vec<[Vec<f64>; 2]> = tests.iter().map(|t| t.space.weights(grid)).collect();
        for (t, wq) in quadrature(slab.t0, slab.t1, &breaks) {
            let chis: Vec<f64> = tests.iter().map(|x| x.time.value(t)).collect();
            if chis.iter().all(|&c| c == 0.0) {
                continue;
            }
            let b = field_at(slab, opts.pairing, t);
            for phase in Phase::BOTH {
                let pg = grid.phase(phase);
                let bv = &b[phase.index()];
                let node_density: Vec<SquareMatrix<T>> = bv
                    .iter()
                    .zip(&d[phase.index()])
                    .zip(&pg.nodes)
                    .map(|((bi, di), node)| {
                        let m = match opts.frame {
                            Frame::Left => bi.tr_mul(di),
                            Frame::Right => di.mul_tr(bi),
                        };
                        m.scale(T::lit(node.volume))
                    })
                    .collect();
                let edge_density: Vec<SquareMatrix<T>> = pg
                    .edges
                    .iter()
                    .map(|e| {
                        let da = &bv[e.b] - &bv[e.a];
                        let abar = (&bv[e.a] + &bv[e.b]).scale(T::lit(0.5));
                        let m = match opts.frame {
                            Frame::Left => abar.tr_mul(&da),
                            Frame::Right => da.mul_tr(&abar),
                        };
                        m.scale(T::lit(e.coef))
                    })
                    .collect();
                for (k, test) in tests.iter().enumerate() {
                    if chis[k] == 0.0 {
                        continue;
                    }
                    let (i, j) = test.space.basis;
                    let phi = &weights[k][phase.index()];
                    let mut acc = T::zero();
                    let mut nrm = T::zero();
                    for (node, (m, node_geom)) in node_density.iter().zip(&pg.nodes).enumerate() {
                        if phi[node] != 0.0 {
                            acc += T::lit(phi[node]) * (m[(i, j)] - m[(j, i)]);
                            nrm += T::lit(2.0 * node_geom.volume * phi[node] * phi[node]);
                        }
                    }
                    for (e, m) in pg.edges.iter().zip(&edge_density) {
                        let dphi = phi[e.b] - phi[e.a];
                        if dphi != 0.0 {
                            acc += T::lit(dphi) * (m[(i, j)] - m[(j, i)]);
                        }
                    }
                    form[k] += T::lit(wq * chis[k]) * acc;
                    norm_sq[k] += T::lit(wq * chis[k] * chis[k]) * nrm;
                }
            }
        }
    }
    let mut worst = T::zero();
    for (f, ns) in form.iter().zip(&norm_sq) {
        if *ns > T::zero() {
            worst = worst.max(f.abs() / ns.sqrt());
        }
    }
    Ok(worst)
}

/// max over tests of ‖∫∫ ∂ₜA φχ + ∇A∇(φχ) + ∇A Aᵀ∇A φχ‖_F / ‖φχ‖_{L²}.
///
/// This is the matrix-valued equation tested against Φ = φχ·I; any constant
/// matrix factor on the right only multiplies the result. Tests must vanish
/// on the interface.
pub fn interior_weak_formula_residual<T: Scalar>(
    slabs: &[Slab<T>],
    tests: &[SpaceTimeTest],
    pairing: TimePairing,
) -> Result<T> {
    let breaks = breakpoints(tests);
    let n = slabs.first().map(|s| s.end.n()).unwrap_or(1);
    let mut form = vec![SquareMatrix::<T>::zeros(n); tests.len()];
    let mut norm_sq = vec![T::zero(); tests.len()];
    for slab in slabs {
        let h = check_slab(slab)?;
        let grid = slab.end.grid();
        let d = slab_derivative(slab, h);
        let weights: Vec<[Vec<f64>; 2]> = tests.iter().map(|t| t.space.weights(grid)).collect();
        for (k, w) in weights.iter().enumerate() {
            if grid.pairs().iter().any(|p| w[0][p.plus] != 0.0 || w[1][p.minus] != 0.0) {
                return Err(Error::InvalidParameter {
                    name: "tests",
                    reason: format!("test {k} does not vanish on the interface"),
                });
            }
        }
        for (t, wq) in quadrature(slab.t0, slab.t1, &breaks) {
            let chis: Vec<f64> = tests.iter().map(|x| x.time.value(t)).collect();
            if chis.iter().all(|&c| c == 0.0) {
                continue;
            }
            let b = field_at(slab, pairing, t);
            for phase in Phase::BOTH {
                let pg = grid.phase(phase);
                let bv = &b[phase.index()];
                let half = T::lit(0.5);
                let edge_terms: Vec<(SquareMatrix<T>, SquareMatrix<T>)> = pg
                    .edges
                    .iter()
                    .map(|e| {
                        let delta = &bv[e.b] - &bv[e.a];
                        let da = delta.scale(T::lit(e.coef));
                        let abar = (&bv[e.a] + &bv[e.b]).scale(half);
                        let quad = da.mul_tr(&abar).matmul(&delta);
                        (da, quad)
                    })
                    .collect();
                for (k, _) in tests.iter().enumerate() {
                    if chis[k] == 0.0 {
                        continue;
                    }
                    let phi = &weights[k][phase.index()];
                    let mut acc = SquareMatrix::zeros(n);
                    let mut nrm = T::zero();
                    for (i, node) in pg.nodes.iter().enumerate() {
                        if phi[i] != 0.0 {
                            acc.axpy(T::lit(node.volume * phi[i]), &d[phase.index()][i]);
                            nrm += T::lit(node.volume * phi[i] * phi[i]);
                        }
                    }
                    for (e, (da, quad)) in pg.edges.iter().zip(&edge_terms) {
                        let (pa, pb) = (phi[e.a], phi[e.b]);
                        if pa != 0.0 || pb != 0.0 {
                            acc.axpy(T::lit(pb - pa), da);
                            acc.axpy(T::lit(0.5 * (pa + pb)), quad);
                        }
                    }
                    form[k].axpy(T::lit(wq * chis[k]), &acc);
                    norm_sq[k] += T::lit(wq * chis[k] * chis[k]) * nrm;
                }
            }
        }
    }
    let mut worst = T::zero();
    for (f, ns) in form.iter().zip(&norm_sq) {
        if *ns > T::zero() {
            worst = worst.max(f.norm() / ns.sqrt());
        }
    }
    Ok(worst)
}
