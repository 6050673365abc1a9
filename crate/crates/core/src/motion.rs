//! Interface motion in time and the near-identity maps that carry the
//! domains at time t back to the step anchor t_m = m·h.
//!
//! Every map here moves points along the interface normal only:
//! `x ↦ x + a(t)·b(ρ(x) − P(t))·n̂(x)`, where P(t) is the interface position
//! (radius or abscissa), a(t) = P(mh) − P(t), and b is a C² bump equal to 1
//! on the interface and 0 at distance ≥ w. All derivatives are analytic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Phase, TwoPhaseGrid};

/// Default fraction of the lifespan that must remain unused.
pub const LIFESPAN_MARGIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterfaceMotion {
    Stationary,
    /// Circle of radius √(r0² − 2t), the exact curve-shortening solution.
    ShrinkingCircle { r0: f64 },
    /// Point s(t) = Σ coeffs[k]·t^k on the line. Not a curvature flow.
    PrescribedPoint1D { coeffs: Vec<f64> },
}

impl InterfaceMotion {
    pub fn lifespan(&self) -> f64 {
        match self {
            InterfaceMotion::ShrinkingCircle { r0 } => 0.5 * r0 * r0,
            _ => f64::INFINITY,
        }
    }

    /// Interface position P(t) and its first two time derivatives.
    pub fn position(&self, t: f64) -> Option<(f64, f64, f64)> {
        match self {
            InterfaceMotion::Stationary => None,
            InterfaceMotion::ShrinkingCircle { r0 } => {
                let r = (r0 * r0 - 2.0 * t).sqrt();
                Some((r, -1.0 / r, -1.0 / (r * r * r)))
            }
            InterfaceMotion::PrescribedPoint1D { coeffs } => {
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for c in coeffs.iter().rev() {
                    ddp = ddp * t + 2.0 * dp;
                    dp = dp * t + p;
                    p = p * t + c;
                }
                Some((p, dp, ddp))
            }
        }
    }

    /// Mean curvature of the interface (1/r for the circle, 0 otherwise).
    pub fn curvature(&self, t: f64) -> f64 {
        match self {
            InterfaceMotion::ShrinkingCircle { r0 } => 1.0 / (r0 * r0 - 2.0 * t).sqrt(),
            _ => 0.0,
        }
    }

    /// Speed of the interface along the normal pointing from the plus to the
    /// minus phase, counted positive when the plus phase shrinks.
    pub fn normal_velocity(&self, t: f64) -> f64 {
        match self {
            InterfaceMotion::Stationary => 0.0,
            InterfaceMotion::ShrinkingCircle { .. } => -self.position(t).map_or(0.0, |p| p.1),
            // Plus phase is the upper side x > s(t).
            InterfaceMotion::PrescribedPoint1D { .. } => self.position(t).map_or(0.0, |p| p.1),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InterfaceMotion::ShrinkingCircle { r0 } if !(*r0 > 0.0 && *r0 < 1.0) => Err(Error::InvalidParameter {
                name: "r0",
                reason: "circle radius must lie in (0, 1)".into(),
            }),
            InterfaceMotion::PrescribedPoint1D { coeffs } if coeffs.is_empty() => Err(Error::InvalidParameter {
                name: "coeffs",
                reason: "need at least one polynomial coefficient".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// Quintic smoothstep and its first three derivatives on [0, ∞).
fn smoothstep(u: f64) -> [f64; 4] {
    if u >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let u2 = u * u;
    [
        u2 * u * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - 2.0 * u + u2),
        60.0 * u * (1.0 - 3.0 * u + 2.0 * u2),
        60.0 - 360.0 * u + 360.0 * u2,
    ]
}

/// b(s) = 1 − S(|s|/w) and its first three derivatives in s.
fn bump(s: f64, w: f64) -> [f64; 4] {
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let [v, d1, d2, d3] = smoothstep(s.abs() / w);
    [1.0 - v, -sign * d1 / w, -d2 / (w * w), -sign * d3 / (w * w * w)]
}

/// The normal profile ψ(ρ, t) of one slab map and its derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Profile {
    pub psi: f64,
    pub psi_r: f64,
    pub psi_rr: f64,
    pub psi_t: f64,
    pub psi_rt: f64,
    pub psi_tt: f64,
    pub psi_rtt: f64,
}

/// Φ and its derivatives at one point, in Cartesian components. In one
/// dimension only the first component is meaningful.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DiffeoEval {
    pub phi: [f64; 2],
    pub dphi: [[f64; 2]; 2],
    pub d2phi: [[[f64; 2]; 2]; 2],
    pub dt_phi: [f64; 2],
    pub dt_dphi: [[f64; 2]; 2],
    pub dtt_dphi: [[f64; 2]; 2],
    pub jacobian: f64,
}

/// The maps Φ_h^m(·, t) for m = 0..N−1, t ∈ (mh, (m+1)h].
#[derive(Clone, Debug)]
pub struct DiffeoFamily {
    motion: InterfaceMotion,
    h: f64,
    steps: usize,
    width: f64,
}

/// Upper bound on sup‖DΦ − I‖ (max entry) for step size `h`.
fn dphi_bound(motion: &InterfaceMotion, width: f64, h: f64, horizon: f64) -> f64 {
    let steps = (horizon / h).ceil() as usize;
    let mut worst = 0.0f64;
    for m in 0..steps {
        let t0 = m as f64 * h;
        let t1 = ((m + 1) as f64 * h).min(horizon);
        let (p0, ..) = motion.position(t0).unwrap_or((0.0, 0.0, 0.0));
        let (p1, ..) = motion.position(t1).unwrap_or((0.0, 0.0, 0.0));
        let mut amax = (p0 - p1).abs();
        if let InterfaceMotion::PrescribedPoint1D { .. } = motion {
            // Non-monotone curves: sample the slab.
            for k in 1..8 {
                let t = t0 + (t1 - t0) * k as f64 / 8.0;
                amax = amax.max((p0 - motion.position(t).unwrap().0).abs());
            }
        }
        let mut slope = 1.875 / width;
        if let InterfaceMotion::ShrinkingCircle { .. } = motion {
            slope = slope.max(1.0 / (p1 - width));
        }
        worst = worst.max(amax * slope);
    }
    worst
}

/// Builds the slab maps for horizon `horizon` and step `h`.
pub fn build_diffeos(motion: InterfaceMotion, h: f64, horizon: f64) -> Result<DiffeoFamily> {
    motion.validate()?;
    if !(h > 0.0 && horizon > 0.0 && h <= horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter { name: "h", reason: format!("need 0 < h <= T, got h = {h}, T = {horizon}") });
    }
    let t0 = motion.lifespan();
    if horizon >= t0 * (1.0 - LIFESPAN_MARGIN) {
        return Err(Error::Lifespan { t: horizon, t0, margin: LIFESPAN_MARGIN });
    }
    let width = match &motion {
        InterfaceMotion::ShrinkingCircle { r0 } => 0.2 * r0,
        _ => 0.2,
    };
    if let InterfaceMotion::PrescribedPoint1D { .. } = &motion {
        let samples = 256;
        for k in 0..=samples {
            let p = motion.position(horizon * k as f64 / samples as f64).unwrap().0;
            if p.abs() + width >= 0.95 {
                return Err(Error::Geometry(format!("interface point {p} leaves the box interior")));
            }
        }
    }
    if dphi_bound(&motion, width, h, horizon) > 0.5 {
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dphi_bound(&motion, width, mid, horizon) > 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Err(Error::StepTooLarge { h, h0: lo });
    }
    let steps = (horizon / h).round().max(1.0) as usize;
    Ok(DiffeoFamily { motion, h, steps, width })
}

impl DiffeoFamily {
    pub fn motion(&self) -> &InterfaceMotion {
        &self.motion
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.motion, InterfaceMotion::Stationary)
    }

    fn dim(&self) -> usize {
        match self.motion {
            InterfaceMotion::PrescribedPoint1D { .. } => 1,
            _ => 2,
        }
    }

    /// ψ(ρ, t) for slab m.
    pub fn profile(&self, m: usize, rho: f64, t: f64) -> Profile {
        let Some((p, dp, ddp)) = self.motion.position(t) else {
            return Profile { psi: rho, psi_r: 1.0, ..Profile::default() };
        };
        let pm = self.motion.position(m as f64 * self.h).unwrap().0;
        let (a, da, dda) = (pm - p, -dp, -ddp);
        // s = ρ − P(t)
        let (st, stt) = (-dp, -ddp);
        let [b, b1, b2, b3] = bump(rho - p, self.width);
        Profile {
            psi: rho + a * b,
            psi_r: 1.0 + a * b1,
            psi_rr: a * b2,
            psi_t: da * b + a * b1 * st,
            psi_rt: da * b1 + a * b2 * st,
            psi_tt: dda * b + 2.0 * da * b1 * st + a * b2 * st * st + a * b1 * stt,
            psi_rtt: dda * b1 + 2.0 * da * b2 * st + a * b3 * st * st + a * b2 * stt,
        }
    }

    /// Φ_h^m(x, t) with all derivatives.
    pub fn eval(&self, m: usize, x: [f64; 2], t: f64) -> DiffeoEval {
        let mut out = DiffeoEval::default();
        if self.dim() == 1 {
            let pr = self.profile(m, x[0], t);
            out.phi = [pr.psi, x[1]];
            out.dphi = [[pr.psi_r, 0.0], [0.0, 1.0]];
            out.d2phi[0][0][0] = pr.psi_rr;
            out.dt_phi = [pr.psi_t, 0.0];
            out.dt_dphi[0][0] = pr.psi_rt;
            out.dtt_dphi[0][0] = pr.psi_rtt;
            out.jacobian = pr.psi_r;
            return out;
        }
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let pr = self.profile(m, r, t);
        let u = [x[0] / r, x[1] / r];
        let g = pr.psi / r;
        let g1 = pr.psi_r / r - pr.psi / (r * r);
        let g2 = pr.psi_rr / r - 2.0 * pr.psi_r / (r * r) + 2.0 * pr.psi / (r * r * r);
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for i in 0..2 {
            out.phi[i] = g * x[i];
            out.dt_phi[i] = pr.psi_t * u[i];
            for j in 0..2 {
                let radial = u[i] * u[j];
                let tangential = delta(i, j) - radial;
                out.dphi[i][j] = g * tangential + pr.psi_r * radial;
                out.dt_dphi[i][j] = pr.psi_t / r * tangential + pr.psi_rt * radial;
                out.dtt_dphi[i][j] = pr.psi_tt / r * tangential + pr.psi_rtt * radial;
                for k in 0..2 {
                    out.d2phi[i][j][k] = g1 * (u[j] * delta(i, k) + u[k] * delta(i, j))
                        + g2 * r * u[i] * u[j] * u[k]
                        + g1 * u[i] * (delta(j, k) - u[j] * u[k]);
                }
            }
        }
        out.jacobian = g * pr.psi_r;
        out
    }

    /// Φ_h^m(x, t) only.
    pub fn map(&self, m: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        if self.dim() == 1 {
            return [self.profile(m, x[0], t).psi, x[1]];
        }
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let g = self.profile(m, r, t).psi / r;
        [g * x[0], g * x[1]]
    }

    /// Solves ψ(ρ, t) = target for ρ by Newton iteration.
    fn invert_profile(&self, m: usize, target: f64, t: f64) -> f64 {
        let mut rho = target;
        for _ in 0..50 {
            let p = self.profile(m, rho, t);
            let step = (p.psi - target) / p.psi_r;
            rho -= step;
            if step.abs() <= 1e-15 * (1.0 + rho.abs()) {
                break;
            }
        }
        rho
    }

    /// (Φ_h^m)⁻¹(y, t).
    pub fn inverse(&self, m: usize, y: [f64; 2], t: f64) -> [f64; 2] {
        if self.dim() == 1 {
            return [self.invert_profile(m, y[0], t), y[1]];
        }
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let rho = self.invert_profile(m, r, t);
        [y[0] * rho / r, y[1] * rho / r]
    }

    /// Φ̄_h^m(x, t) = (Φ_h^m)⁻¹(Φ_h^m(x, t), (m+1)h): Ω(t) → Ω((m+1)h).
    pub fn composed(&self, m: usize, x: [f64; 2], t: f64) -> [f64; 2] {
        self.inverse(m, self.map(m, x, t), (m + 1) as f64 * self.h)
    }

    /// ∂ₜΦ_h^m(x, (m+1)h⁻).
    pub fn velocity_at(&self, m: usize, x: [f64; 2]) -> [f64; 2] {
        if self.is_identity() {
            return [0.0, 0.0];
        }
        self.eval(m, x, (m + 1) as f64 * self.h).dt_phi
    }

    /// Interface position at time t (radius or abscissa).
    pub fn interface_at(&self, t: f64) -> Option<f64> {
        self.motion.position(t).map(|p| p.0)
    }
}

/// Velocity vectors at the nodes of each phase.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub plus: Vec<[f64; 2]>,
    pub minus: Vec<[f64; 2]>,
}

impl VelocityField {
    pub fn phase(&self, phase: Phase) -> &[[f64; 2]] {
        match phase {
            Phase::Plus => &self.plus,
            Phase::Minus => &self.minus,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.plus
            .iter()
            .chain(self.minus.iter())
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.plus.iter().chain(self.minus.iter()).all(|v| v[0] == 0.0 && v[1] == 0.0)
    }
}

/// V_h^m on the nodes of a grid for Ω((m+1)h).
pub fn velocity_field(fam: &DiffeoFamily, m: usize, grid: &TwoPhaseGrid) -> Result<VelocityField> {
    if m >= fam.steps {
        return Err(Error::InvalidParameter { name: "m", reason: format!("step {m} beyond N = {}", fam.steps) });
    }
    let at = |phase: Phase| grid.phase(phase).nodes.iter().map(|n| fam.velocity_at(m, n.pos)).collect();
    Ok(VelocityField { plus: at(Phase::Plus), minus: at(Phase::Minus) })
}

/// Measured constants of a diffeomorphism family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffeoReport {
    pub h: f64,
    /// sup ‖DΦ − I‖ (max entry) / h
    pub c0: f64,
    /// sup |∂ₜ^ℓ ∂_β Φ^α|, ℓ = 1, 2
    pub c1: f64,
    /// sup |∂_α ∂_β Φ^γ|
    pub c2: f64,
    /// sup |J − 1| / h
    pub cj: f64,
    pub samples: usize,
    /// Location (m, t, ρ) where ‖DΦ − I‖ peaks.
    pub worst: (usize, f64, f64),
}

/// Samples the family on a space-time lattice and reports its constants.
/// Fails if the measured C0 exceeds `c0_cap`.
pub fn verify_diffeo_bounds(fam: &DiffeoFamily, c0_cap: Option<f64>) -> Result<DiffeoReport> {
    let mut rep = DiffeoReport { h: fam.h, ..Default::default() };
    if fam.is_identity() {
        return Ok(rep);
    }
    let (rmin, rmax, angles): (f64, f64, Vec<f64>) = if fam.dim() == 1 {
        (-0.99, 0.99, vec![0.0])
    } else {
        (0.05, 1.0, (0..7).map(|k| 0.3 + k as f64 * std::f64::consts::TAU / 7.0).collect())
    };
    let nr = 400;
    let nt = 6;
    let mut dev_max = 0.0f64;
    for m in 0..fam.steps {
        for kt in 1..=nt {
            let t = (m as f64 + kt as f64 / nt as f64) * fam.h;
            for kr in 0..=nr {
                let rho = rmin + (rmax - rmin) * kr as f64 / nr as f64;
                for &theta in &angles {
                    let x = if fam.dim() == 1 { [rho, 0.0] } else { [rho * theta.cos(), rho * theta.sin()] };
                    let e = fam.eval(m, x, t);
                    rep.samples += 1;
                    let d = fam.dim();
                    let mut dev = 0.0f64;
                    for i in 0..d {
                        for j in 0..d {
                            let id = if i == j { 1.0 } else { 0.0 };
                            dev = dev.max((e.dphi[i][j] - id).abs());
                            rep.c1 = rep.c1.max(e.dt_dphi[i][j].abs()).max(e.dtt_dphi[i][j].abs());
                            for k in 0..d {
                                rep.c2 = rep.c2.max(e.d2phi[i][j][k].abs());
                            }
                        }
                    }
                    if dev > dev_max {
                        dev_max = dev;
                        rep.worst = (m, t, rho);
                    }
                    rep.cj = rep.cj.max((e.jacobian - 1.0).abs() / fam.h);
                }
            }
        }
    }
    rep.c0 = dev_max / fam.h;
    if let Some(cap) = c0_cap {
        if rep.c0 > cap {
            let (m, t, r) = rep.worst;
            return Err(Error::DiffeoBound { m, t, r, ratio: rep.c0, cap });
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_position_and_derivatives() {
        let m = InterfaceMotion::PrescribedPoint1D { coeffs: vec![0.1, 0.5, -2.0] };
        let (p, dp, ddp) = m.position(0.3).unwrap();
        assert!((p - (0.1 + 0.15 - 0.18)).abs() < 1e-15);
        assert!((dp - (0.5 - 1.2)).abs() < 1e-15);
        assert!((ddp + 4.0).abs() < 1e-15);
    }

    #[test]
    fn bump_is_c2_at_the_edges() {
        let w = 0.3;
        for s in [w, -w] {
            let inside = bump(s * (1.0 - 1e-9), w);
            assert!(inside[0].abs() < 1e-14 && inside[1].abs() < 1e-12 && inside[2].abs() < 1e-6);
        }
        let b0 = bump(0.0, w);
        assert_eq!(b0[0], 1.0);
        assert_eq!(b0[1], 0.0);
    }
}
