//! Riemannian quasi-Newton descent with Armijo backtracking, shared
//! by the matrix stepper and the sphere model.

use serde::{Deserialize, Serialize};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Halvings tried before a line search gives up.
pub const MAX_HALVINGS: usize = 60;

/// Curvature constant of the slope test used below the noise level.
const WOLFE_CURVATURE: f64 = 0.9;

/// Relative size of energy differences treated as rounding noise.
pub const NOISE_LEVEL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepConfig {
    pub max_iters: usize,
    /// Stop once the metric norm of the Riemannian gradient is this small.
    pub tol_grad: f64,
    /// First trial step; later searches start from the last accepted one.
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub reorthogonalize_every: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self::for_step(0.01)
    }
}

impl StepConfig {
    /// Defaults with the initial step tied to the time step, τ₀ = h/2.
    pub fn for_step(h: f64) -> Self {
        Self { max_iters: 20_000, tol_grad: 1e-8, initial_step: 0.5 * h, backtrack: 0.5, armijo: 1e-4, reorthogonalize_every: 25 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad", "must be positive");
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return bad("initial_step", "must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack", "must lie in (0, 1)");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo", "must lie in (0, 1)");
        }
        if self.reorthogonalize_every == 0 {
            return bad("reorthogonalize_every", "must be positive");
        }
        Ok(())
    }
}

/// A smooth function on a product of matrix groups and spheres, seen through
/// flat tangent coordinates with a constant diagonal metric.
pub trait DescentProblem<T: Scalar> {
    type Point: Clone;

    /// Diagonal metric weights, one per tangent coordinate.
    fn metric(&self) -> &[T];
    fn energy(&self, x: &Self::Point) -> T;
    /// E(new) − E(old); override when a cancellation-free form exists.
    fn energy_difference(&self, old: &Self::Point, new: &Self::Point) -> T {
        self.energy(new) - self.energy(old)
    }
    /// Riemannian gradient in tangent coordinates.
    fn gradient(&self, x: &Self::Point) -> Vec<T>;
    /// Moves x along −τ·dir.
    fn retract(&self, x: &Self::Point, dir: &[T], tau: T) -> Self::Point;
    /// Makes a tangent vector from the previous point tangent at x.
    fn transport(&self, _x: &Self::Point, _v: &mut [T]) {}
    /// Approximate inverse Hessian applied to a gradient; must be symmetric
    /// positive definite for the metric.
    fn precondition(&self, g: &[T]) -> Vec<T> {
        g.to_vec()
    }
    /// Removes accumulated rounding drift from the constraints.
    fn reorthogonalize(&self, _x: &mut Self::Point) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DescentOutcome<P, T> {
    pub point: P,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub grad_norm: T,
    pub converged: bool,
}

fn inner<T: Scalar>(w: &[T], a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for ((wi, ai), bi) in w.iter().zip(a).zip(b) {
        acc += *wi * *ai * *bi;
    }
    acc
}

/// Correction pairs kept by the quasi-Newton update.
const MEMORY: usize = 8;

/// Limited-memory BFGS in the tangent coordinates, seeded with the
/// problem's preconditioner, with Armijo backtracking.
pub fn minimize<T: Scalar, P: DescentProblem<T>>(
    problem: &P,
    start: P::Point,
    cfg: &StepConfig,
) -> Result<DescentOutcome<P::Point, T>> {
    cfg.validate()?;
    let w = problem.metric().to_vec();
    let mut x = start;
    let mut g = problem.gradient(&x);
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(MEMORY);
    let mut accepted = 0;
    for iteration in 0..cfg.max_iters {
        let grad_norm = inner(&w, &g, &g).sqrt();
        if grad_norm.as_f64() <= cfg.tol_grad {
            return Ok(DescentOutcome { point: x, iterations: iteration, accepted_steps: accepted, grad_norm, converged: true });
        }
        let (mut dir, mut tau) = if history.is_empty() {
            (problem.precondition(&g), T::lit(cfg.initial_step))
        } else {
            (two_loop(problem, &w, &g, &history), T::one())
        };
        let mut slope = inner(&w, &g, &dir);
        if !(slope > T::zero()) {
            history.clear();
            dir = problem.precondition(&g);
            tau = T::lit(cfg.initial_step);
            slope = inner(&w, &g, &dir);
        }
        let (next, step) = match line_search(problem, &x, &dir, slope, tau, cfg) {
            Some(found) => found,
            None if !history.is_empty() => {
                // Retry along the preconditioned gradient before giving up.
                history.clear();
                dir = problem.precondition(&g);
                slope = inner(&w, &g, &dir);
                match line_search(problem, &x, &dir, slope, T::lit(cfg.initial_step), cfg) {
                    Some(found) => found,
                    None => return Err(stagnation(problem, &x, iteration, grad_norm)),
                }
            }
            None => return Err(stagnation(problem, &x, iteration, grad_norm)),
        };
        x = next;
        accepted += 1;
        if accepted % cfg.reorthogonalize_every == 0 {
            problem.reorthogonalize(&mut x)?;
        }
        let g_new = problem.gradient(&x);
        let mut s_vec: Vec<T> = dir.iter().map(|d| -step * *d).collect();
        problem.transport(&x, &mut s_vec);
        let y: Vec<T> = g_new.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = inner(&w, &s_vec, &y);
        if sy > T::lit(1e-14) * inner(&w, &y, &y).sqrt() * inner(&w, &s_vec, &s_vec).sqrt() {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s_vec, y, T::one() / sy));
        }
        for (sk, _, _) in history.iter_mut() {
            problem.transport(&x, sk);
        }
        g = g_new;
    }
    let grad_norm = inner(&w, &g, &g).sqrt();
    Ok(DescentOutcome { point: x, iterations: cfg.max_iters, accepted_steps: accepted, grad_norm, converged: false })
}

/// H·g for the inverse-Hessian approximation; the step is then −τ·H·g.
fn two_loop<T: Scalar, P: DescentProblem<T>>(problem: &P, w: &[T], g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = *rho * inner(w, s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * *yi;
        }
        alphas.push(alpha);
    }
    let mut r = problem.precondition(&q);
    if let Some((s, y, _)) = history.back() {
        let py = problem.precondition(y);
        let gamma = inner(w, s, y) / inner(w, y, &py);
        for ri in r.iter_mut() {
            *ri *= gamma;
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = *rho * inner(w, y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (alpha - beta) * *si;
        }
    }
    r
}

fn stagnation<T: Scalar, P: DescentProblem<T>>(problem: &P, x: &P::Point, iteration: usize, grad_norm: T) -> Error {
    Error::Stagnation { iteration, halvings: MAX_HALVINGS, grad_norm: grad_norm.as_f64(), energy: problem.energy(x).as_f64() }
}

fn line_search<T: Scalar, P: DescentProblem<T>>(
    problem: &P,
    x: &P::Point,
    dir: &[T],
    slope: T,
    tau0: T,
    cfg: &StepConfig,
) -> Option<(P::Point, T)> {
    // Energy changes below this are rounding noise; there the sufficient
    // decrease is judged from the slope at the trial point instead.
    let noise = T::lit(NOISE_LEVEL) * (problem.energy(x).abs() + T::one());
    let w = problem.metric();
    let mut tau = tau0;
    for _ in 0..=MAX_HALVINGS {
        let trial = problem.retract(x, dir, tau);
        let de = problem.energy_difference(x, &trial);
        if de.abs() > noise {
            if de <= -T::lit(cfg.armijo) * tau * slope {
                return Some((trial, tau));
            }
        } else {
            let g = problem.gradient(&trial);
            let mut d = dir.to_vec();
            problem.transport(&trial, &mut d);
            // Approximate Wolfe conditions on φ'(τ) = −⟨∇E(trial), d⟩:
            // −σ|φ'(0)| ≤ φ'(τ) ≤ (1 − 2c)|φ'(0)|.
            let dphi = -inner(w, &g, &d);
            if dphi <= (T::one() - T::lit(2.0 * cfg.armijo)) * slope && dphi >= -T::lit(WOLFE_CURVATURE) * slope {
                return Some((trial, tau));
            }
        }
        tau *= T::lit(cfg.backtrack);
    }
    None
}
