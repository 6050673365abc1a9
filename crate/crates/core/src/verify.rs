//! Randomized checks of the matrix algebra behind the interface conditions:
//! the V1..V5 splitting, tangent and normal spaces of O(n), and the four
//! equivalent forms of the Neumann jump condition at a minimal pair.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    expm, pair_residual_raw, projector_trace, random_antisym, random_matrix, random_orthogonal, random_symmetric,
    random_unit, v4_component, v_basis, v_decompose, v_dimensions, SquareMatrix,
};
use crate::rng::{stream, trial_rng, StdRng};
use crate::Mat;

/// A condition holds when its residual is at most this (relative to the data).
pub const HOLD_TOL: f64 = 1e-12;
/// A condition fails when its residual exceeds this; in between is undecided.
pub const FAIL_TOL: f64 = 1e-10;
/// Pair residual accepted by `check_equivalences`.
pub const PAIR_TOL: f64 = 1e-10;

/// Verdict of one condition inside the dead band scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

impl Verdict {
    fn of(residual: f64) -> Self {
        if residual <= HOLD_TOL {
            Verdict::Holds
        } else if residual > FAIL_TOL {
            Verdict::Fails
        } else {
            Verdict::Undecided
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub residual: f64,
    pub verdict: Verdict,
}

impl Condition {
    fn new(residual: f64) -> Self {
        Self { residual, verdict: Verdict::of(residual) }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    /// Commutator identities: Aᵀ∂A − ∂AᵀA and A∂Aᵀ − ∂AAᵀ agree across the pair.
    pub m1: Condition,
    /// ∂A₊ = ∂A₋.
    pub m2: Condition,
    /// A₊ᵀ∂A₊ = A₋ᵀ∂A₋, common value in V4 for the pair axis n.
    pub m3: Condition,
    /// ∂A₊A₊ᵀ = ∂A₋A₋ᵀ, common value in V4 for the image axis A₊n.
    pub m4: Condition,
    /// max ‖sym(A±ᵀ∂A±)‖: how far the normal derivatives are from tangent.
    pub tangency: f64,
    pub axis: Vec<f64>,
    /// The common A±ᵀ∂A± when M3 holds.
    #[serde(skip)]
    pub w: Option<Mat>,
    /// No condition holds while another fails.
    pub consistent: bool,
}

impl EquivalenceReport {
    pub fn conditions(&self) -> [&Condition; 4] {
        [&self.m1, &self.m2, &self.m3, &self.m4]
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    x / (1.0 + scale)
}

/// Evaluates the four conditions for a minimal pair and normal derivatives.
pub fn check_equivalences(a_plus: &Mat, a_minus: &Mat, d_plus: &Mat, d_minus: &Mat) -> Result<EquivalenceReport> {
    let n = a_plus.dim();
    for m in [a_minus, d_plus, d_minus] {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
        }
    }
    let (pair_res, axis) = pair_residual_raw(a_plus, a_minus);
    if !(pair_res <= PAIR_TOL) {
        return Err(Error::NotMinimalPair { pair: 0, residual: pair_res });
    }
    let scale = d_plus.norm() + d_minus.norm();
    let left = |a: &Mat, d: &Mat| a.tr_mul(d);
    let right = |a: &Mat, d: &Mat| d.mul_tr(a);

    let (wp, wm) = (left(a_plus, d_plus), left(a_minus, d_minus));
    let (vp, vm) = (right(a_plus, d_plus), right(a_minus, d_minus));
    let tangency = wp.sym().norm().max(wm.sym().norm());

    // Aᵀ∂A − ∂AᵀA = 2·antisym(Aᵀ∂A), and A∂Aᵀ − ∂AAᵀ = −2·antisym(∂AAᵀ).
    let m1 = (&wp.antisym() - &wm.antisym()).norm().max((&vp.antisym() - &vm.antisym()).norm()) * 2.0;
    let m2 = (d_plus - d_minus).norm();

    let image: Vec<f64> = a_plus.mul_vec(&axis);
    let common = |p: &Mat, m: &Mat, ax: &[f64]| {
        let w = (p + m).scale(0.5);
        let off = v_decompose(&w, ax).map(|s| (&w - s.v(4)).norm()).unwrap_or(f64::INFINITY);
        ((p - m).norm().max(off), w)
    };
    let (m3, w3) = common(&wp, &wm, &axis);
    let (m4, _) = common(&vp, &vm, &image);

    let report = |x: f64| Condition::new(rel(x, scale));
    let mut out = EquivalenceReport {
        m1: report(m1),
        m2: report(m2),
        m3: report(m3),
        m4: report(m4),
        tangency: rel(tangency, scale),
        axis,
        w: None,
        consistent: true,
    };
    if out.m3.holds() {
        out.w = Some(w3);
    }
    let verdicts = out.conditions().map(|c| c.verdict);
    out.consistent = !(verdicts.contains(&Verdict::Holds) && verdicts.contains(&Verdict::Fails));
    Ok(out)
}

/// How a random trial builds the normal derivatives ∂A± = A±W±.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// W₊ = W₋ ∈ V4: every condition holds.
    CommonV4,
    /// W₊ = W₋ with a V3 component: every condition fails.
    WithV3,
    /// W₊, W₋ independent antisymmetric.
    Independent,
    /// W₋ = RW₊R: the second commutator identity holds, the rest fail.
    Conjugate,
}

impl Construction {
    pub const ALL: [Construction; 4] =
        [Construction::CommonV4, Construction::WithV3, Construction::Independent, Construction::Conjugate];

    fn expect_holds(self) -> bool {
        self == Construction::CommonV4
    }
}

/// Random W ∈ V4(axis) as a combination of the basis.
fn random_v4(rng: &mut StdRng, axis: &[f64]) -> Result<Mat> {
    let basis = v_basis::<f64>(4, axis)?;
    let mut w = SquareMatrix::zeros(axis.len());
    for b in basis {
        let c: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        w.axpy(c, &b);
    }
    Ok(w)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConstructionTally {
    pub trials: usize,
    /// Trials whose verdicts all matched the construction's expectation.
    pub as_expected: usize,
    pub inconsistent: usize,
    pub undecided: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceSuiteReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub common_v4: ConstructionTally,
    pub with_v3: ConstructionTally,
    pub independent: ConstructionTally,
    pub conjugate: ConstructionTally,
    /// Largest distance between the recovered and the constructed W.
    pub w_recovery_max: f64,
    pub inconsistencies: usize,
    pub passed: bool,
}

/// Random minimal pairs with each construction in turn.
pub fn equivalence_suite(n: usize, trials: usize, seed: u64) -> Result<EquivalenceSuiteReport> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let mut tallies: [ConstructionTally; 4] = Default::default();
    let mut w_recovery = 0.0f64;
    for t in 0..trials {
        let mut rng = trial_rng(seed, stream::VERIFY, (n * 1_000_000 + t) as u64);
        let kind = Construction::ALL[t % 4];
        let a_plus = random_orthogonal::<f64, _>(&mut rng, n, 1).into_mat();
        let axis = random_unit::<f64, _>(&mut rng, n);
        let r = SquareMatrix::reflection(&axis);
        let a_minus = a_plus.matmul(&r);
        let w4 = random_v4(&mut rng, &axis)?;
        let (wp, wm) = match kind {
            Construction::CommonV4 => (w4.clone(), w4.clone()),
            Construction::WithV3 => {
                let s = v_decompose(&random_antisym::<f64, _>(&mut rng, n), &axis)?;
                let mut v3 = s.v(3).clone();
                if v3.norm() < 1e-3 {
                    v3 = v_basis::<f64>(3, &axis)?[0].clone();
                }
                let w = &w4 + &v3;
                (w.clone(), w)
            }
            Construction::Independent => (random_antisym(&mut rng, n), random_antisym(&mut rng, n)),
            Construction::Conjugate => {
                let mut w = random_antisym::<f64, _>(&mut rng, n);
                if (&w - &v4_component(&w, &axis)).norm() < 1e-3 {
                    w = &w + &v_basis::<f64>(3, &axis)?[0];
                }
                let conj = r.matmul(&w).matmul(&r);
                (w, conj)
            }
        };
        let rep = check_equivalences(&a_plus, &a_minus, &a_plus.matmul(&wp), &a_minus.matmul(&wm))?;
        let tally = &mut tallies[t % 4];
        tally.trials += 1;
        let verdicts = rep.conditions().map(|c| c.verdict);
        if verdicts.contains(&Verdict::Undecided) {
            tally.undecided += 1;
        }
        if !rep.consistent {
            tally.inconsistent += 1;
        }
        let expected = match kind {
            Construction::Conjugate => {
                // Only the second identity of M1 holds; M1 as a whole fails.
                verdicts.iter().all(|v| *v == Verdict::Fails)
            }
            k if k.expect_holds() => verdicts.iter().all(|v| *v == Verdict::Holds),
            _ => verdicts.iter().all(|v| *v == Verdict::Fails),
        };
        if expected {
            tally.as_expected += 1;
        }
        if let (Construction::CommonV4, Some(w)) = (kind, &rep.w) {
            w_recovery = w_recovery.max((w - &w4).norm());
        }
    }
    let [common_v4, with_v3, independent, conjugate] = tallies;
    let inconsistencies = [&common_v4, &with_v3, &independent, &conjugate].iter().map(|t| t.inconsistent).sum();
    let all_expected = [&common_v4, &with_v3, &independent, &conjugate].iter().all(|t| t.as_expected == t.trials);
    Ok(EquivalenceSuiteReport {
        n,
        trials,
        seed,
        passed: inconsistencies == 0 && all_expected && w_recovery <= HOLD_TOL * 100.0,
        common_v4,
        with_v3,
        independent,
        conjugate,
        w_recovery_max: w_recovery,
        inconsistencies,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VPerpReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub dims: [usize; 5],
    /// Projector traces, which must equal `dims`.
    pub measured_dims: [f64; 5],
    pub basis_sizes: [usize; 5],
    pub reconstruction_max: f64,
    pub orthogonality_max: f64,
    /// Each component decomposes into itself.
    pub idempotence_max: f64,
    /// Antisymmetric input has no V1, V2, V5 part; symmetric input no V3, V4 part.
    pub antisym_split_max: f64,
    pub sym_split_max: f64,
    /// ⟨(n⊗n)X, Y⟩ for Y ∈ V4.
    pub nn_x_against_v4_max: f64,
    /// Largest deviation of the Gram matrix of all bases from the identity.
    pub basis_gram_max: f64,
    pub passed: bool,
}

/// Randomized checks of the V1..V5 splitting for n×n matrices.
pub fn check_v_perp(n: usize, trials: usize, seed: u64) -> Result<VPerpReport> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let dims = v_dimensions(n);
    let mut rep = VPerpReport {
        n,
        trials,
        seed,
        dims,
        measured_dims: [0.0; 5],
        basis_sizes: [0; 5],
        reconstruction_max: 0.0,
        orthogonality_max: 0.0,
        idempotence_max: 0.0,
        antisym_split_max: 0.0,
        sym_split_max: 0.0,
        nn_x_against_v4_max: 0.0,
        basis_gram_max: 0.0,
        passed: false,
    };
    let mut dims_ok = true;
    for t in 0..trials {
        let mut rng = trial_rng(seed, stream::VERIFY, (n * 1_000_000 + 500_000 + t) as u64);
        let axis = random_unit::<f64, _>(&mut rng, n);
        let x = random_matrix::<f64, _>(&mut rng, n);
        let scale = 1.0 + x.norm();
        let s = v_decompose(&x, &axis)?;
        rep.reconstruction_max = rep.reconstruction_max.max((&s.reconstruct() - &x).norm() / scale);
        for i in 0..5 {
            for j in i + 1..5 {
                rep.orthogonality_max = rep.orthogonality_max.max(s.parts[i].dot(&s.parts[j]).abs() / (scale * scale));
            }
            let again = v_decompose(&s.parts[i], &axis)?;
            for (k, part) in again.parts.iter().enumerate() {
                let target = if k == i { &s.parts[i] } else { &SquareMatrix::zeros(n) };
                rep.idempotence_max = rep.idempotence_max.max((part - target).norm() / scale);
            }
        }
        let a = v_decompose(&x.antisym(), &axis)?;
        for k in [1, 2, 5] {
            rep.antisym_split_max = rep.antisym_split_max.max(a.v(k).norm() / scale);
        }
        let sy = v_decompose(&random_symmetric::<f64, _>(&mut rng, n), &axis)?;
        for k in [3, 4] {
            rep.sym_split_max = rep.sym_split_max.max(sy.v(k).norm() / scale);
        }
        let nn_x = SquareMatrix::outer(&axis, &axis).matmul(&x);
        let y = random_v4(&mut rng, &axis)?;
        rep.nn_x_against_v4_max = rep.nn_x_against_v4_max.max(nn_x.dot(&y).abs() / (scale * (1.0 + y.norm())));
        // Dimensions and bases are checked on the first few axes only.
        if t < 8 {
            let mut all = Vec::new();
            for k in 1..=5 {
                let tr = projector_trace(k, &axis)?;
                rep.measured_dims[k - 1] = tr;
                dims_ok &= (tr - dims[k - 1] as f64).abs() <= 1e-12;
                let b = v_basis::<f64>(k, &axis)?;
                rep.basis_sizes[k - 1] = b.len();
                dims_ok &= b.len() == dims[k - 1];
                all.extend(b);
            }
            dims_ok &= all.len() == n * n;
            for (i, p) in all.iter().enumerate() {
                for (j, q) in all.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    rep.basis_gram_max = rep.basis_gram_max.max((p.dot(q) - want).abs());
                }
            }
        }
    }
    rep.passed = dims_ok
        && [
            rep.reconstruction_max,
            rep.orthogonality_max,
            rep.idempotence_max,
            rep.antisym_split_max,
            rep.sym_split_max,
            rep.nn_x_against_v4_max,
            rep.basis_gram_max,
        ]
        .iter()
        .all(|&r| r <= HOLD_TOL);
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentNormalReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub tangent_dim: usize,
    pub normal_dim: usize,
    /// ⟨BA, AW⟩ for symmetric B and antisymmetric W.
    pub normal_against_tangent_max: f64,
    /// Gram matrix of {A·E_ij} ∪ {S_ij·A} against the identity.
    pub basis_gram_max: f64,
    /// AᵀX antisymmetric for X = AW, XAᵀ symmetric for X = BA.
    pub characterization_max: f64,
    /// ‖α(t)ᵀα(t) − I‖ at t = 1e-3 for α(t) = A·exp(t·AᵀX).
    pub curve_drift_max: f64,
    /// ‖(α(δ) − α(−δ))/2δ − X‖ relative to ‖X‖.
    pub curve_velocity_max: f64,
    pub passed: bool,
}

/// Orthonormal bases of the tangent and normal spaces at A.
fn tangent_normal_bases(a: &Mat) -> (Vec<Mat>, Vec<Mat>) {
    let n = a.dim();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (mut tangent, mut normal) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i..n {
            let mut e = SquareMatrix::zeros(n);
            if i == j {
                e[(i, i)] = 1.0;
                normal.push(e.matmul(a));
                continue;
            }
            e[(i, j)] = r;
            e[(j, i)] = -r;
            tangent.push(a.matmul(&e));
            e[(j, i)] = r;
            normal.push(e.matmul(a));
        }
    }
    (tangent, normal)
}

/// Randomized checks of T_A O(n) = A·𝔸ₙ and N_A O(n) = 𝕊ₙ·A.
pub fn check_tangent_normal(n: usize, trials: usize, seed: u64) -> Result<TangentNormalReport> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let mut rep = TangentNormalReport {
        n,
        trials,
        seed,
        tangent_dim: 0,
        normal_dim: 0,
        normal_against_tangent_max: 0.0,
        basis_gram_max: 0.0,
        characterization_max: 0.0,
        curve_drift_max: 0.0,
        curve_velocity_max: 0.0,
        passed: false,
    };
    let mut dims_ok = true;
    for t in 0..trials {
        let mut rng = trial_rng(seed, stream::VERIFY, (n * 1_000_000 + 750_000 + t) as u64);
        let sign = if t % 2 == 0 { 1 } else { -1 };
        let a = random_orthogonal::<f64, _>(&mut rng, n, sign).into_mat();
        let w = random_antisym::<f64, _>(&mut rng, n);
        let b = random_symmetric::<f64, _>(&mut rng, n);
        let (x, y) = (a.matmul(&w), b.matmul(&a));
        let scale = (1.0 + x.norm()) * (1.0 + y.norm());
        rep.normal_against_tangent_max = rep.normal_against_tangent_max.max(x.dot(&y).abs() / scale);
        let char_res = a.tr_mul(&x).sym().norm() / (1.0 + x.norm());
        let char_res2 = y.mul_tr(&a).antisym().norm() / (1.0 + y.norm());
        rep.characterization_max = rep.characterization_max.max(char_res).max(char_res2);

        let alpha = |s: f64| a.matmul(&expm(&a.tr_mul(&x).scale(s)));
        rep.curve_drift_max = rep.curve_drift_max.max(alpha(1e-3).orthogonality_residual());
        let d = 1e-5;
        let fd = (&alpha(d) - &alpha(-d)).scale(0.5 / d);
        rep.curve_velocity_max = rep.curve_velocity_max.max((&fd - &x).norm() / (1.0 + x.norm()));

        if t < 8 {
            let (tb, nb) = tangent_normal_bases(&a);
            rep.tangent_dim = tb.len();
            rep.normal_dim = nb.len();
            dims_ok &= tb.len() == n * (n - 1) / 2 && nb.len() == n * (n + 1) / 2;
            let all: Vec<&Mat> = tb.iter().chain(nb.iter()).collect();
            for (i, p) in all.iter().enumerate() {
                for (j, q) in all.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    rep.basis_gram_max = rep.basis_gram_max.max((p.dot(q) - want).abs());
                }
            }
        }
    }
    rep.passed = dims_ok
        && rep.normal_against_tangent_max <= HOLD_TOL
        && rep.basis_gram_max <= HOLD_TOL
        && rep.characterization_max <= HOLD_TOL
        && rep.curve_drift_max <= 1e-9
        // Central differences at δ = 1e-5 leave O(δ²) truncation plus rounding.
        && rep.curve_velocity_max <= 1e-6;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub v_perp: Vec<VPerpReport>,
    pub tangent_normal: Vec<TangentNormalReport>,
    pub equivalences: Vec<EquivalenceSuiteReport>,
    pub passed: bool,
}

/// All three suites for each n.
pub fn run_all(ns: &[usize], trials: usize, seed: u64) -> Result<VerifyReport> {
    let mut rep = VerifyReport { seed, trials, v_perp: Vec::new(), tangent_normal: Vec::new(), equivalences: Vec::new(), passed: true };
    for &n in ns {
        let v = check_v_perp(n, trials, seed)?;
        let t = check_tangent_normal(n, trials, seed)?;
        let e = equivalence_suite(n, trials, seed)?;
        rep.passed &= v.passed && t.passed && e.passed;
        rep.v_perp.push(v);
        rep.tangent_normal.push(t);
        rep.equivalences.push(e);
    }
    Ok(rep)
}
