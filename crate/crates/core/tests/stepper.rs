use std::f64::consts::PI;
use std::sync::Arc;

use harmflow::descent::{minimize, DescentProblem, StepConfig};
use harmflow::functional::*;
use harmflow::grid::*;
use harmflow::matcore::*;
use harmflow::motion::VelocityField;
use harmflow::stepper::*;
use proptest::prelude::*;

type M = SquareMatrix<f64>;

fn initial(geometry: Geometry, n: usize, recipe: InitialRecipe) -> PairedField<f64> {
    make_initial(Arc::new(TwoPhaseGrid::new(geometry).unwrap()), n, &recipe).unwrap()
}

fn smooth(geometry: Geometry, n: usize, seed: u64) -> PairedField<f64> {
    initial(geometry, n, InitialRecipe::SmoothRandom { seed, amplitude: 0.8 })
}

fn check_invariants(r: &StepResult<f64>) {
    assert!(r.field.max_orthogonality_residual() <= 1e-8);
    assert!(r.field.max_pair_residual() <= 1e-12, "{}", r.field.max_pair_residual());
    assert!(r.energy_after.total <= r.energy_before.total);
}

#[test]
fn constant_pair_is_already_stationary() {
    let a = initial(Geometry::flat_2d(4, 4), 3, InitialRecipe::ConstantPair { axis: vec![0.0, 0.0, 1.0] });
    let r = minimize_step(&a, None, 0.01, &StepConfig::for_step(0.01)).unwrap();
    assert!(r.iterations <= 1);
    assert_eq!(r.field, a);
    assert_eq!(r.energy_after.total, 0.0);
}

#[test]
fn step_lowers_energy_below_the_warm_start() {
    let a = smooth(Geometry::flat_1d(32), 2, 3);
    let h = 0.01;
    let r = minimize_step(&a, None, h, &StepConfig::for_step(h)).unwrap();
    check_invariants(&r);
    assert_eq!(r.energy_before.total, dirichlet_energy(&a));
    assert!(r.energy_after.total < r.energy_before.total);
    assert!(r.converged && r.descent_accepted);
    assert!(r.final_grad_norm <= 1e-8);
}

#[test]
fn descent_inequality_holds() {
    for (geometry, n) in [(Geometry::flat_2d(8, 8), 3), (Geometry::disk(0.5, 1.0, 5, 5, 20), 3), (Geometry::flat_1d(20), 4)] {
        let a = smooth(geometry, n, 5);
        let h = 0.02;
        let r = minimize_step(&a, None, h, &StepConfig::for_step(h)).unwrap();
        check_invariants(&r);
        let kinetic = l2_distance_sq(&r.field, &a).unwrap() / h;
        assert!(kinetic <= dirichlet_energy(&a) - dirichlet_energy(&r.field) + 1e-10);
    }
}

#[test]
fn converged_step_satisfies_euler_lagrange() {
    let a = initial(Geometry::disk(0.5, 1.0, 5, 5, 24), 3, InitialRecipe::NodalNoise { seed: 2, amplitude: 0.3 });
    let h = 0.01;
    let r = minimize_step(&a, None, h, &StepConfig::for_step(h)).unwrap();
    let tests = hat_bump_library(&r.field, &LibrarySpec::default());
    let el = euler_lagrange_residual(&r.field, &a, None, h, &tests).unwrap();
    assert_eq!(el.skipped_pairs, 0);
    assert!(el.residual <= 1e-6, "{}", el.residual);
    // The warm start itself is far from stationary.
    let tests0 = hat_bump_library(&a, &LibrarySpec::default());
    let el0 = euler_lagrange_residual(&a, &a, None, h, &tests0).unwrap();
    assert!(el0.residual > 1e-2);
}

#[test]
fn transport_term_is_minimized_too() {
    let a = smooth(Geometry::disk(0.5, 1.0, 4, 4, 16), 3, 8);
    let grid = a.grid().clone();
    let v = |p: [f64; 2]| [-p[1], p[0]];
    let vel = VelocityField {
        plus: grid.phase(Phase::Plus).nodes.iter().map(|n| v(n.pos)).collect(),
        minus: grid.phase(Phase::Minus).nodes.iter().map(|n| v(n.pos)).collect(),
    };
    let h = 0.01;
    let r = minimize_step(&a, Some(&vel), h, &StepConfig::for_step(h)).unwrap();
    check_invariants(&r);
    assert!(r.energy_after.transport != 0.0);
    let tests = hat_bump_library(&r.field, &LibrarySpec::default());
    let el = euler_lagrange_residual(&r.field, &a, Some(&vel), h, &tests).unwrap();
    assert!(el.residual <= 1e-6, "{}", el.residual);
}

#[test]
fn identical_inputs_give_identical_results() {
    let a = smooth(Geometry::flat_2d(6, 6), 3, 11);
    let cfg = StepConfig::for_step(0.05);
    let r1 = minimize_step(&a, None, 0.05, &cfg).unwrap();
    let r2 = minimize_step(&a, None, 0.05, &cfg).unwrap();
    assert_eq!(r1.field, r2.field);
    assert_eq!(r1.iterations, r2.iterations);
    assert_eq!(r1.energy_after.total.to_bits(), r2.energy_after.total.to_bits());
}

#[test]
fn energy_is_monotone_in_the_iteration_budget() {
    let a = smooth(Geometry::flat_2d(5, 5), 3, 4);
    let mut last = f64::INFINITY;
    for k in 1..12 {
        let cfg = StepConfig { max_iters: k, ..StepConfig::for_step(0.02) };
        let r = minimize_step(&a, None, 0.02, &cfg).unwrap();
        assert!(r.energy_after.total < last);
        last = r.energy_after.total;
    }
}

#[test]
fn infeasible_warm_starts_are_rejected() {
    let a = smooth(Geometry::flat_1d(6), 3, 1);
    let bent = a.map_values(|_, _, m| m.scale(1.001));
    assert!(matches!(minimize_step(&bent, None, 0.1, &StepConfig::default()), Err(harmflow::Error::NotOrthogonal { .. })));
    let mut unpaired = a.clone();
    let p = a.grid().pairs()[0];
    unpaired.values_mut(Phase::Minus)[p.minus] = M::reflection(&[0.6, 0.8, 0.0]);
    assert!(matches!(
        minimize_step(&unpaired, None, 0.1, &StepConfig::default()),
        Err(harmflow::Error::NotMinimalPair { .. })
    ));
    let bad_cfg = StepConfig { backtrack: 1.5, ..StepConfig::default() };
    assert!(minimize_step(&a, None, 0.1, &bad_cfg).is_err());
    assert!(minimize_step(&a, None, -0.1, &StepConfig::default()).is_err());
}

/// The start sits on a unit jump: every move raises the energy by about one
/// although the reported gradient promises descent.
struct Kink;

impl DescentProblem<f64> for Kink {
    type Point = Vec<f64>;
    fn metric(&self) -> &[f64] {
        &[1.0, 1.0]
    }
    fn energy(&self, x: &Vec<f64>) -> f64 {
        let r = x[0] * x[0] + 3.0 * x[1] * x[1];
        if x[0] == 1.0 && x[1] == 1.0 {
            r - 4.0
        } else {
            r
        }
    }
    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        vec![2.0 * x[0], 6.0 * x[1]]
    }
    fn retract(&self, x: &Vec<f64>, dir: &[f64], tau: f64) -> Vec<f64> {
        vec![x[0] - tau * dir[0], x[1] - tau * dir[1]]
    }
}

#[test]
fn failed_line_search_reports_stagnation() {
    match minimize(&Kink, vec![1.0, 1.0], &StepConfig::default()) {
        Err(harmflow::Error::Stagnation { halvings, iteration, grad_norm, .. }) => {
            assert_eq!(halvings, 60);
            assert_eq!(iteration, 0);
            assert!(grad_norm > 1.0);
        }
        other => panic!("{other:?}"),
    }
}

struct Quadratic;

impl DescentProblem<f64> for Quadratic {
    type Point = Vec<f64>;
    fn metric(&self) -> &[f64] {
        &[1.0, 1.0, 1.0]
    }
    fn energy(&self, x: &Vec<f64>) -> f64 {
        (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 100.0 * x[2].powi(2)
    }
    fn gradient(&self, x: &Vec<f64>) -> Vec<f64> {
        vec![2.0 * (x[0] - 1.0), 20.0 * (x[1] + 2.0), 200.0 * x[2]]
    }
    fn retract(&self, x: &Vec<f64>, dir: &[f64], tau: f64) -> Vec<f64> {
        x.iter().zip(dir).map(|(a, d)| a - tau * d).collect()
    }
}

#[test]
fn quasi_newton_solves_a_quadratic() {
    let out = minimize(&Quadratic, vec![5.0, 5.0, 5.0], &StepConfig::default()).unwrap();
    assert!(out.converged);
    assert!((out.point[0] - 1.0).abs() < 1e-8 && (out.point[1] + 2.0).abs() < 1e-9 && out.point[2].abs() < 1e-10);
    assert!(out.iterations < 60, "{}", out.iterations);
}

fn rot(t: f64) -> M {
    M::from_rows(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]).unwrap()
}

fn refl(t: f64) -> M {
    M::from_rows(&[&[t.cos(), t.sin()], &[t.sin(), -t.cos()]]).unwrap()
}

/// Exact minimum over a uniform angle lattice of one phase chain, by dynamic
/// programming along the chain.
fn lattice_chain_minimum(pg: &PhaseGrid, target: &[M], h: f64, param: fn(f64) -> M, k: usize) -> f64 {
    let angles: Vec<f64> = (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect();
    let cos_diff: Vec<f64> = (0..k).map(|d| (2.0 * PI * d as f64 / k as f64).cos()).collect();
    // nodes are ordered along the chain in one dimension
    let node_cost = |i: usize| -> Vec<f64> {
        let vol = pg.nodes[i].volume;
        angles.iter().map(|&t| vol / h * param(t).dist_sq(&target[i])).collect()
    };
    let coef = |i: usize| {
        pg.edges.iter().find(|e| (e.a == i && e.b == i + 1) || (e.a == i + 1 && e.b == i)).map(|e| e.coef).unwrap()
    };
    let mut best = node_cost(0);
    for i in 1..pg.len() {
        let c = coef(i - 1);
        let here = node_cost(i);
        let mut next = vec![f64::INFINITY; k];
        for (j, nj) in next.iter_mut().enumerate() {
            let mut m = f64::INFINITY;
            for (l, bl) in best.iter().enumerate() {
                let d = (j + k - l) % k;
                let v = bl + c * (4.0 - 4.0 * cos_diff[d]);
                if v < m {
                    m = v;
                }
            }
            *nj = m + here[j];
        }
        best = next;
    }
    best.into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn tiny_instance_matches_lattice_search() {
    // Three interior nodes per phase plus one interface pair, n = 2. The
    // reflection coupling then puts no constraint between the phases, so the
    // lattice minimum splits into one chain per phase.
    let a = initial(Geometry::flat_1d(3), 2, InitialRecipe::SmoothRandom { seed: 21, amplitude: 1.2 });
    let grid = a.grid().clone();
    assert_eq!(grid.phase(Phase::Plus).len(), 4);
    assert_eq!(grid.pairs().len(), 1);
    let h = 0.05;
    let r = minimize_step(&a, None, h, &StepConfig::for_step(h)).unwrap();
    let k = 6284;
    let lattice = lattice_chain_minimum(grid.phase(Phase::Plus), a.values(Phase::Plus), h, rot, k)
        + lattice_chain_minimum(grid.phase(Phase::Minus), a.values(Phase::Minus), h, refl, k);
    let got = r.energy_after.total;
    assert!(got <= lattice + 1e-12, "{got} vs {lattice}");
    assert!(lattice - got < 1e-4, "{got} vs {lattice}");
}

#[test]
fn single_precision_step_runs() {
    let a = smooth(Geometry::flat_2d(4, 4), 3, 2);
    let a32: PairedField<f32> = a.cast();
    let cfg = StepConfig { tol_grad: 1e-3, ..StepConfig::for_step(0.05) };
    let r = minimize_step(&a32, None, 0.05f32, &cfg).unwrap();
    assert!(r.energy_after.total <= r.energy_before.total);
    assert!(r.field.max_orthogonality_residual() <= 1e-4);
    let r64 = minimize_step(&a, None, 0.05, &StepConfig::for_step(0.05)).unwrap();
    assert!((r.energy_after.total as f64 - r64.energy_after.total).abs() < 1e-3 * r64.energy_after.total);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn prop_step_outputs_are_valid(seed in any::<u64>(), n in 2usize..5, noise in any::<bool>()) {
        let recipe = if noise {
            InitialRecipe::NodalNoise { seed, amplitude: 0.5 }
        } else {
            InitialRecipe::SmoothRandom { seed, amplitude: 1.0 }
        };
        let a = initial(Geometry::flat_2d(3, 4), n, recipe);
        let h = 0.03;
        let r = minimize_step(&a, None, h, &StepConfig::for_step(h)).unwrap();
        prop_assert!(r.field.max_orthogonality_residual() <= 1e-8);
        prop_assert!(r.field.max_pair_residual() <= 1e-12);
        prop_assert!(r.energy_after.total <= r.energy_before.total);
        let kinetic = l2_distance_sq(&r.field, &a).unwrap() / h;
        prop_assert!(kinetic <= dirichlet_energy(&a) - dirichlet_energy(&r.field) + 1e-10);
        for phase in Phase::BOTH {
            for m in r.field.values(phase) {
                prop_assert_eq!(m.det().signum() as i8, phase.det_sign());
            }
        }
    }
}
