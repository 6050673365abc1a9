use std::f64::consts::PI;

use harmflow::descent::StepConfig;
use harmflow::functional::TimeHat;
use harmflow::sphere::*;
use proptest::prelude::*;

fn smooth(dim: usize, cells: usize, l: usize, seed: u64) -> SphereField {
    let grid = TorusGrid::new(dim, cells).unwrap();
    SphereField::from_recipe(grid, l, &SphereRecipe::SmoothRandom { seed, amplitude: 0.8 }).unwrap()
}

fn bump_test(t: f64) -> SphereTest {
    SphereTest { center: [0.5, 0.5], radius: 0.3, time: TimeHat { start: 0.2 * t, peak: 0.5 * t, end: 0.8 * t } }
}

#[test]
fn constant_field_is_returned_unchanged() {
    let grid = TorusGrid::new(2, 6).unwrap();
    let u = SphereField::from_recipe(grid, 3, &SphereRecipe::Constant { value: vec![0.0, 0.6, 0.8] }).unwrap();
    let r = sphere_minimize_step(&u, 0.01, &StepConfig::for_step(0.01)).unwrap();
    assert_eq!(r.field, u);
    assert_eq!(r.iterations, 0);
    let (hist, trace) = run_sphere_flow(&u, 0.05, 4, 0.9, None).unwrap();
    assert!(trace.rows.iter().all(|r| r.dirichlet == 0.0 && r.kinetic == 0.0));
    let w = wedge_residual(&hist, &bump_test(0.05), WedgePairing::Linear);
    assert!(w.iter().all(|&x| x == 0.0));
}

#[test]
fn step_satisfies_the_discrete_equation() {
    for (dim, cells, l) in [(1, 32, 2), (1, 64, 3), (2, 12, 3)] {
        let u0 = smooth(dim, cells, l, 5);
        let h = 0.005;
        let r = sphere_minimize_step(&u0, h, &StepConfig::for_step(h)).unwrap();
        assert!(r.converged);
        assert!(r.energy_after.total <= r.energy_before.total);
        assert!(r.field.max_norm_deviation() <= UNIT_TOL);
        let el = discrete_el_residual(&r.field, &u0, h).unwrap();
        assert!(el <= 1e-6, "dim {dim}: {el}");
        // The warm start itself is far from stationary.
        assert!(discrete_el_residual(&u0, &u0, h).unwrap() > 1e-2);
    }
}

/// Exact minimum over the angle lattice 2π/K on a 4-node ring, by dynamic
/// programming around the cycle with the first angle fixed.
fn lattice_minimum(theta_tilde: &[f64; 4], c: f64, vol: f64, h: f64, k: usize) -> (f64, [usize; 4]) {
    let step = 2.0 * PI / k as f64;
    let pair: Vec<f64> = (0..k).map(|d| c * (2.0 - 2.0 * (d as f64 * step).cos())).collect();
    let node = |i: usize, a: usize| vol / h * (2.0 - 2.0 * (a as f64 * step - theta_tilde[i]).cos());
    let diff = |a: usize, b: usize| pair[(a + k - b) % k];
    let mut best = (f64::INFINITY, [0; 4]);
    for a0 in 0..k {
        // cost[a] = best energy of nodes 0..=j ending in angle a.
        let mut cost: Vec<f64> = (0..k).map(|a| node(0, a0) + diff(a0, a) + node(1, a)).collect();
        let mut back = Vec::new();
        for j in 2..4 {
            let mut next = vec![f64::INFINITY; k];
            let mut arg = vec![0; k];
            for b in 0..k {
                for a in 0..k {
                    let v = cost[a] + diff(a, b);
                    if v < next[b] {
                        next[b] = v;
                        arg[b] = a;
                    }
                }
                next[b] += node(j, b);
            }
            back.push(arg);
            cost = next;
        }
        for a3 in 0..k {
            let v = cost[a3] + diff(a3, a0);
            if v < best.0 {
                let a2 = back[1][a3];
                let a1 = back[0][a2];
                best = (v, [a0, a1, a2, a3]);
            }
        }
    }
    best
}

#[test]
fn ring_step_matches_angle_lattice_search() {
    let grid = TorusGrid::new(1, 4).unwrap();
    let theta_tilde: [f64; 4] = [0.1, 1.3, 2.0, -0.4];
    let data: Vec<f64> = theta_tilde.iter().flat_map(|t| [t.cos(), t.sin()]).collect();
    let u = SphereField::new(grid, 2, data).unwrap();
    let h = 0.05;
    let r = sphere_minimize_step(&u, h, &StepConfig::for_step(h)).unwrap();
    let k = 400;
    let (lattice, angles) = lattice_minimum(&theta_tilde, grid.edge_coef(), grid.volume(), h, k);
    let e = r.energy_after.total;
    // The continuous minimum lies below the lattice one, by at most the
    // curvature times the squared half spacing per node.
    let delta = PI / k as f64;
    let hess = 2.0 * (2.0 * grid.edge_coef() * 2.0 + grid.volume() / h);
    assert!(e <= lattice + 1e-12, "{e} vs {lattice}");
    assert!(lattice - e <= 4.0 * hess * delta * delta, "{e} vs {lattice}");
    for i in 0..4 {
        let got = r.field.node(i)[1].atan2(r.field.node(i)[0]);
        let lat = angles[i] as f64 * 2.0 * PI / k as f64;
        let d = (got - lat).rem_euclid(2.0 * PI);
        assert!(d.min(2.0 * PI - d) <= 4.0 * delta, "node {i}: {got} vs {lat}");
    }
}

#[test]
fn flow_energy_inequalities_hold() {
    let u0 = smooth(1, 64, 3, 1);
    let (hist, trace) = run_sphere_flow(&u0, 0.1, 16, 0.9, None).unwrap();
    assert_eq!(hist.steps.len(), 16);
    assert!(trace.per_step_excess() <= 1e-10);
    assert!(trace.energy_excess_running() <= 1e-10);
    assert!(trace.energy_excess_literal() <= 1e-10);
    assert!(trace.el_residual_max() <= 1e-6);
    assert!(trace.norm_deviation_max() <= UNIT_TOL);
    for w in trace.rows.windows(2) {
        assert!(w[1].energy.total <= w[0].dirichlet + 1e-12);
    }
    // Gap: (h²/3)·Σ kinetic, so C ≤ 1/(3T) given Σ kinetic ≤ D0.
    let c = trace.gap_constant();
    assert!(c > 0.0 && c <= 1.0 / (3.0 * 0.1) + 1e-12, "C = {c}");
    let brute: f64 = trace.rows.iter().map(|r| trace.h * trace.h / 3.0 * r.kinetic).sum();
    assert!((brute - trace.gap_total()).abs() <= 1e-12 * brute);
}

#[test]
fn attachment_shrinks_with_time_and_refinement() {
    let u0 = smooth(1, 32, 3, 2);
    let mut first = Vec::new();
    for n in [8, 16, 32] {
        let (hist, trace) = run_sphere_flow(&u0, 0.04, n, 0.9, None).unwrap();
        first.push(hist.steps[0].l2_distance_sq(&u0).unwrap());
        assert!(trace.rows[1..].iter().all(|r| r.attachment_ratio <= 1.0 + 1e-10));
    }
    assert!(first[0] > first[1] && first[1] > first[2], "{first:?}");
}

#[test]
fn wedge_residuals() {
    let u0 = smooth(1, 64, 3, 1);
    let t = 0.1;
    let mut linear = Vec::new();
    for n in [8, 16, 32] {
        let (hist, _) = run_sphere_flow(&u0, t, n, 0.9, None).unwrap();
        let test = bump_test(t);
        let end = wedge_residual(&hist, &test, WedgePairing::StepEnd);
        assert!(end.iter().all(|x| x.abs() < 1e-9), "{end:?}");
        let lin = wedge_residual(&hist, &test, WedgePairing::Linear);
        assert_eq!(lin.len(), 3);
        linear.push(lin.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let zero = SphereTest { time: TimeHat { start: 0.0, peak: 0.0, end: 0.0 }, ..test };
        assert!(wedge_residual(&hist, &zero, WedgePairing::Linear).iter().all(|&x| x == 0.0));
        let far = SphereTest { radius: 0.0, ..test };
        assert!(wedge_residual(&hist, &far, WedgePairing::Linear).iter().all(|&x| x == 0.0));
    }
    assert!(linear[0] > linear[1] && linear[1] > linear[2], "{linear:?}");
}

#[test]
fn rejects_bad_input() {
    let grid = TorusGrid::new(1, 8).unwrap();
    assert!(TorusGrid::new(3, 8).is_err());
    assert!(SphereField::new(grid, 2, vec![1.0; 16]).is_err());
    assert!(SphereField::from_raw(grid, 2, vec![0.0; 16]).is_err());
    let u = smooth(1, 8, 2, 1);
    assert!(sphere_minimize_step(&u, 0.0, &StepConfig::default()).is_err());
    assert!(run_sphere_flow(&u, 0.1, 1, 0.9, None).is_err());
    assert!(run_sphere_flow(&u, 0.1, 4, 1.5, None).is_err());
}

proptest! {
    #[test]
    fn prop_wedge_is_antisymmetric(a in prop::collection::vec(-1.0f64..1.0, 4), b in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assert!(wedge(&a, &a).iter().all(|&x| x == 0.0));
        let ab = wedge(&a, &b);
        let ba = wedge(&b, &a);
        prop_assert!(ab.iter().zip(&ba).all(|(x, y)| *x == -*y));
    }

    #[test]
    fn prop_step_keeps_unit_norm_and_descends(seed in 0u64..1000, l in 2usize..5) {
        let u = smooth(1, 12, l, seed);
        let h = 0.01;
        let r = sphere_minimize_step(&u, h, &StepConfig::for_step(h)).unwrap();
        prop_assert!(r.field.max_norm_deviation() <= UNIT_TOL);
        prop_assert!(r.energy_after.total <= r.energy_before.total);
    }
}
