use harmflow::grid::{Geometry, TwoPhaseGrid};
use harmflow::motion::*;

fn circle() -> InterfaceMotion {
    InterfaceMotion::ShrinkingCircle { r0: 0.8 }
}

#[test]
fn lifespan_and_curvature_consistency() {
    let m = circle();
    assert!((m.lifespan() - 0.32).abs() < 1e-15);
    for k in 0..20 {
        let t = 0.28 * k as f64 / 20.0;
        let (r, dr, _) = m.position(t).unwrap();
        assert!((r - (0.64 - 2.0 * t).sqrt()).abs() < 1e-15);
        assert!((dr + m.curvature(t)).abs() <= 1e-12);
        assert!((m.normal_velocity(t) - m.curvature(t)).abs() <= 1e-12);
    }
    assert_eq!(InterfaceMotion::Stationary.curvature(0.3), 0.0);
    assert_eq!(InterfaceMotion::Stationary.normal_velocity(0.3), 0.0);
}

#[test]
fn stationary_family_is_identity() {
    let fam = build_diffeos(InterfaceMotion::Stationary, 0.1, 1.0).unwrap();
    let e = fam.eval(3, [0.3, -0.2], 0.35);
    assert_eq!(e.phi, [0.3, -0.2]);
    assert_eq!(e.dphi, [[1.0, 0.0], [0.0, 1.0]]);
    assert_eq!(e.dt_phi, [0.0, 0.0]);
    assert_eq!(e.jacobian, 1.0);
    let rep = verify_diffeo_bounds(&fam, Some(1.0)).unwrap();
    assert_eq!((rep.c0, rep.c1, rep.c2), (0.0, 0.0, 0.0));
    let grid = TwoPhaseGrid::new(Geometry::flat_2d(4, 4)).unwrap();
    assert!(velocity_field(&fam, 0, &grid).unwrap().is_zero());
}

#[test]
fn invalid_horizons_and_steps_are_rejected() {
    assert!(matches!(build_diffeos(circle(), 0.01, 0.32), Err(harmflow::Error::Lifespan { .. })));
    assert!(matches!(build_diffeos(circle(), 0.01, 0.29), Err(harmflow::Error::Lifespan { .. })));
    match build_diffeos(circle(), 0.28, 0.28) {
        Err(harmflow::Error::StepTooLarge { h0, .. }) => assert!(h0 > 0.0 && h0 < 0.28),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn interface_maps_to_interface() {
    let fam = build_diffeos(circle(), 0.01, 0.16).unwrap();
    for m in [0, 5, 15] {
        for k in 1..=4 {
            let t = (m as f64 + k as f64 / 4.0) * 0.01;
            let r = fam.interface_at(t).unwrap();
            let rm = fam.interface_at(m as f64 * 0.01).unwrap();
            for theta in [0.1, 1.7, 4.0] {
                let y = fam.map(m, [r * f64::cos(theta), r * f64::sin(theta)], t);
                assert!(((y[0] * y[0] + y[1] * y[1]).sqrt() - rm).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn inverse_round_trip_and_phase_preservation() {
    let fam = build_diffeos(circle(), 0.01, 0.16).unwrap();
    for m in 0..16 {
        let t = (m as f64 + 0.6) * 0.01;
        let r_t = fam.interface_at(t).unwrap();
        let r_m = fam.interface_at(m as f64 * 0.01).unwrap();
        for k in 0..50 {
            let rho = 0.06 + 0.93 * k as f64 / 49.0;
            let x = [rho * 0.6, rho * 0.8];
            let y = fam.map(m, x, t);
            let back = fam.inverse(m, y, t);
            assert!((back[0] - x[0]).abs() <= 1e-12 && (back[1] - x[1]).abs() <= 1e-12);
            let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
            assert_eq!(rho < r_t, ry < r_m, "phase changed at rho = {rho}");
        }
    }
    // The composed map lands on the next anchor's interface.
    let t = 0.053;
    let r_t = fam.interface_at(t).unwrap();
    let z = fam.composed(5, [r_t, 0.0], t);
    assert!((z[0] - fam.interface_at(0.06).unwrap()).abs() < 1e-12);
}

#[test]
fn map_tends_to_identity_at_slab_start() {
    let fam = build_diffeos(circle(), 0.02, 0.16).unwrap();
    let x = [0.4, 0.3];
    let y = fam.map(3, x, 0.06 + 1e-12);
    assert!((y[0] - x[0]).abs() < 1e-10 && (y[1] - x[1]).abs() < 1e-10);
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let fam = build_diffeos(circle(), 0.02, 0.16).unwrap();
    let m = 4;
    let eps = 1e-6;
    for &(x, t) in &[([0.55, 0.2], 0.09), ([0.1, -0.62], 0.095), ([-0.45, -0.4], 0.085)] {
        let e = fam.eval(m, x, t);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let (fp, fm) = (fam.eval(m, xp, t), fam.eval(m, xm, t));
            for i in 0..2 {
                let fd = (fp.phi[i] - fm.phi[i]) / (2.0 * eps);
                assert!((fd - e.dphi[i][j]).abs() < 1e-8);
                for k in 0..2 {
                    let fd2 = (fp.dphi[i][k] - fm.dphi[i][k]) / (2.0 * eps);
                    assert!((fd2 - e.d2phi[i][k][j]).abs() < 1e-6);
                }
            }
        }
        let (ep, em) = (fam.eval(m, x, t + eps), fam.eval(m, x, t - eps));
        for i in 0..2 {
            assert!(((ep.phi[i] - em.phi[i]) / (2.0 * eps) - e.dt_phi[i]).abs() < 1e-7);
            for j in 0..2 {
                assert!(((ep.dphi[i][j] - em.dphi[i][j]) / (2.0 * eps) - e.dt_dphi[i][j]).abs() < 1e-6);
                assert!(((ep.dt_dphi[i][j] - em.dt_dphi[i][j]) / (2.0 * eps) - e.dtt_dphi[i][j]).abs() < 1e-4);
            }
        }
        let det = e.dphi[0][0] * e.dphi[1][1] - e.dphi[0][1] * e.dphi[1][0];
        assert!((det - e.jacobian).abs() < 1e-14);
    }
}

#[test]
fn velocity_on_the_interface_circle() {
    let fam = build_diffeos(circle(), 0.01, 0.16).unwrap();
    let m = 7;
    let r1 = fam.interface_at(0.08).unwrap();
    let grid = TwoPhaseGrid::new(Geometry::disk(r1, 1.0, 12, 12, 32)).unwrap();
    let v = velocity_field(&fam, m, &grid).unwrap();
    for (k, pair) in grid.pairs().iter().enumerate() {
        let u = v.plus[pair.plus];
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        assert!((speed - 1.0 / r1).abs() <= 1e-10, "pair {k}");
    }
    for (node, u) in grid.phase(harmflow::grid::Phase::Minus).nodes.iter().zip(&v.minus) {
        let r = (node.pos[0].powi(2) + node.pos[1].powi(2)).sqrt();
        let angular = (-node.pos[1] * u[0] + node.pos[0] * u[1]) / r;
        assert!(angular.abs() <= 1e-14);
    }
    assert!(velocity_field(&fam, 16, &grid).is_err());
}

#[test]
fn constants_are_stable_under_step_halving() {
    let reports: Vec<DiffeoReport> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&h| verify_diffeo_bounds(&build_diffeos(circle(), h, 0.16).unwrap(), None).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!((w[1].c0 / w[0].c0 - 1.0).abs() < 0.2, "{} vs {}", w[0].c0, w[1].c0);
        assert!((w[1].cj / w[0].cj - 1.0).abs() < 0.2);
    }
    for r in &reports {
        assert!(r.c0.is_finite() && r.c1.is_finite() && r.c2.is_finite());
    }
    let near = verify_diffeo_bounds(&build_diffeos(circle(), 0.004, 0.9 * 0.32 - 1e-9).unwrap(), None).unwrap();
    assert!(near.c0 > reports[2].c0 && near.c0.is_finite());
    assert!(matches!(
        verify_diffeo_bounds(&build_diffeos(circle(), 0.01, 0.16).unwrap(), Some(0.1)),
        Err(harmflow::Error::DiffeoBound { .. })
    ));
}

#[test]
fn one_dimensional_point_motion() {
    let motion = InterfaceMotion::PrescribedPoint1D { coeffs: vec![0.0, 0.5] };
    let fam = build_diffeos(motion, 0.02, 0.4).unwrap();
    let e = fam.eval(2, [0.05, 0.0], 0.05);
    // s(0.04) = 0.02, s(0.05) = 0.025: the interface goes back to 0.02.
    assert!((fam.map(2, [0.025, 0.0], 0.05)[0] - 0.02).abs() < 1e-15);
    assert!((e.jacobian - e.dphi[0][0]).abs() < 1e-15);
    let rep = verify_diffeo_bounds(&fam, None).unwrap();
    assert!(rep.c0 > 0.0 && rep.c0.is_finite());
    let fixed = InterfaceMotion::PrescribedPoint1D { coeffs: vec![0.1] };
    let fam = build_diffeos(fixed, 0.1, 1.0).unwrap();
    assert_eq!(fam.map(3, [0.3, 0.0], 0.35), [0.3, 0.0]);
    assert_eq!(fam.velocity_at(3, [0.1, 0.0]), [0.0, 0.0]);
    let runaway = InterfaceMotion::PrescribedPoint1D { coeffs: vec![0.0, 2.0] };
    assert!(build_diffeos(runaway, 0.01, 0.5).is_err());
}
