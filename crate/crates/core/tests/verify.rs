use std::time::Instant;

use harmflow::matcore::{random_antisym, random_orthogonal, random_unit, v4_component, v_basis, SquareMatrix};
use harmflow::rng::{seeded, stream};
use harmflow::verify::*;
use harmflow::Mat;
use proptest::prelude::*;

fn pair(seed: u64, n: usize) -> (Mat, Mat, Vec<f64>) {
    let mut rng = seeded(seed, stream::VERIFY);
    let a = random_orthogonal::<f64, _>(&mut rng, n, 1).into_mat();
    let axis = random_unit::<f64, _>(&mut rng, n);
    let b = a.matmul(&SquareMatrix::reflection(&axis));
    (a, b, axis)
}

#[test]
fn common_v4_derivative_satisfies_every_form() {
    for n in 3..=5 {
        let (a, b, axis) = pair(n as u64, n);
        let w = v_basis::<f64>(4, &axis).unwrap().iter().enumerate().fold(SquareMatrix::zeros(n), |mut acc, (i, e)| {
            acc.axpy(1.0 + i as f64, e);
            acc
        });
        let rep = check_equivalences(&a, &b, &a.matmul(&w), &b.matmul(&w)).unwrap();
        assert!(rep.conditions().iter().all(|c| c.holds()), "{rep:?}");
        assert!(rep.consistent);
        assert!(rep.tangency <= 1e-14);
        assert!((&rep.w.unwrap() - &w).norm() <= 1e-13);
        // The pair axis is recovered up to sign.
        let dot: f64 = rep.axis.iter().zip(&axis).map(|(x, y)| x * y).sum();
        assert!((dot.abs() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn v3_component_breaks_every_form() {
    let n = 4;
    let (a, b, axis) = pair(11, n);
    let w = &v_basis::<f64>(4, &axis).unwrap()[0] + &v_basis::<f64>(3, &axis).unwrap()[1];
    let rep = check_equivalences(&a, &b, &a.matmul(&w), &b.matmul(&w)).unwrap();
    assert!(rep.conditions().iter().all(|c| c.verdict == Verdict::Fails), "{rep:?}");
    assert!(rep.w.is_none());
    assert!(rep.consistent);
}

#[test]
fn dimension_two_has_trivial_v4() {
    let (a, b, axis) = pair(3, 2);
    assert!(v_basis::<f64>(4, &axis).unwrap().is_empty());
    let zero = SquareMatrix::zeros(2);
    let rep = check_equivalences(&a, &b, &zero, &zero).unwrap();
    assert!(rep.conditions().iter().all(|c| c.holds()));
    // Every nonzero antisymmetric W lies in V3 when n = 2.
    let w = SquareMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
    let rep = check_equivalences(&a, &b, &a.matmul(&w), &b.matmul(&w)).unwrap();
    assert!(rep.conditions().iter().all(|c| c.verdict == Verdict::Fails));
    let suite = equivalence_suite(2, 64, 1).unwrap();
    assert!(suite.passed, "{suite:?}");
}

#[test]
fn rejects_non_pairs_and_mismatched_sizes() {
    let (a, _, _) = pair(5, 3);
    let d = SquareMatrix::zeros(3);
    assert!(check_equivalences(&a, &a, &d, &d).is_err());
    let (a, b, _) = pair(5, 3);
    assert!(check_equivalences(&a, &b, &SquareMatrix::zeros(4), &d).is_err());
    assert!(check_v_perp(1, 10, 0).is_err());
}

#[test]
fn subspace_dimensions() {
    assert_eq!(check_v_perp(2, 20, 7).unwrap().basis_sizes, [1, 1, 1, 0, 1]);
    let r = check_v_perp(5, 20, 7).unwrap();
    assert_eq!(r.dims, [1, 4, 4, 6, 10]);
    assert_eq!(r.basis_sizes, [1, 4, 4, 6, 10]);
    for (m, d) in r.measured_dims.iter().zip(r.dims) {
        assert!((m - d as f64).abs() <= 1e-12);
    }
    let t = check_tangent_normal(5, 20, 7).unwrap();
    assert_eq!((t.tangent_dim, t.normal_dim), (10, 15));
}

#[test]
fn full_suite_passes_and_is_repeatable() {
    let start = Instant::now();
    let rep = run_all(&[2, 3, 4, 5], 1000, 7).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(rep.passed, "{}", serde_json::to_string_pretty(&rep).unwrap());
    assert!(rep.equivalences.iter().all(|e| e.inconsistencies == 0));
    assert!(elapsed < 10.0, "{elapsed} s");
    let again = run_all(&[2, 3, 4, 5], 1000, 7).unwrap();
    assert_eq!(serde_json::to_string(&rep).unwrap(), serde_json::to_string(&again).unwrap());
    let other = run_all(&[3], 50, 8).unwrap();
    assert_ne!(
        serde_json::to_string(&other.v_perp[0].reconstruction_max).unwrap(),
        serde_json::to_string(&rep.v_perp[1].reconstruction_max).unwrap()
    );
}

proptest! {
    #[test]
    fn prop_verdict_matches_v4_membership(seed in 0u64..5000, n in 3usize..6, mix in 0.0f64..1.0) {
        let (a, b, axis) = pair(seed, n);
        let mut rng = seeded(seed, stream::NOISE);
        let x = random_antisym::<f64, _>(&mut rng, n);
        let v4 = v4_component(&x, &axis);
        let w = &v4 + &(&x - &v4).scale(mix);
        let rep = check_equivalences(&a, &b, &a.matmul(&w), &b.matmul(&w)).unwrap();
        prop_assert!(rep.consistent);
        let off = (&x - &v4).norm() * mix;
        if off > 1e-6 {
            prop_assert!(rep.conditions().iter().all(|c| c.verdict == Verdict::Fails));
        }
    }
}
