use std::sync::Arc;

use super::*;
use crate::degree::ContinuousMap;
use crate::geometry::{ConstraintSet, RepChoice};
use crate::integrate::{IntegratorConfig, Stepper, Trajectory};
use crate::linalg;
use crate::multimap::{ConvexValue, MultiMap, MultiMapKind, TimePoly, TimeTerm, VectorField};
use crate::nonsmooth::{self, ClarkeConfig};

fn disc(rep: RepChoice) -> ConstraintSet {
    ConstraintSet::ball(vec![0.0, 0.0], 1.0, rep).unwrap()
}

fn linear(k: &ConstraintSet, m: Vec<Vec<f64>>, horizon: f64) -> MultiMap {
    MultiMap::singleton(VectorField::linear(m), 2, horizon, &k.ref_box).unwrap()
}

fn neg_id() -> Vec<Vec<f64>> {
    vec![vec![-1.0, 0.0], vec![0.0, -1.0]]
}

fn rot() -> Vec<Vec<f64>> {
    vec![vec![0.0, -1.0], vec![1.0, 0.0]]
}

fn line_trajectory(horizon: f64, steps: usize) -> Trajectory {
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let states: Vec<Vec<f64>> = times.iter().map(|t| vec![*t, 0.0]).collect();
    Trajectory {
        h,
        selections: vec![vec![1.0, 0.0]; steps + 1],
        f_values: vec![0.0; steps + 1],
        times,
        states,
        viability_residual: 0.0,
        inclusion_residual: 0.0,
        violations: vec![],
    }
}

/// `exp(A)` by a long Taylor series, independent of nalgebra.
fn expm_taylor(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut term = linalg::identity(n);
    let mut sum = linalg::identity(n);
    for k in 1..60 {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| term[i][l] * a[l][j]).sum::<f64>() / k as f64;
            }
        }
        term = next;
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    sum
}

fn spiral() -> Vec<Vec<f64>> {
    vec![vec![-0.5, -1.0], vec![1.0, -0.5]]
}

#[test]
fn boundary_operator_examples() {
    let c = vec![0.3, -2.0];
    let tr = boundary::constant_trajectory(&c, 1.0);
    assert_eq!(apply_boundary(&BoundaryOperator::Antiperiodic, &tr).unwrap(), vec![-0.3, 2.0]);
    assert_eq!(apply_boundary(&BoundaryOperator::Periodic, &tr).unwrap(), c);

    let t_end = 2.0;
    let line = line_trajectory(t_end, 400);
    let mp = BoundaryOperator::Multipoint { alphas: vec![0.5, 0.5], times: vec![t_end / 2.0, t_end] };
    let v = apply_boundary(&mp, &line).unwrap();
    assert!((v[0] - 0.75 * t_end).abs() < 1e-12 && v[1].abs() < 1e-12);

    let unit = line_trajectory(1.0, 100);
    let mean = BoundaryOperator::MeanValue { map: ContinuousMap::identity(2) };
    let v = apply_boundary(&mean, &unit).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-12 && v[1].abs() < 1e-12);

    let outside = BoundaryOperator::Multipoint { alphas: vec![1.0], times: vec![1.5] };
    assert!(matches!(apply_boundary(&outside, &unit), Err(crate::Error::Argument(_))));

    // Floquet: apply returns C⁻¹x(T); the residual is |x(T) − C x(0)|.
    let fl = BoundaryOperator::Floquet { matrix: vec![vec![2.0, 0.0], vec![0.0, 4.0]] };
    let v = apply_boundary(&fl, &unit).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-12);
    assert!((boundary_residual(&fl, &unit).unwrap() - 1.0).abs() < 1e-12);
    assert!((fl.floquet_condition_number().unwrap() - 2.0).abs() < 1e-12);
    let sing = BoundaryOperator::Floquet { matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]] };
    assert!(sing.validate(2, 1.0).is_err());

    // Endpoint a + b = 0 agrees with the antiperiodic residual.
    let ep = BoundaryOperator::Endpoint { a: linalg::identity(2), b: linalg::identity(2), c: None };
    let r1 = boundary_residual(&ep, &unit).unwrap();
    let r2 = boundary_residual(&BoundaryOperator::Antiperiodic, &unit).unwrap();
    assert!((r1 - r2).abs() < 1e-12);

    let s =
        BoundaryOperator::Multipoint { alphas: vec![0.25, 0.75], times: vec![0.5, 1.0] }.multipoint_summary().unwrap();
    assert!(s.convex && s.within_unit);
    let s =
        BoundaryOperator::Multipoint { alphas: vec![0.3, -0.4], times: vec![0.5, 1.0] }.multipoint_summary().unwrap();
    assert!(!s.convex && s.within_unit && (s.abs_sum - 0.7).abs() < 1e-12);

    let json = serde_json::to_string(&mp).unwrap();
    let back: BoundaryOperator = serde_json::from_str(&json).unwrap();
    assert_eq!(apply_boundary(&back, &line).unwrap(), apply_boundary(&mp, &line).unwrap());
}

#[test]
fn bound_set_examples() {
    let k = disc(RepChoice::Squared);
    let cfg = CheckConfig { boundary_samples: 24, ..Default::default() };
    let radial = linear(&k, neg_id(), 1.0);
    let r = verify_bound_set(&k, &BoundingSource::Representation, &radial, &cfg, true).unwrap();
    assert!(r.passed(), "{r:#?}");
    let iv = r.get("transversality").unwrap().value.unwrap();
    assert!((iv - 2.0).abs() < 1e-9, "{iv}");
    assert_eq!(r.get("interior_boundary_hits").unwrap().value, Some(0.0));

    let tangential = linear(&k, rot(), 1.0);
    let r = verify_bound_set(&k, &BoundingSource::Representation, &tangential, &cfg, false).unwrap();
    assert_eq!(r.overall, Status::Fail);
    assert_eq!(r.get("transversality").unwrap().status, Status::Fail);
    assert!(r.get("transversality").unwrap().value.unwrap().abs() < 1e-12);

    // h(t, x) = −x + 0.1(1 − t)e₁: |⟨2x, h⟩| = |−2 + 0.2(1 − t)x₁| ≥ 1.8.
    let field = VectorField::Affine {
        matrix: Some(neg_id()),
        offset: Some(vec![0.1, 0.0]),
        time_terms: vec![TimeTerm { power: 1, matrix: None, offset: Some(vec![-0.1, 0.0]) }],
    };
    let h = MultiMap::singleton(field, 2, 1.0, &k.ref_box).unwrap();
    let r = verify_bound_set(&k, &BoundingSource::Representation, &h, &cfg, false).unwrap();
    assert!(r.passed());
    let samples = crate::geometry::sample_boundary(&k, 24, 0).unwrap();
    let oracle = samples
        .iter()
        .flat_map(|x| cfg.open_grid(1.0).into_iter().map(move |t| (2.0 - 0.2 * (1.0 - t) * x[0]).abs()))
        .fold(f64::INFINITY, f64::min);
    let got = r.get("transversality").unwrap().value.unwrap();
    assert!(got >= 2.0 - 0.2 && (got - oracle).abs() < 1e-9);

    let missing: Arc<BoundingFn> = Arc::new(|_: &[f64]| None);
    assert!(verify_bound_set(&k, &BoundingSource::Functions(missing), &radial, &cfg, false).is_err());
}

#[test]
fn th1_examples() {
    let k = disc(RepChoice::Signed);
    let cfg = CheckConfig { boundary_samples: 16, time_samples: 3, ..Default::default() };
    let inward = linear(&k, neg_id(), 1.0);
    let r = check_th1(&k, &inward, &BoundaryOperator::Antiperiodic, &cfg).unwrap();
    assert!(r.passed(), "{r:#?}");
    assert_eq!(r.get("degree").unwrap().value, Some(1.0));
    assert_eq!(r.get("tangency_f").unwrap().status, Status::Pass);

    let outward = linear(&k, linalg::identity(2), 1.0);
    let r = check_th1(&k, &outward, &BoundaryOperator::Antiperiodic, &cfg).unwrap();
    assert_eq!(r.get("tangency_f").unwrap().status, Status::Fail);
    assert_eq!(r.get("tangency_neg_f").unwrap().status, Status::Pass);
    assert!((r.get("tangency_neg_f").unwrap().value.unwrap() - 1.0).abs() < 1e-9, "{:?}", r.get("tangency_neg_f"));
    assert_eq!(r.get("tangency").unwrap().status, Status::Pass);

    let r = check_th1(&k, &inward, &BoundaryOperator::Periodic, &cfg).unwrap();
    assert_eq!(r.get("zero_free_boundary").unwrap().status, Status::Fail);
    assert_eq!(r.overall, Status::Fail);

    let mp = BoundaryOperator::Multipoint { alphas: vec![0.5], times: vec![1.0] };
    let r = check_th1(&k, &inward, &mp, &cfg).unwrap();
    assert_eq!(r.get("boundary_equivalence").unwrap().status, Status::Uncertain);
    assert_eq!(r.overall, Status::Uncertain);

    // d_K has 0 in its generalized gradient on the boundary.
    let kd = disc(RepChoice::Distance);
    let fd = linear(&kd, neg_id(), 1.0);
    assert!(matches!(check_th1(&kd, &fd, &BoundaryOperator::Antiperiodic, &cfg), Err(crate::Error::Prerequisite(_))));
}

#[test]
fn borsuk_examples_and_direct_cross_check() {
    let k = disc(RepChoice::Squared);
    let cfg = CheckConfig { boundary_samples: 16, time_samples: 3, ..Default::default() };
    let inward = linear(&k, neg_id(), 1.0);
    let r = check_borsuk(&k, &inward, &cfg).unwrap();
    assert!(r.passed());
    assert!(r.get("gap_direct").unwrap().samples.iter().all(|s| s.status == Status::Pass));
    for x in crate::geometry::sample_boundary(&k, 16, 0).unwrap() {
        let (a, b) = borsuk_quantities(&k, &inward, &x, &cfg).unwrap();
        assert!((a + 2.0).abs() < 1e-9 && (b - 2.0).abs() < 1e-9, "{a} {b}");
        // f°(x; g(x)) < 0 < f_○(x; g(−x)) from the nonsmooth module directly.
        let ccfg = ClarkeConfig::default();
        let up = nonsmooth::upper_dd(&k.rep, &x, &linalg::scale(&x, -1.0), &ccfg).unwrap();
        let lo = nonsmooth::lower_dd(&k.rep, &x, &x, &ccfg).unwrap();
        assert!(up < 0.0 && lo > 0.0);
        assert!((up - a).abs() < 1e-9 && (lo - b).abs() < 1e-9);
    }

    let outward = linear(&k, linalg::identity(2), 1.0);
    let r = check_borsuk(&k, &outward, &cfg).unwrap();
    assert_eq!(r.get("gap_direct").unwrap().status, Status::Fail);
    assert_eq!(r.get("gap_mirrored").unwrap().status, Status::Pass);
    assert!(r.passed());

    let tangential = linear(&k, rot(), 1.0);
    let r = check_borsuk(&k, &tangential, &cfg).unwrap();
    assert_eq!(r.overall, Status::Fail);
    assert!(r.get("borsuk").unwrap().samples.iter().all(|s| s.status == Status::Fail));

    let shifted = ConstraintSet::ball(vec![0.5, 0.0], 1.0, RepChoice::Squared).unwrap();
    let f = linear(&shifted, neg_id(), 1.0);
    assert!(matches!(check_borsuk(&shifted, &f, &cfg), Err(crate::Error::Prerequisite(_))));
}

#[test]
fn ball_examples() {
    let k = disc(RepChoice::Distance);
    let cfg = CheckConfig { boundary_samples: 16, time_samples: 3, ..Default::default() };
    let inward = linear(&k, neg_id(), 1.0);
    let r = check_ball(&k, &inward, &BoundaryOperator::Antiperiodic, &cfg).unwrap();
    assert!(r.passed(), "{r:#?}");
    let e = r.get("tangency_inward").unwrap();
    assert!(e.value.unwrap() >= 1.0 - cfg.tol);
    assert!(e.samples.iter().all(|s| (s.value - 1.0).abs() < 1e-9));
    // |−x − x| = 2|x| ≥ 2 on the annulus.
    assert!(r.get("annulus_fixed_point_free").unwrap().value.unwrap() >= 2.0);

    let third = 1.0 / 3.0;
    let conv = BoundaryOperator::Multipoint { alphas: vec![third; 3], times: vec![third, 2.0 * third, 1.0] };
    let r = check_ball(&k, &inward, &conv, &cfg).unwrap();
    assert_eq!(r.get("annulus_fixed_point_free").unwrap().status, Status::Fail);

    let nonconv = BoundaryOperator::Multipoint { alphas: vec![0.4, -0.4], times: vec![0.5, 1.0] };
    let r = check_ball(&k, &inward, &nonconv, &cfg).unwrap();
    assert!(r.passed(), "{r:#?}");

    let contraction = BoundaryOperator::MeanValue {
        map: ContinuousMap::Linear { matrix: vec![vec![0.5, 0.0], vec![0.0, -0.5]], offset: None },
    };
    let r = check_ball(&k, &inward, &contraction, &cfg).unwrap();
    assert!(r.passed());

    let outward = linear(&k, linalg::identity(2), 1.0);
    let r = check_ball(&k, &outward, &BoundaryOperator::Antiperiodic, &cfg).unwrap();
    assert_eq!(r.get("tangency_inward").unwrap().status, Status::Fail);
    assert_eq!(r.get("tangency_outward").unwrap().status, Status::Pass);
}

#[test]
fn floquet_spiral_conditions() {
    let k = disc(RepChoice::Signed);
    let a = spiral();
    let c = expm_taylor(&a);
    let f = linear(&k, a.clone(), 1.0);
    let cfg = CheckConfig { boundary_samples: 16, time_samples: 5, ..Default::default() };
    let r = check_floquet(&k, &c, &f, &BoundingSource::Representation, &cfg).unwrap();
    let tr = r.get("transversality").unwrap();
    assert_eq!(tr.status, Status::Pass);
    assert!(tr.samples.iter().all(|s| (s.value + 0.5).abs() < 1e-9), "{:?}", tr.samples);
    // |Cx| = e^{−1/2}: the second factor is ⟨Cx/|Cx|, A Cx⟩·(−1) = |Cx|/2.
    let p = r.get("endpoint_sign").unwrap();
    assert_eq!(p.status, Status::Pass);
    let expect = -0.25 * (-0.5f64).exp();
    assert!(p.samples.iter().all(|s| (s.value - expect).abs() < 1e-9));
    assert_eq!(r.get("local_containment").unwrap().status, Status::Pass);
    assert_eq!(r.get("vanishes_at_point").unwrap().status, Status::Pass);
    assert_eq!(r.get("kernel_or_separation").unwrap().status, Status::Pass);
    assert!(
        (r.get("trivial_kernel").unwrap().value.unwrap()
            - (1.0 - 2.0 * (-0.5f64).exp() * 1f64.cos() + (-1f64).exp()).sqrt())
        .abs()
            < 1e-9
    );
    // C shrinks the sphere, so bd K is not invariant.
    assert_eq!(r.get("boundary_invariance").unwrap().status, Status::Fail);
    assert_eq!(r.overall, Status::Fail);

    let zero = MultiMap::singleton(VectorField::constant(vec![0.0, 0.0]), 2, 1.0, &k.ref_box).unwrap();
    let r = check_floquet(&k, &neg_id(), &zero, &BoundingSource::Representation, &cfg).unwrap();
    assert_eq!(r.get("transversality").unwrap().status, Status::Fail);
    assert_eq!(r.get("boundary_invariance").unwrap().status, Status::Pass);

    let (s, co) = (1f64.sin(), 1f64.cos());
    let rot1 = vec![vec![co, -s], vec![s, co]];
    let tang = linear(&k, rot(), 1.0);
    let r = check_floquet(&k, &rot1, &tang, &BoundingSource::Representation, &cfg).unwrap();
    assert_eq!(r.get("transversality").unwrap().status, Status::Fail);
    // Irrational rotation: orbits never close within the cap.
    assert_eq!(r.get("boundary_invariance").unwrap().status, Status::Uncertain);
}

#[test]
fn normals_reproduce_bounding_properties() {
    let k = disc(RepChoice::Signed);
    let f = linear(&k, neg_id(), 1.0);
    let normals: Arc<NormalFn> = Arc::new(|x: &[f64]| x.to_vec());
    let src = BoundingSource::Normals(normals.clone());
    let cfg = CheckConfig { boundary_samples: 8, time_samples: 3, ..Default::default() };
    let c = linalg::scale(&[1.0], 1.0);
    let _ = c;
    let cm = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
    let r = check_floquet(&k, &cm, &f, &src, &cfg).unwrap();
    for name in ["local_containment", "vanishes_at_point", "transversality", "endpoint_sign"] {
        assert_eq!(r.get(name).unwrap().status, Status::Pass, "{name}: {r:#?}");
    }
    for x in crate::geometry::sample_boundary(&k, 8, 0).unwrap() {
        let b = floquet::resolve_bounding(&k, &src, &x, &f, &cfg).unwrap();
        let eps = b.eps.unwrap();
        // F = {−x} against v = x: normalized margin 1, so eps = 1/2.
        assert!((eps - 0.5).abs() < 1e-12, "{eps}");
        let fx = &b.function;
        assert!(fx.eval(&x).unwrap().abs() < 1e-15);
        let bundle = nonsmooth::clarke_gradient(fx, &x, &ClarkeConfig::default()).unwrap();
        // ∂f_x(x) = D(v, eps): support in direction u is ⟨v, u⟩ + eps|u|.
        for u in linalg::sphere_directions(2, 12) {
            assert!((bundle.support(&u) - (linalg::dot(&x, &u) + eps)).abs() < 1e-9);
        }
        // Local containment ⟨v, y − x⟩ ≤ eps|y − x| on K near x.
        let d = b.delta.unwrap();
        for y in floquet_local(&k, &x, d) {
            assert!(fx.value(&y) <= 1e-12);
        }
    }
}

fn floquet_local(k: &ConstraintSet, x: &[f64], d: f64) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    (0..300).map(|_| linalg::random_in_ball(&mut rng, x, d)).filter(|y| k.contains(y, 0.0)).collect()
}

#[test]
fn normal_condition_examples() {
    let k = disc(RepChoice::Signed);
    let cfg = CheckConfig { boundary_samples: 8, time_samples: 3, ..Default::default() };
    let normals: Arc<NormalFn> = Arc::new(|x: &[f64]| x.to_vec());
    let id = linalg::identity(2);
    let out = linear(&k, id.clone(), 1.0);
    let r = check_normal_conditions(&k, &id, &out, normals.clone(), &cfg).unwrap();
    assert_eq!(r.get("normal_transversality").unwrap().status, Status::Pass);
    assert_eq!(r.get("polar_exclusion").unwrap().status, Status::Pass);
    let p = r.get("endpoint_product").unwrap();
    assert_eq!(p.status, Status::Pass);
    assert!((p.value.unwrap() - 1.0).abs() < 1e-9, "{p:?}");
    // C = I: the kernel is everything, and x₀ ↦ T x₀ has degree 1 on the disc.
    assert_eq!(r.get("reduced_degree").unwrap().value, Some(1.0));
    assert!(r.passed());

    let inward = linear(&k, neg_id(), 1.0);
    let r = check_normal_conditions(&k, &id, &inward, normals.clone(), &cfg).unwrap();
    assert_eq!(r.get("normal_transversality").unwrap().status, Status::Pass);
    assert_eq!(r.get("polar_exclusion").unwrap().status, Status::Fail);

    let fat = MultiMap::new(
        2,
        MultiMapKind::Ball { center: VectorField::linear(id.clone()), radius: TimePoly::constant(2.0) },
        1.0,
        4.0,
    )
    .unwrap();
    let r = check_normal_conditions(&k, &id, &fat, normals.clone(), &cfg).unwrap();
    let e = r.get("normal_transversality").unwrap();
    assert_eq!(e.status, Status::Fail);
    let (lo, hi) =
        crate::multimap::inner_product_bounds(&ConvexValue::point(vec![1.0, 0.0]), &fat.value(0.0, &[1.0, 0.0]));
    assert!((lo + 1.0).abs() < 1e-6 && (hi - 3.0).abs() < 1e-6);

    let bad: Arc<NormalFn> = Arc::new(|x: &[f64]| vec![-x[1], x[0]]);
    assert!(matches!(check_normal_conditions(&k, &id, &out, bad, &cfg), Err(crate::Error::Prerequisite(_))));
}

#[test]
fn kernel_fixture() {
    let k = disc(RepChoice::Signed);
    let c = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
    let f = MultiMap::singleton(VectorField::constant(vec![1.0, 0.0]), 2, 1.0, &k.ref_box).unwrap();
    let cfg = CheckConfig { boundary_samples: 8, time_samples: 3, ..Default::default() };
    let r = check_floquet(&k, &c, &f, &BoundingSource::Representation, &cfg).unwrap();
    let sep = r.get("kernel_separation").unwrap();
    assert_eq!(sep.status, Status::Pass);
    let w = &sep.witness.as_ref().unwrap().point;
    assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    // The projected map is the constant T·e₁ restricted to the kernel line:
    // no sign change on [−1, 1].
    let deg = r.get("reduced_degree").unwrap().value.unwrap();
    let (a, b) = (aumann_centroid(&f, &[-1.0, 0.0], 129)[0], aumann_centroid(&f, &[1.0, 0.0], 129)[0]);
    let oracle = 0.5 * (b.signum() - a.signum());
    assert_eq!(deg, oracle);
}

fn ball_solver_cfg(strategy: Strategy) -> SolverConfig {
    SolverConfig { strategy, integrator: IntegratorConfig::with_step(1e-2), ..Default::default() }
}

#[test]
fn solver_ball_antiperiodic_all_strategies() {
    let k = disc(RepChoice::Distance);
    let f = linear(&k, neg_id(), 1.0);
    for s in [Strategy::Poincare, Strategy::Shooting, Strategy::Continuation] {
        let out = solve_nonlocal(&k, &f, &BoundaryOperator::Antiperiodic, &ball_solver_cfg(s)).unwrap();
        assert_eq!(out.solutions.len(), 1, "{s:?}");
        let sol = &out.solutions[0];
        assert!(sol.trajectory.states.iter().all(|x| linalg::norm(x) < 1e-6), "{s:?}");
        let (b, v) = sol.recompute(&f, &k, &BoundaryOperator::Antiperiodic).unwrap();
        assert!(b < 1e-6 && v < 1e-6);
        assert_eq!(b, sol.boundary_residual);
    }
}

#[test]
fn solver_multipoint_and_floquet_examples() {
    let k = disc(RepChoice::Distance);
    let f = linear(&k, neg_id(), 1.0);
    let third = 1.0 / 3.0;
    let mp = BoundaryOperator::Multipoint { alphas: vec![third; 3], times: vec![third, 2.0 * third, 1.0] };
    let out = solve_nonlocal(&k, &f, &mp, &ball_solver_cfg(Strategy::Shooting)).unwrap();
    assert_eq!(out.solutions.len(), 1);
    assert!(linalg::norm(&out.solutions[0].initial) < 1e-6);

    let zero = MultiMap::singleton(VectorField::constant(vec![0.0, 0.0]), 2, 1.0, &k.ref_box).unwrap();
    let out = solve_floquet(&k, &zero, &neg_id(), &ball_solver_cfg(Strategy::Shooting)).unwrap();
    assert_eq!(out.solutions.len(), 1);
    assert!(linalg::norm(&out.solutions[0].initial) < 1e-6);

    let theta = 0.7f64;
    let e = (-1f64).exp();
    let c = vec![vec![e * theta.cos(), -e * theta.sin()], vec![e * theta.sin(), e * theta.cos()]];
    let out = solve_floquet(&k, &f, &c, &ball_solver_cfg(Strategy::Shooting)).unwrap();
    assert!(out.found());
    assert!(out.solutions.iter().all(|s| linalg::norm(&s.initial) < 1e-5));
}

#[test]
fn solver_spiral_every_start_solves() {
    let k = disc(RepChoice::Signed);
    let a = spiral();
    let c = expm_taylor(&a);
    let f = linear(&k, a, 1.0);
    let cfg = SolverConfig {
        integrator: IntegratorConfig { stepper: Stepper::ExactLinear, ..IntegratorConfig::with_step(1e-2) },
        bvp_tol: 1e-8,
        ..Default::default()
    };
    let out = solve_floquet(&k, &f, &c, &cfg).unwrap();
    assert_eq!(out.attempts, 5);
    assert_eq!(out.solutions.len(), 5);
    assert!(out.solutions.iter().all(|s| s.boundary_residual < 1e-8));
}

#[test]
fn solver_reports_not_found() {
    let k = disc(RepChoice::Distance);
    let shift = MultiMap::singleton(VectorField::constant(vec![0.1, 0.0]), 2, 1.0, &k.ref_box).unwrap();
    // x(T) = x(0) + 0.1e₁ can never be periodic.
    let cfg = SolverConfig { max_iter: 30, ..ball_solver_cfg(Strategy::Shooting) };
    let out = solve_nonlocal(&k, &shift, &BoundaryOperator::Periodic, &cfg).unwrap();
    assert!(!out.found());
    assert!(out.best_residual > 0.09 && out.best_residual.is_finite());
}

fn status_of(i: u8) -> Status {
    match i % 3 {
        0 => Status::Pass,
        1 => Status::Fail,
        _ => Status::Uncertain,
    }
}

proptest::proptest! {
    #[test]
    fn overall_verdict_follows_required_entries(entries in proptest::collection::vec((0u8..3, proptest::bool::ANY, -1.0f64..1.0), 0..8)) {
        let mut r = ConditionReport::new("probe");
        for (i, (s, required, m)) in entries.iter().enumerate() {
            let name = format!("c{i}");
            let e = match status_of(*s) {
                Status::Pass => ConditionEntry::graded(&name, *m, m.abs() + 1e-3, *required),
                Status::Fail => ConditionEntry::graded(&name, *m, -m.abs(), *required),
                Status::Uncertain => ConditionEntry::structural(&name, Status::Uncertain, *required, "undecided"),
            };
            r.push(e);
        }
        let r = r.finish();
        let req: Vec<_> = r.conditions.iter().filter(|c| c.required).collect();
        let expect = if req.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if !req.is_empty() && req.iter().all(|c| c.passed()) {
            Status::Pass
        } else {
            Status::Uncertain
        };
        proptest::prop_assert_eq!(r.overall, expect);
        if r.overall == Status::Pass {
            proptest::prop_assert!(req.iter().all(|c| c.margin.is_none_or(|m| m > 0.0)));
        }
    }
}
