//! Property tests for the invariants each module promises.

use proptest::prelude::*;
use viability_kit::bvp::{
    apply_boundary, borsuk_quantities, check_borsuk, solve_nonlocal, BoundaryOperator, CheckConfig, SolverConfig,
    Status,
};
use viability_kit::degree::{brouwer_degree, floquet_split, poincare_bohl_check, ContinuousMap, Region};
use viability_kit::geometry::{
    clarke_tangent_test, delta_function, membership, sample_boundary, sublevel_thicken, ConstraintSet, Membership,
    RepChoice,
};
use viability_kit::integrate::{solve_ivp, IntegratorConfig};
use viability_kit::linalg::{self, dot, norm};
use viability_kit::multimap::{
    graph_approx, inner_product_bounds, select_tangent, ConvexValue, MultiMap, MultiMapKind, TimePoly, VectorField,
};
use viability_kit::nonsmooth::{
    clarke_gradient, in_polar_cone, lower_dd, upper_dd, ClarkeConfig, Expr, LipschitzFunction, PolarStatus,
};

fn fixtures() -> Vec<LipschitzFunction> {
    let circle = |c: f64| Expr::abs(Expr::norm_at(vec![c, 0.0]).plus(-1.0).unwrap());
    vec![
        LipschitzFunction::new(Expr::squared_norm(2, -1.0), 2).unwrap(),
        LipschitzFunction::new(Expr::dist_ball(vec![0.0, 0.0], 1.0), 2).unwrap(),
        LipschitzFunction::new(Expr::max(vec![Expr::coord(2, 0), Expr::coord(2, 1)]), 2).unwrap(),
        LipschitzFunction::new(Expr::norm(2), 2).unwrap(),
        LipschitzFunction::new(Expr::min(vec![circle(1.0), circle(-1.0)]), 2).unwrap(),
        LipschitzFunction::new(Expr::max(vec![Expr::abs(Expr::coord(2, 0)), Expr::affine(vec![0.5, -1.0], 0.2)]), 2)
            .unwrap(),
    ]
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 2)
}

/// Points that sometimes sit exactly on kinks of the fixtures.
fn probe_point() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        3 => point(),
        1 => (-1.5f64..1.5).prop_map(|a| vec![a, a]),
        1 => (-1.5f64..1.5).prop_map(|a| vec![0.0, a]),
        1 => Just(vec![0.0, 0.0]),
    ]
}

fn direction() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2)
}

fn cfg() -> ClarkeConfig {
    ClarkeConfig::default()
}

fn scale_tol(x: f64) -> f64 {
    1e-8 * (1.0 + x.abs())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn upper_derivative_is_positively_homogeneous(i in 0usize..6, x in probe_point(), v in direction()) {
        let f = &fixtures()[i];
        let base = upper_dd(f, &x, &v, &cfg()).unwrap();
        for lambda in [0.5, 2.0, 7.0] {
            let scaled = upper_dd(f, &x, &linalg::scale(&v, lambda), &cfg()).unwrap();
            prop_assert!((scaled - lambda * base).abs() <= 1e-6 * (1.0 + base.abs()) * lambda, "{scaled} vs {lambda}·{base}");
        }
    }

    #[test]
    fn upper_derivative_is_subadditive(i in 0usize..6, x in probe_point(), u in direction(), v in direction()) {
        let f = &fixtures()[i];
        let uv = upper_dd(f, &x, &linalg::add(&u, &v), &cfg()).unwrap();
        let su = upper_dd(f, &x, &u, &cfg()).unwrap();
        let sv = upper_dd(f, &x, &v, &cfg()).unwrap();
        prop_assert!(uv <= su + sv + 1e-6 * (1.0 + su.abs() + sv.abs()));
    }

    #[test]
    fn bundle_is_dominated_by_upper_derivative(i in 0usize..6, x in probe_point(), v in direction()) {
        let f = &fixtures()[i];
        let b = clarke_gradient(f, &x, &cfg()).unwrap();
        prop_assert!(!b.vectors.is_empty());
        prop_assert!(b.vectors.iter().flatten().all(|c| c.is_finite()));
        let up = upper_dd(f, &x, &v, &cfg()).unwrap();
        for p in &b.vectors {
            prop_assert!(dot(p, &v) <= up + scale_tol(up));
        }
    }

    #[test]
    fn lower_derivative_is_flipped_upper(i in 0usize..6, x in probe_point(), v in direction()) {
        let f = &fixtures()[i];
        let lo = lower_dd(f, &x, &v, &cfg()).unwrap();
        let flipped = -upper_dd(&f.negated(), &x, &v, &cfg()).unwrap();
        prop_assert!((lo - flipped).abs() <= 4.0 * f64::EPSILON * (1.0 + lo.abs()));
    }

    #[test]
    fn polar_inside_means_descent(i in 0usize..6, x in probe_point(), v in direction()) {
        let f = &fixtures()[i];
        if in_polar_cone(f, &x, &v, 1e-6, &cfg()).unwrap() == PolarStatus::Inside {
            prop_assert!(upper_dd(f, &x, &v, &cfg()).unwrap() < 0.0);
        }
    }

    #[test]
    fn smooth_leaves_agree_with_gradient(x in point(), v in direction()) {
        let f = LipschitzFunction::new(Expr::squared_norm(2, -1.0), 2).unwrap();
        let g = linalg::scale(&x, 2.0);
        let up = upper_dd(&f, &x, &v, &cfg()).unwrap();
        let lo = lower_dd(&f, &x, &v, &cfg()).unwrap();
        prop_assert!((up - dot(&g, &v)).abs() <= 1e-10 && (lo - dot(&g, &v)).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn delta_has_the_sign_of_the_side(x in prop::collection::vec(-3.0f64..3.0, 2)) {
        let sets = [
            ConstraintSet::ball(vec![0.5, 0.0], 1.5, RepChoice::Signed).unwrap(),
            ConstraintSet::halfspace(vec![1.0, 1.0], 0.3, None).unwrap(),
            ConstraintSet::boxed(vec![-1.0, -0.5], vec![1.0, 2.0], RepChoice::Signed, None).unwrap(),
        ];
        for k in &sets {
            let d = delta_function(&k.kind).unwrap();
            let m = membership(k, &x, 1e-9).unwrap();
            let v = d.eval(&x).unwrap();
            match m {
                Membership::Inside => prop_assert!(v < 0.0),
                Membership::Outside => prop_assert!(v > 0.0),
                Membership::Boundary => prop_assert!(v.abs() < 1e-8),
            }
        }
    }

    #[test]
    fn thickening_is_monotone(e1 in 0.01f64..0.2, gap in 0.01f64..0.2, seed in 0u64..1000) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Distance).unwrap();
        let k1 = sublevel_thicken(&k, e1).unwrap();
        let k2 = sublevel_thicken(&k, e1 + gap).unwrap();
        for x in sample_boundary(&k1, 6, seed).unwrap() {
            prop_assert_ne!(membership(&k2, &x, 1e-9).unwrap(), Membership::Outside);
        }
    }

    #[test]
    fn ball_tangent_test_matches_half_space(theta in 0.0f64..std::f64::consts::TAU, v in direction()) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Distance).unwrap();
        let x = [theta.cos(), theta.sin()];
        let s = dot(&x, &v);
        prop_assume!(s.abs() > 1e-3);
        let inside = clarke_tangent_test(&k, &x, &v, 1e-6, &cfg()).unwrap() == PolarStatus::Inside;
        prop_assert_eq!(inside, s < 0.0);
    }
}

fn polytope_value() -> impl Strategy<Value = ConvexValue> {
    (prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..5), 0.0f64..1.0)
        .prop_map(|(vertices, r)| ConvexValue { vertices, ball_radius: r })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn support_is_sublinear_with_member_witness(c in polytope_value(), p in direction(), q in direction(), l in 0.1f64..5.0) {
        let s = |d: &[f64]| c.support(d).value;
        prop_assert!((s(&linalg::scale(&p, l)) - l * s(&p)).abs() <= 1e-9 * (1.0 + s(&p).abs()) * l.max(1.0));
        prop_assert!(s(&linalg::add(&p, &q)) <= s(&p) + s(&q) + 1e-9);
        let w = c.support(&p).witness;
        prop_assert!((dot(&p, &w) - s(&p)).abs() <= 1e-9 * (1.0 + norm(&p)));
        prop_assert!(c.distance_estimate(&w) <= 1e-9);
    }

    #[test]
    fn inner_product_bounds_are_ordered(a in polytope_value(), b in polytope_value(), x in direction(), y in direction()) {
        let (lo, hi) = inner_product_bounds(&a, &b);
        prop_assert!(lo <= hi + 1e-12);
        let (lo, hi) = inner_product_bounds(&ConvexValue::point(x.clone()), &ConvexValue::point(y.clone()));
        prop_assert!((lo - dot(&x, &y)).abs() < 1e-12 && (hi - dot(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn tangent_selection_is_a_member(theta in 0.0f64..std::f64::consts::TAU, r in 0.2f64..1.5, c in prop::collection::vec(-1.0f64..1.0, 2)) {
        let f = MultiMap::new(
            2,
            MultiMapKind::Ball { center: VectorField::constant(c.clone()), radius: TimePoly::constant(r) },
            1.0,
            norm(&c) + r,
        )
        .unwrap();
        let rep = LipschitzFunction::new(Expr::norm(2).plus(-1.0).unwrap(), 2).unwrap();
        let x = [theta.cos(), theta.sin()];
        if let Some(v) = select_tangent(&f, &rep, 0.0, &x, 1e-6, &cfg()).unwrap() {
            for d in linalg::sphere_directions(2, 16) {
                prop_assert!(dot(&d, &v) <= f.support(0.0, &x, &d).value + 1e-9);
            }
            prop_assert!(dot(&x, &v) <= -1e-6 + 1e-9);
        }
    }

    #[test]
    fn graph_approximations_are_nested(m in 1u32..4, x in point(), p in direction()) {
        let f = MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::linear(vec![vec![0.0, -1.0], vec![1.0, 0.5]]) }, 1.0, 4.0).unwrap();
        let coarse = graph_approx(&f, m, 0.3, &x, 5).unwrap();
        let fine = graph_approx(&f, m + 1, 0.3, &x, 5).unwrap();
        prop_assert!(fine.support(&p).value <= coarse.support(&p).value + 1e-9);
    }
}

fn matrix2() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn speed_and_viability_bounds_hold(x0 in prop::collection::vec(-0.7f64..0.7, 2), eps in 0.0f64..0.05, m in matrix2()) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Distance).unwrap();
        let f = MultiMap::singleton(VectorField::linear(m), 2, 1.0, &k.ref_box).unwrap();
        let cfg = IntegratorConfig { thicken_eps: eps, ..IntegratorConfig::with_step(1e-2) };
        let a = solve_ivp(&f, &k, &x0, 1.0, &cfg).unwrap();
        let budget = f.bound_c * 2.0;
        for w in a.states.windows(2) {
            prop_assert!(linalg::dist(&w[0], &w[1]) <= budget * a.h + 1e-12);
        }
        for x in &a.states {
            prop_assert!(k.rep.eval(x).unwrap() <= eps + 1e-8);
        }
        let b = solve_ivp(&f, &k, &x0, 1.0, &cfg).unwrap();
        prop_assert_eq!(a.states, b.states);
    }

    #[test]
    fn grid_degree_matches_sign_det(m in matrix2()) {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        prop_assume!(det.abs() > 0.05);
        let mc = m.clone();
        let custom = ContinuousMap::custom(2, move |x: &[f64]| linalg::mat_vec(&mc, x));
        let r = brouwer_degree(&custom, &Region::unit_ball(2), &[0.0, 0.0], 0).unwrap();
        prop_assert_eq!(r.degree, det.signum() as i64);
    }

    #[test]
    fn bohl_homotopy_preserves_degree(m in matrix2(), e in matrix2(), s in 0.0f64..0.5) {
        let m2: Vec<Vec<f64>> = m.iter().zip(&e).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + s * v).collect()).collect();
        let (a, b) = (m.clone(), m2.clone());
        let fa = move |x: &[f64]| linalg::mat_vec(&a, x);
        let fb = move |x: &[f64]| linalg::mat_vec(&b, x);
        let samples = Region::unit_ball(2).boundary_samples(256);
        // The slack |a| + |b| − |a − b| is 2(‖A‖ + ‖B‖)-Lipschitz, so this
        // margin rules out an antiparallel pair between neighbouring samples.
        let fro = |m: &Vec<Vec<f64>>| m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let margin = (fro(&m) + fro(&m2)) * std::f64::consts::TAU / 256.0;
        let pb = poincare_bohl_check(&fa, &fb, &samples, margin).unwrap();
        if pb.holds {
            let da = brouwer_degree(&ContinuousMap::Linear { matrix: m, offset: None }, &Region::unit_ball(2), &[0.0, 0.0], 0);
            let db = brouwer_degree(&ContinuousMap::Linear { matrix: m2, offset: None }, &Region::unit_ball(2), &[0.0, 0.0], 0);
            if let (Ok(da), Ok(db)) = (da, db) {
                prop_assert_eq!(da.degree, db.degree);
            }
        }
    }

    #[test]
    fn null_space_projector_is_idempotent(theta in 0.0f64..std::f64::consts::TAU, s in 0.2f64..2.0, fix in 0usize..3) {
        // A rotation-scaling block times a diagonal entry, some of which may be 1.
        let d = if fix == 0 { 1.0 } else { 0.5 * fix as f64 + 0.3 };
        let c = vec![
            vec![s * theta.cos(), -s * theta.sin(), 0.0],
            vec![s * theta.sin(), s * theta.cos(), 0.0],
            vec![0.0, 0.0, d],
        ];
        let split = floquet_split(&c).unwrap();
        let p = linalg::to_dmatrix(&split.projector);
        prop_assert!((&p * &p - &p).abs().max() <= 1e-12);
        let imc = nalgebra::DMatrix::identity(3, 3) - linalg::to_dmatrix(&c);
        let cn = linalg::to_dmatrix(&c).norm();
        prop_assert!((imc * p).abs().max() <= 1e-10 * cn.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn borsuk_pass_implies_pointwise_gap(m in matrix2(), seed in 0u64..100) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Squared).unwrap();
        let f = MultiMap::singleton(VectorField::linear(m.clone()), 2, 1.0, &k.ref_box).unwrap();
        let cfg = CheckConfig { boundary_samples: 6, time_samples: 2, seed, ..Default::default() };
        let r = check_borsuk(&k, &f, &cfg).unwrap();
        let direct = r.get("gap_direct").unwrap();
        for s in &direct.samples {
            if s.status != Status::Pass {
                continue;
            }
            let x = &s.point;
            let gx = linalg::mat_vec(&m, x);
            let gm = linalg::mat_vec(&m, &linalg::scale(x, -1.0));
            prop_assert!(upper_dd(&k.rep, x, &gx, &cfg.clarke).unwrap() < 0.0);
            prop_assert!(lower_dd(&k.rep, x, &gm, &cfg.clarke).unwrap() > 0.0);
            let (a, b) = borsuk_quantities(&k, &f, x, &cfg).unwrap();
            prop_assert!(a < 0.0 && b > 0.0);
        }
    }

    #[test]
    fn multipoint_apply_is_weighted_state(a1 in -1.0f64..1.0, a2 in -1.0f64..1.0, t1 in 0.1f64..0.9) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 2.0, RepChoice::Distance).unwrap();
        let f = MultiMap::singleton(VectorField::constant(vec![1.0, 0.0]), 2, 1.0, &k.ref_box).unwrap();
        let tr = solve_ivp(&f, &k, &[-0.5, 0.0], 1.0, &IntegratorConfig::with_step(1e-3)).unwrap();
        let g = BoundaryOperator::Multipoint { alphas: vec![a1, a2], times: vec![t1, 1.0] };
        let v = apply_boundary(&g, &tr).unwrap();
        let oracle = a1 * (-0.5 + t1) + a2 * 0.5;
        prop_assert!((v[0] - oracle).abs() < 1e-9 && v[1].abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn accepted_solutions_recompute_within_tolerance(rate in 0.3f64..2.0, alpha in 0.0f64..0.9) {
        let k = ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Distance).unwrap();
        let f = MultiMap::singleton(VectorField::linear(vec![vec![-rate, 0.0], vec![0.0, -rate]]), 2, 1.0, &k.ref_box).unwrap();
        let g = BoundaryOperator::Multipoint { alphas: vec![alpha], times: vec![1.0] };
        let cfg = SolverConfig { integrator: IntegratorConfig::with_step(2e-2), lattice: 2, ..Default::default() };
        let out = solve_nonlocal(&k, &f, &g, &cfg).unwrap();
        prop_assert!(out.found());
        for s in &out.solutions {
            let (b, v) = s.recompute(&f, &k, &g).unwrap();
            prop_assert!(b <= cfg.bvp_tol && v <= s.eps + cfg.viability_tol);
        }
    }
}
