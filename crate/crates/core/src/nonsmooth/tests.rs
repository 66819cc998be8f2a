use super::*;

fn abs1() -> LipschitzFunction {
    LipschitzFunction::new(Expr::norm(1), 1).unwrap()
}

fn max12() -> LipschitzFunction {
    LipschitzFunction::new(Expr::max(vec![Expr::coord(2, 0), Expr::coord(2, 1)]), 2).unwrap()
}

fn dist_disc() -> LipschitzFunction {
    LipschitzFunction::new(Expr::dist_ball(vec![0.0, 0.0], 1.0), 2).unwrap()
}

fn two_circles() -> LipschitzFunction {
    let circle = |c: f64| Expr::abs(Expr::norm_at(vec![c, 0.0]).plus(-1.0).unwrap());
    LipschitzFunction::new(Expr::min(vec![circle(1.0), circle(-1.0)]), 2).unwrap()
}

fn cfg() -> ClarkeConfig {
    ClarkeConfig::default()
}

/// limsup oracle: sup over a grid of base points y near x and shrinking h.
fn limsup_oracle(f: &LipschitzFunction, x: &[f64], v: &[f64], delta: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let steps = 10;
    for i in -steps..=steps {
        for j in -steps..=steps {
            let y = [x[0] + delta * i as f64 / steps as f64, x[1] + delta * j as f64 / steps as f64];
            for h in [delta, delta * 0.1, delta * 0.01] {
                let z = [y[0] + h * v[0], y[1] + h * v[1]];
                best = best.max((f.value(&z) - f.value(&y)) / h);
            }
        }
    }
    best
}

#[test]
fn eval_examples() {
    assert_eq!(abs1().eval(&[-2.0]).unwrap(), 2.0);
    assert_eq!(max12().eval(&[3.0, 5.0]).unwrap(), 5.0);
    assert_eq!(dist_disc().eval(&[2.0, 0.0]).unwrap(), 1.0);
}

#[test]
fn eval_outside_domain_is_an_error() {
    let f = abs1().with_domain(BoxDomain::cube(1, 1.0)).unwrap();
    assert!(matches!(f.eval(&[3.0]), Err(Error::Domain { .. })));
    assert!(matches!(clarke_gradient(&f, &[1.0], &cfg()), Err(Error::DomainBoundary { .. })));
}

#[test]
fn gradient_of_abs_at_zero_is_interval() {
    let b = clarke_gradient(&abs1(), &[0.0], &cfg()).unwrap();
    assert!(b.exact);
    assert!((b.support(&[1.0]) - 1.0).abs() < 1e-15);
    assert!((b.min_support(&[1.0]) + 1.0).abs() < 1e-15);
}

#[test]
fn gradient_of_max_at_tie_is_segment() {
    let b = clarke_gradient(&max12(), &[0.0, 0.0], &cfg()).unwrap();
    assert!(b.exact);
    assert_eq!(b.vectors.len(), 2);
    assert!(b.vectors.contains(&vec![1.0, 0.0]) && b.vectors.contains(&vec![0.0, 1.0]));
}

#[test]
fn two_circle_gradient_contains_both_nearest_point_directions() {
    let x = [0.0, 0.5];
    // Brute-force nearest points on each circle.
    let oracle: Vec<Vec<f64>> = [1.0, -1.0]
        .iter()
        .map(|&c| {
            let mut best = (f64::INFINITY, [0.0, 0.0]);
            for k in 0..200_000 {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 200_000.0;
                let p = [c + a.cos(), a.sin()];
                let d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
                if d < best.0 {
                    best = (d, p);
                }
            }
            vec![(x[0] - best.1[0]) / best.0, (x[1] - best.1[1]) / best.0]
        })
        .collect();
    let b = clarke_gradient(&two_circles(), &x, &cfg()).unwrap();
    assert!(!b.exact);
    for g in &oracle {
        let nearest = b.vectors.iter().map(|p| linalg::dist(p, g)).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-3, "oracle gradient {g:?} missing, nearest {nearest}");
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let f = two_circles();
    let c = ClarkeConfig { seed: 7, ..Default::default() };
    let a = clarke_gradient(&f, &[0.0, 0.5], &c).unwrap();
    let b = clarke_gradient(&f, &[0.0, 0.5], &c).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gradient_argument_errors() {
    let c = ClarkeConfig { sample_count: Some(2), ..Default::default() };
    assert!(matches!(clarke_gradient(&max12(), &[0.0, 0.0], &c), Err(Error::Argument(_))));
    let c = ClarkeConfig { radius: Some(0.0), ..Default::default() };
    assert!(matches!(clarke_gradient(&max12(), &[0.0, 0.0], &c), Err(Error::Argument(_))));
}

#[test]
fn upper_dd_examples() {
    assert_eq!(upper_dd(&abs1(), &[0.0], &[1.0], &cfg()).unwrap(), 1.0);
    let sq = LipschitzFunction::new(Expr::squared_norm(2, 0.0), 2).unwrap();
    assert!((upper_dd(&sq, &[1.0, 0.0], &[-1.0, 0.0], &cfg()).unwrap() + 2.0).abs() < 1e-12);
    let f = dist_disc();
    let got = upper_dd(&f, &[1.0, 0.0], &[0.0, 1.0], &cfg()).unwrap();
    let oracle = limsup_oracle(&f, &[1.0, 0.0], &[0.0, 1.0], 1e-4);
    assert!(got.abs() < 1e-12);
    assert!(oracle.abs() < 1e-3, "oracle {oracle}");
}

#[test]
fn lower_dd_examples() {
    assert_eq!(lower_dd(&abs1(), &[0.0], &[1.0], &cfg()).unwrap(), -1.0);
    let sq = LipschitzFunction::new(Expr::squared_norm(2, 0.0), 2).unwrap();
    assert!((lower_dd(&sq, &[1.0, 0.0], &[1.0, 0.0], &cfg()).unwrap() - 2.0).abs() < 1e-12);
    // liminf oracle for −|·| at 0 along v = 1
    let f = abs1().negated();
    let mut oracle = f64::INFINITY;
    for i in -50..=50 {
        let y = 1e-4 * i as f64 / 50.0;
        for h in [1e-4, 1e-5, 1e-6] {
            oracle = oracle.min((f.value(&[y + h]) - f.value(&[y])) / h);
        }
    }
    let got = lower_dd(&f, &[0.0], &[1.0], &cfg()).unwrap();
    assert_eq!(got, -1.0);
    assert!((oracle + 1.0).abs() < 1e-9);
}

#[test]
fn polar_cone_examples() {
    // The signed representation |x| − 1 of the unit disc has the single
    // gradient n at boundary points.
    let delta = LipschitzFunction::new(Expr::norm(2).plus(-1.0).unwrap(), 2).unwrap();
    let x = [1.0, 0.0];
    assert_eq!(in_polar_cone(&delta, &x, &[-1.0, 0.0], 1e-6, &cfg()).unwrap(), PolarStatus::Inside);
    assert_eq!(in_polar_cone(&delta, &x, &[1.0, 0.0], 1e-6, &cfg()).unwrap(), PolarStatus::Outside);
    assert_eq!(in_polar_cone(&delta, &x, &[0.0, 1.0], 1e-6, &cfg()).unwrap(), PolarStatus::Uncertain);
    // With the distance function the gradient is co{0, n}: outward stays
    // outside, tangential and inward sit on the cone boundary.
    let d = dist_disc();
    assert_eq!(in_polar_cone(&d, &x, &[1.0, 0.0], 1e-6, &cfg()).unwrap(), PolarStatus::Outside);
    assert_eq!(in_polar_cone(&d, &x, &[0.0, 1.0], 1e-6, &cfg()).unwrap(), PolarStatus::Uncertain);
    assert!(in_polar_cone(&d, &x, &[0.0, 1.0], 0.0, &cfg()).is_err());
}

#[test]
fn dini_examples() {
    let grid: Vec<f64> = (0..8).map(|k| 10f64.powi(-k - 1)).collect();
    assert!((dini_upper(&abs1(), &[0.0], &[1.0], &grid).unwrap() - 1.0).abs() < 1e-12);
    assert!((dini_upper(&abs1().negated(), &[0.0], &[1.0], &grid).unwrap() + 1.0).abs() < 1e-12);
    let f = LipschitzFunction::new(Expr::max(vec![Expr::coord(1, 0), Expr::coord(1, 0).scaled(2.0)]), 1).unwrap();
    let got = dini_upper(&f, &[0.0], &[1.0], &grid).unwrap();
    let oracle = grid.iter().map(|h| f.value(&[*h]) / h).fold(f64::NEG_INFINITY, f64::max);
    assert!((got - 2.0).abs() < 1e-12 && (oracle - 2.0).abs() < 1e-12);
    assert!(dini_upper(&f, &[0.0], &[1.0], &[]).is_err());
    assert!(dini_upper(&f, &[0.0], &[1.0], &[1e-3, 1e-2]).is_err());
}

#[test]
fn norm_at_center_gives_unit_ball() {
    let f = LipschitzFunction::new(Expr::norm(3), 3).unwrap();
    let b = clarke_gradient(&f, &[0.0; 3], &cfg()).unwrap();
    assert!(b.exact);
    assert_eq!(b.ball_radius, 1.0);
    assert!((b.support(&[0.0, 3.0, 4.0]) - 5.0).abs() < 1e-12);
}

#[test]
fn polytope_distance_and_projection() {
    // Unit box [-1, 1]².
    let normals = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let f = LipschitzFunction::new(Expr::DistPolytope { normals, offsets: vec![1.0; 4] }, 2).unwrap();
    assert!((f.value(&[3.0, 0.5]) - 2.0).abs() < 1e-12);
    assert!((f.value(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(f.value(&[0.2, 0.3]), 0.0);
    let b = clarke_gradient(&f, &[1.0, 0.0], &cfg()).unwrap();
    assert!(b.exact && b.vectors.len() == 2);
    let corner = clarke_gradient(&f, &[1.0, 1.0], &cfg()).unwrap();
    assert!(!corner.exact);
}

#[test]
fn composition_with_surjective_linear_map_is_exact() {
    let inner = SmoothMap::Linear { matrix: vec![vec![2.0, 0.0], vec![0.0, 1.0]], offset: None };
    let f = LipschitzFunction::new(Expr::compose(inner, Expr::norm(2)), 2).unwrap();
    assert!((f.value(&[1.0, 1.0]) - 5f64.sqrt()).abs() < 1e-12);
    let b = clarke_gradient(&f, &[1.0, 1.0], &cfg()).unwrap();
    assert!(b.exact);
    let g = &b.vectors[0];
    assert!((g[0] - 4.0 / 5f64.sqrt()).abs() < 1e-12 && (g[1] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn validation_rejects_malformed_trees() {
    assert!(LipschitzFunction::new(Expr::max(vec![]), 2).is_err());
    assert!(LipschitzFunction::new(Expr::coord(3, 0), 2).is_err());
    assert!(LipschitzFunction::new(Expr::dist_ball(vec![0.0, 0.0], -1.0), 2).is_err());
}

#[test]
fn json_round_trip() {
    let f = two_circles().with_lipschitz(1.0);
    let s = serde_json::to_string(&f).unwrap();
    let g: LipschitzFunction = serde_json::from_str(&s).unwrap();
    assert_eq!(f.value(&[0.3, 0.7]), g.value(&[0.3, 0.7]));
    let parsed: LipschitzFunction = serde_json::from_str(
        r#"{"dim":2,"expr":{"kind":"max","args":[{"kind":"affine","coeffs":[1,0]},{"kind":"affine","coeffs":[0,1]}]}}"#,
    )
    .unwrap();
    assert_eq!(parsed.value(&[3.0, 5.0]), 5.0);
}
