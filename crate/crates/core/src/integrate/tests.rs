use super::*;
use crate::geometry::{Circle, RepChoice};
use crate::multimap::TimePoly;
use std::f64::consts::PI;

fn decay() -> MultiMap {
    MultiMap::new(
        2,
        MultiMapKind::Singleton { field: VectorField::linear(vec![vec![-1.0, 0.0], vec![0.0, -1.0]]) },
        1.0,
        1.5,
    )
    .unwrap()
}

fn disc() -> ConstraintSet {
    ConstraintSet::ball(vec![0.0, 0.0], 1.0, RepChoice::Distance).unwrap()
}

fn two_circles() -> ConstraintSet {
    ConstraintSet::circle_union(
        vec![Circle { center: vec![1.0, 0.0], radius: 1.0 }, Circle { center: vec![-1.0, 0.0], radius: 1.0 }],
        None,
    )
    .unwrap()
}

fn circle_field() -> MultiMap {
    MultiMap::new(2, MultiMapKind::TwoCircles { tie_radius: 0.05 }, 4.0 * PI, 1.0).unwrap()
}

fn circle_distance(x: &[f64]) -> f64 {
    let d1 = (linalg::dist(x, &[1.0, 0.0]) - 1.0).abs();
    let d2 = (linalg::dist(x, &[-1.0, 0.0]) - 1.0).abs();
    d1.min(d2)
}

fn decay_error(h: f64) -> f64 {
    let tr = solve_ivp(&decay(), &disc(), &[1.0, 0.0], 1.0, &IntegratorConfig::with_step(h)).unwrap();
    tr.times.iter().zip(&tr.states).map(|(t, x)| linalg::dist(x, &[(-t).exp(), 0.0])).fold(0.0, f64::max)
}

#[test]
fn exponential_decay_matches_closed_form() {
    let h = 1e-3;
    let tr = solve_ivp(&decay(), &disc(), &[1.0, 0.0], 1.0, &IntegratorConfig::with_step(h)).unwrap();
    assert_eq!(tr.times.len(), 1001);
    assert!(decay_error(h) < h);
    assert!(tr.viability_residual <= 1e-12);
    assert!(tr.inclusion_residual <= 1e-12);
}

#[test]
fn step_halving_halves_error() {
    let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|h| decay_error(*h)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() <= 0.4, "{e:?}");
    }
}

#[test]
fn zero_field_gives_constant_trajectory() {
    let zero =
        MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::constant(vec![0.0, 0.0]) }, 1.0, 1.0).unwrap();
    let x0 = [0.3, -0.2];
    let tr = solve_ivp(&zero, &disc(), &x0, 1.0, &IntegratorConfig::with_step(0.01)).unwrap();
    assert!(tr.states.iter().all(|x| x == &x0.to_vec()));
    let r = residual_report(&tr, &zero, &disc());
    assert_eq!((r.viability, r.inclusion, r.speed), (0.0, 0.0, 0.0));
}

#[test]
fn two_circle_field_from_origin_stays_on_a_circle() {
    let h = 1e-3;
    let tr =
        solve_ivp(&circle_field(), &two_circles(), &[0.0, 0.0], PI / 2.0, &IntegratorConfig::with_step(h)).unwrap();
    let end = tr.terminal();
    assert!(circle_distance(end) <= 5.0 * h, "{end:?}");
}

#[test]
fn two_circle_branches_from_origin() {
    let cfg = IntegratorConfig { h: 1e-3, thicken_eps: 0.0125, ..Default::default() };
    let runs = sample_solution_set(&circle_field(), &two_circles(), &[0.0, 0.0], PI / 2.0, 8, 42, &cfg).unwrap();
    let mut families = [0, 0];
    for tr in runs {
        let tr = tr.unwrap();
        // Arc oracles: clockwise on S1 from the origin, counterclockwise on S-1.
        let right = |t: f64| [1.0 - t.cos(), t.sin()];
        let left = |t: f64| [-1.0 + t.cos(), t.sin()];
        let side = if tr.terminal()[0] > 0.0 { 0 } else { 1 };
        families[side] += 1;
        let err = tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(t, x)| linalg::dist(x, &if side == 0 { right(*t) } else { left(*t) }))
            .fold(0.0, f64::max);
        assert!(err < 0.05, "{err}");
        assert!(tr.states.iter().all(|x| circle_distance(x) <= 0.0125 + 1e-3));
    }
    assert!(families[0] > 0 && families[1] > 0, "{families:?}");
}

#[test]
fn singleton_solution_set_is_one_trajectory() {
    let runs =
        sample_solution_set(&decay(), &disc(), &[0.5, 0.5], 1.0, 4, 7, &IntegratorConfig::with_step(0.01)).unwrap();
    let first = runs[0].as_ref().unwrap().states.clone();
    assert!(runs.iter().all(|r| r.as_ref().unwrap().states == first));
}

#[test]
fn ball_solution_set_respects_speed_bound() {
    let ball = MultiMap::new(
        2,
        MultiMapKind::Ball { center: VectorField::constant(vec![0.0, 0.0]), radius: TimePoly::constant(1.0) },
        1.0,
        1.0,
    )
    .unwrap();
    let k = ConstraintSet::ball(vec![0.0, 0.0], 10.0, RepChoice::Distance).unwrap();
    let runs = sample_solution_set(&ball, &k, &[0.0, 0.0], 1.0, 8, 3, &IntegratorConfig::with_step(0.01)).unwrap();
    assert_eq!(runs.len(), 8);
    let ends: Vec<Vec<f64>> = runs.iter().map(|r| r.as_ref().unwrap().terminal().to_vec()).collect();
    for r in &runs {
        let tr = r.as_ref().unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!(norm(x) <= t + 1e-9);
        }
    }
    assert!(linalg::dist(&ends[0], &ends[1]) > 1e-3);
}

#[test]
fn residual_report_recomputes() {
    let mut tr = solve_ivp(&decay(), &disc(), &[1.0, 0.0], 1.0, &IntegratorConfig::with_step(1e-3)).unwrap();
    let r = residual_report(&tr, &decay(), &disc());
    assert!(r.inclusion <= 1e-2);
    assert!(r.speed <= 1.0 + 1e-12);
    tr.states[500] = vec![1.3, 0.0];
    let r = residual_report(&tr, &decay(), &disc());
    assert!((r.viability - 0.3).abs() < 1e-12);
}

#[test]
fn runs_are_deterministic_bytewise() {
    let cfg = IntegratorConfig {
        h: 1e-2,
        selection: SelectionMode::ExtremePoint { seed: 9, direction: None },
        ..Default::default()
    };
    let a = solve_ivp(&decay(), &disc(), &[0.6, 0.1], 1.0, &cfg).unwrap().to_csv().unwrap();
    let b = solve_ivp(&decay(), &disc(), &[0.6, 0.1], 1.0, &cfg).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("t,x1,x2,v1,v2,f(x)\n"));
}

#[test]
fn exact_linear_stepper_matches_matrix_exponential() {
    let a = vec![vec![-0.5, -1.0], vec![1.0, -0.5]];
    let f = MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::linear(a) }, 1.0, 2.0).unwrap();
    let cfg = IntegratorConfig { h: 0.01, stepper: Stepper::ExactLinear, ..Default::default() };
    let x0 = [0.6, -0.3];
    let tr = solve_ivp(&f, &disc(), &x0, 1.0, &cfg).unwrap();
    let (c, s, d) = (1f64.cos(), 1f64.sin(), (-0.5f64).exp());
    let expect = [d * (c * x0[0] - s * x0[1]), d * (s * x0[0] + c * x0[1])];
    assert!(linalg::dist(tr.terminal(), &expect) < 1e-13);
    let ball = MultiMap::new(
        2,
        MultiMapKind::Ball { center: VectorField::constant(vec![0.0, 0.0]), radius: TimePoly::constant(1.0) },
        1.0,
        1.0,
    )
    .unwrap();
    assert!(matches!(solve_ivp(&ball, &disc(), &x0, 1.0, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn pullback_keeps_outward_field_viable() {
    let out =
        MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::constant(vec![1.0, 0.0]) }, 1.0, 1.0).unwrap();
    let tr = solve_ivp(&out, &disc(), &[0.5, 0.0], 1.0, &IntegratorConfig::with_step(1e-2)).unwrap();
    assert!(tr.viability_residual <= 1e-12);
    assert!(!tr.violations.is_empty());
    assert!(residual_report(&tr, &out, &disc()).speed <= 2.0 + 1e-12);
}

#[test]
fn failure_modes() {
    let out =
        MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::constant(vec![1.0, 0.0]) }, 1.0, 1.0).unwrap();
    let cfg = IntegratorConfig { h: 1e-2, pullback_budget: Some(0.0), ..Default::default() };
    assert!(matches!(solve_ivp(&out, &disc(), &[0.99, 0.0], 1.0, &cfg), Err(Error::Viability { .. })));
    let up =
        MultiMap::new(2, MultiMapKind::Singleton { field: VectorField::constant(vec![0.0, 5.0]) }, 1.0, 5.0).unwrap();
    let half = ConstraintSet::halfspace(vec![1.0, 0.0], 0.0, None).unwrap();
    assert!(matches!(
        solve_ivp(&up, &half, &[0.0, 0.0], 10.0, &IntegratorConfig::with_step(0.01)),
        Err(Error::Divergence { .. })
    ));
    assert!(solve_ivp(&decay(), &disc(), &[2.0, 0.0], 1.0, &IntegratorConfig::default()).is_err());
    assert!(solve_ivp(&decay(), &disc(), &[0.0, 0.0], 1.0, &IntegratorConfig::with_step(0.0)).is_err());
}
