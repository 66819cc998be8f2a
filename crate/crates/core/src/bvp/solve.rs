//! Multistart solvers for `ẋ ∈ F(t, x)`, `x(0) = g(x)`: damped fixed-point
//! iteration of `g ∘ S_F`, Nelder–Mead shooting with a Newton polish, and
//! λ-continuation, optionally over a decreasing schedule of thickenings.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boundary::{apply_boundary, boundary_defect, boundary_residual, BoundaryOperator};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConstraintSet;
use crate::integrate::{self, IntegratorConfig, Trajectory};
use crate::linalg::{self, norm};
use crate::multimap::{MultiMap, MultiMapKind, TimePoly};

/// Thickenings tried, in order, for sets without interior.
pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

const FAILED_COST: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Poincare,
    #[default]
    Shooting,
    Continuation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub strategy: Strategy,
    pub integrator: IntegratorConfig,
    pub bvp_tol: f64,
    pub viability_tol: f64,
    /// Lattice nodes per axis for the multistart grid.
    pub lattice: usize,
    pub extra_starts: usize,
    /// Explicit starting points; replace the lattice when present.
    pub starts: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    /// Damping `β` of the fixed-point iteration.
    pub damping: f64,
    pub max_iter: usize,
    /// Edge length of the initial Nelder–Mead simplex.
    pub simplex_step: f64,
    pub lambda_steps: usize,
    /// Thickening schedule; defaults to [`DEFAULT_EPS_SCHEDULE`] when K has
    /// no interior and to `integrator.thicken_eps` otherwise.
    pub eps_schedule: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            strategy: Strategy::Shooting,
            integrator: IntegratorConfig::default(),
            bvp_tol: 1e-6,
            viability_tol: 1e-6,
            lattice: 3,
            extra_starts: 0,
            starts: None,
            seed: 0,
            damping: 0.5,
            max_iter: 100,
            simplex_step: 0.1,
            lambda_steps: 5,
            eps_schedule: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BVPSolution {
    pub initial: Vec<f64>,
    pub trajectory: Trajectory,
    pub boundary_residual: f64,
    pub viability_residual: f64,
    pub solver: Strategy,
    pub start_index: usize,
    /// Thickening the solution was computed in.
    pub eps: f64,
}

impl BVPSolution {
    /// Residuals recomputed from the stored trajectory.
    pub fn recompute(&self, f: &MultiMap, k: &ConstraintSet, g: &BoundaryOperator) -> Result<(f64, f64)> {
        let b = boundary_residual(g, &self.trajectory)?;
        let v = integrate::residual_report(&self.trajectory, f, k).viability;
        Ok((b, v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStage {
    pub eps: f64,
    pub accepted: usize,
    pub best_residual: f64,
    pub initials: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solutions: Vec<BVPSolution>,
    pub attempts: usize,
    /// Smallest boundary residual over all attempts, accepted or not.
    pub best_residual: f64,
    pub eps_family: Vec<EpsStage>,
    /// Linear extrapolation to `ε = 0` of the leading solution's start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolated_start: Option<Vec<f64>>,
}

impl SolveOutcome {
    pub fn found(&self) -> bool {
        !self.solutions.is_empty()
    }
}

struct Problem<'a> {
    k: &'a ConstraintSet,
    f: MultiMap,
    g: &'a BoundaryOperator,
    icfg: IntegratorConfig,
    eps: f64,
}

impl Problem<'_> {
    fn feasible(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.k.rep.in_domain(x) {
            return None;
        }
        if self.k.rep.value(x) <= self.eps {
            return Some(x.to_vec());
        }
        self.k.pull_into(x, 0.5 * self.eps)
    }

    fn run(&self, x0: &[f64]) -> Result<Trajectory> {
        integrate::solve_ivp(&self.f, self.k, x0, self.f.horizon, &self.icfg)
    }

    fn defect(&self, x0: &[f64]) -> Option<Vec<f64>> {
        let tr = self.run(x0).ok()?;
        boundary_defect(self.g, &tr).ok()
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let Some(y) = self.feasible(x) else { return FAILED_COST };
        match self.defect(&y) {
            Some(d) => linalg::dot(&d, &d) + linalg::dist(x, &y).powi(2),
            None => FAILED_COST,
        }
    }
}

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(Problem::cost(self, p))
    }
}

fn poincare(p: &Problem, start: &[f64], cfg: &SolverConfig) -> Option<Vec<f64>> {
    let mut x = p.feasible(start)?;
    let beta = cfg.damping;
    for _ in 0..cfg.max_iter {
        let Ok(tr) = p.run(&x) else { break };
        let Ok(gx) = apply_boundary(p.g, &tr) else { break };
        if linalg::dist(&x, &gx) <= 0.01 * cfg.bvp_tol {
            break;
        }
        let next = linalg::add(&linalg::scale(&x, 1.0 - beta), &linalg::scale(&gx, beta));
        x = p.feasible(&next)?;
    }
    Some(x)
}

fn newton_polish(p: &Problem, x: Vec<f64>, target: f64) -> Vec<f64> {
    let n = x.len();
    let mut x = x;
    let Some(mut d) = p.defect(&x) else { return x };
    for _ in 0..8 {
        let r = norm(&d);
        if r <= target {
            break;
        }
        let step = 1e-7 * (1.0 + norm(&x));
        let mut jac = nalgebra::DMatrix::<f64>::zeros(d.len(), n);
        for j in 0..n {
            let mut y = x.clone();
            y[j] += step;
            let Some(dj) = p.defect(&y) else { return x };
            for i in 0..d.len() {
                jac[(i, j)] = (dj[i] - d[i]) / step;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(d.len(), d.iter().map(|v| -v));
        let Some(s) = jac.lu().solve(&rhs) else { break };
        let mut improved = false;
        let mut alpha = 1.0;
        for _ in 0..6 {
            let trial: Vec<f64> = x.iter().zip(s.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Some(y) = p.feasible(&trial) {
                if let Some(dy) = p.defect(&y) {
                    if norm(&dy) < r {
                        x = y;
                        d = dy;
                        improved = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

fn shooting(p: &Problem, start: &[f64], cfg: &SolverConfig) -> Option<Vec<f64>> {
    let x = p.feasible(start)?;
    let target = 0.01 * cfg.bvp_tol;
    if p.defect(&x).is_some_and(|d| norm(&d) <= target) {
        return Some(x);
    }
    let n = x.len();
    let mut simplex = vec![x.clone()];
    for i in 0..n {
        let mut y = x.clone();
        y[i] += cfg.simplex_step;
        simplex.push(y);
    }
    // Stop once the simplex costs agree to the target scale; discretized
    // flows are piecewise smooth, so the target itself may be out of reach.
    let solver = NelderMead::new(simplex).with_sd_tolerance(target * target).ok()?;
    let best = Executor::new(Problem { k: p.k, f: p.f.clone(), g: p.g, icfg: p.icfg.clone(), eps: p.eps }, solver)
        .configure(|s| s.max_iters(cfg.max_iter as u64).target_cost(target * target))
        .run()
        .ok()
        .and_then(|r| r.state.get_best_param().cloned())
        .unwrap_or(x);
    let y = p.feasible(&best)?;
    Some(newton_polish(p, y, target))
}

fn scaled_map(f: &MultiMap, lambda: f64) -> Result<MultiMap> {
    let map = MultiMapKind::Scaled { factor: TimePoly::constant(lambda), inner: Box::new(f.map.clone()) };
    MultiMap::new(f.dim, map, f.horizon, (lambda * f.bound_c).max(f64::MIN_POSITIVE))
}

fn continuation(p: &Problem, start: &[f64], cfg: &SolverConfig) -> Option<Vec<f64>> {
    let mut x = p.feasible(start)?;
    let steps = cfg.lambda_steps.max(1);
    for j in 1..=steps {
        let lambda = j as f64 / steps as f64;
        let f = if j == steps { p.f.clone() } else { scaled_map(&p.f, lambda).ok()? };
        let q = Problem { k: p.k, f, g: p.g, icfg: p.icfg.clone(), eps: p.eps };
        x = shooting(&q, &x, cfg)?;
    }
    Some(x)
}

struct Candidate {
    start_index: usize,
    solution: Option<BVPSolution>,
    residual: f64,
    initial: Vec<f64>,
}

fn evaluate(p: &Problem, x0: Vec<f64>, start_index: usize, cfg: &SolverConfig) -> Candidate {
    let miss = |x: Vec<f64>| Candidate { start_index, solution: None, residual: f64::INFINITY, initial: x };
    let Ok(tr) = p.run(&x0) else { return miss(x0) };
    let Ok(b) = boundary_residual(p.g, &tr) else { return miss(x0) };
    let v = integrate::residual_report(&tr, &p.f, p.k).viability;
    let ok = b <= cfg.bvp_tol && v <= p.eps + cfg.viability_tol;
    Candidate {
        start_index,
        residual: b,
        initial: x0.clone(),
        solution: ok.then_some(BVPSolution {
            initial: x0,
            trajectory: tr,
            boundary_residual: b,
            viability_residual: v,
            solver: cfg.strategy,
            start_index,
            eps: p.eps,
        }),
    }
}

/// Lattice nodes `lo + (hi − lo)(j + 1)/(m + 1)` of the reference box plus
/// seeded uniform draws; kept if in `K_ε`, pulled onto K when K has no
/// interior, dropped otherwise.
fn multistarts(k: &ConstraintSet, cfg: &SolverConfig, eps: f64) -> Vec<Vec<f64>> {
    if let Some(s) = &cfg.starts {
        return s.clone();
    }
    let n = k.dim();
    let m = cfg.lattice.max(1);
    let (lo, hi) = (&k.ref_box.lo, &k.ref_box.hi);
    let mut raw = Vec::new();
    let total = m.checked_pow(n as u32).unwrap_or(usize::MAX).min(1 << 16);
    for idx in 0..total {
        let mut rem = idx;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let j = rem % m;
                rem /= m;
                lo[i] + (hi[i] - lo[i]) * (j + 1) as f64 / (m + 1) as f64
            })
            .collect();
        raw.push(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    for _ in 0..cfg.extra_starts {
        raw.push(linalg::random_in_box(&mut rng, lo, hi));
    }
    let thin = !k.has_interior();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for x in raw {
        let y = if k.contains(&x, eps) {
            Some(x)
        } else if thin {
            k.pull_into(&x, 0.5 * eps)
        } else {
            None
        };
        if let Some(y) = y {
            if !out.iter().any(|z| linalg::dist(z, &y) < 1e-9) {
                out.push(y);
            }
        }
    }
    out
}

fn distinct(mut sols: Vec<BVPSolution>, tol: f64) -> Vec<BVPSolution> {
    sols.sort_by(|a, b| a.boundary_residual.total_cmp(&b.boundary_residual).then(a.start_index.cmp(&b.start_index)));
    let mut out: Vec<BVPSolution> = Vec::new();
    for s in sols {
        if out.iter().all(|o| linalg::sup_dist(&o.trajectory.states, &s.trajectory.states) > tol) {
            out.push(s);
        }
    }
    out
}

/// Solve the nonlocal problem with multistarts. Sets without interior are
/// solved on `K_ε` along the thickening schedule, each stage warm-started
/// from the previous one.
pub fn solve_nonlocal(
    k: &ConstraintSet,
    f: &MultiMap,
    g: &BoundaryOperator,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    check_dim(k.dim(), f.dim)?;
    g.validate(f.dim, f.horizon)?;
    if !(cfg.bvp_tol > 0.0) || !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::Argument("bvp_tol must be positive and damping in (0, 1]".into()));
    }
    if let Some(s) = &cfg.starts {
        for x in s {
            check_dim(f.dim, x.len())?;
        }
    }
    let schedule: Vec<f64> = match &cfg.eps_schedule {
        Some(s) if !s.is_empty() => s.clone(),
        _ if !k.has_interior() => DEFAULT_EPS_SCHEDULE.to_vec(),
        _ => vec![cfg.integrator.thicken_eps],
    };
    let mut family = Vec::new();
    let mut attempts = 0;
    let mut best_residual = f64::INFINITY;
    let mut solutions = Vec::new();
    let mut starts: Vec<(usize, Vec<f64>)> = Vec::new();
    for (stage, &eps) in schedule.iter().enumerate() {
        if stage == 0 {
            starts = multistarts(k, cfg, eps).into_iter().enumerate().collect();
        }
        let icfg = IntegratorConfig { thicken_eps: eps, ..cfg.integrator.clone() };
        let p = Problem { k, f: f.clone(), g, icfg, eps };
        let cands: Vec<Candidate> = starts
            .par_iter()
            .map(|(i, x)| {
                let found = match cfg.strategy {
                    Strategy::Poincare => poincare(&p, x, cfg),
                    Strategy::Shooting => shooting(&p, x, cfg),
                    Strategy::Continuation => continuation(&p, x, cfg),
                };
                match found {
                    Some(x0) => evaluate(&p, x0, *i, cfg),
                    None => Candidate { start_index: *i, solution: None, residual: f64::INFINITY, initial: x.clone() },
                }
            })
            .collect();
        attempts += cands.len();
        let stage_best = cands.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
        best_residual = best_residual.min(stage_best);
        let mut next: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut ranked: Vec<&Candidate> = cands.iter().collect();
        ranked.sort_by(|a, b| a.residual.total_cmp(&b.residual).then(a.start_index.cmp(&b.start_index)));
        let accepted: Vec<BVPSolution> = ranked.iter().filter_map(|c| c.solution.clone()).collect();
        if accepted.is_empty() {
            next.extend(ranked.iter().take(4).map(|c| (c.start_index, c.initial.clone())));
        } else {
            next.extend(ranked.iter().filter(|c| c.solution.is_some()).map(|c| (c.start_index, c.initial.clone())));
        }
        let kept = distinct(accepted, 10.0 * cfg.bvp_tol);
        family.push(EpsStage {
            eps,
            accepted: kept.len(),
            best_residual: stage_best,
            initials: kept.iter().map(|s| s.initial.clone()).collect(),
        });
        solutions = kept;
        starts = next;
    }
    let extrapolated_start = extrapolate(&family);
    Ok(SolveOutcome { solutions, attempts, best_residual, eps_family: family, extrapolated_start })
}

/// Linear extrapolation to `ε = 0` through the leading start of the last
/// stage and its nearest counterpart in the stage before.
fn extrapolate(family: &[EpsStage]) -> Option<Vec<f64>> {
    let m = family.len();
    if m < 2 {
        return None;
    }
    let (last, prev) = (&family[m - 1], &family[m - 2]);
    let xl = last.initials.first()?;
    let xp = prev.initials.iter().min_by(|a, b| linalg::dist(a, xl).total_cmp(&linalg::dist(b, xl)))?;
    let de = last.eps - prev.eps;
    if de == 0.0 {
        return None;
    }
    let slope = linalg::scale(&linalg::sub(xl, xp), 1.0 / de);
    Some(linalg::axpy(xl, -last.eps, &slope))
}

/// Shooting on `x(T) − C x(0)`.
pub fn solve_floquet(k: &ConstraintSet, f: &MultiMap, c: &[Vec<f64>], cfg: &SolverConfig) -> Result<SolveOutcome> {
    let g = BoundaryOperator::Floquet { matrix: c.to_vec() };
    solve_nonlocal(k, f, &g, cfg)
}
