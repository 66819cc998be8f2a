//! Viable trajectories of `ẋ ∈ F(t, x)` on a constraint set: explicit Euler
//! with boundary-aware tangent selections and a representing-function
//! pullback, plus sampling of the solution set `S_F(x₀)`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{boundary_tol, ConstraintSet, RepKind};
use crate::linalg::{self, norm};
use crate::multimap::{self, MultiMap, MultiMapKind, VectorField};
use crate::nonsmooth::{ClarkeConfig, LipschitzFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionMode {
    /// The element of `F(t, x)` with the smallest `f°(x; ·)`, everywhere.
    TangentNearBoundary,
    /// Centroid of the value's vertices.
    ChebyshevCenter,
    /// Argmax of `⟨d, ·⟩` for a fixed unit `d`, given or drawn from `seed`.
    ExtremePoint {
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
    },
}

/// How a step advances the state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    #[default]
    Euler,
    /// Exact flow `e^{hA}` for autonomous affine singleton fields `ẋ = Ax + b`.
    ExactLinear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub h: f64,
    /// Width of the band `f > −collar` where tangent selections are used;
    /// defaults to `2·bound_c·h`.
    pub collar: Option<f64>,
    pub pullback_gain: f64,
    pub pullback_iters: usize,
    /// Largest pullback displacement per step, as a multiple of h; defaults
    /// to `bound_c`.
    pub pullback_budget: Option<f64>,
    pub selection: SelectionMode,
    /// Integrate in `K_ε = {f ≤ ε}`.
    pub thicken_eps: f64,
    /// Tangent objectives above this are logged as violations.
    pub tangent_tol: f64,
    pub stepper: Stepper,
    pub clarke: ClarkeConfig,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            h: 1e-3,
            collar: None,
            pullback_gain: 1.0,
            pullback_iters: 10,
            pullback_budget: None,
            selection: SelectionMode::TangentNearBoundary,
            thicken_eps: 0.0,
            tangent_tol: 1e-9,
            stepper: Stepper::Euler,
            clarke: ClarkeConfig::default(),
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(h: f64) -> Self {
        IntegratorConfig { h, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::Argument("step h must be positive".into()));
        }
        if self.collar.is_some_and(|c| !(c >= 0.0)) {
            return Err(Error::Argument("collar must be nonnegative".into()));
        }
        if !(self.thicken_eps >= 0.0) {
            return Err(Error::Argument("thicken_eps must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub point: Vec<f64>,
    /// `f°(x; v)` of the least violating selection.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub selections: Vec<Vec<f64>>,
    /// `f(x(tᵢ))` for the unthickened representing function.
    pub f_values: Vec<f64>,
    pub viability_residual: f64,
    pub inclusion_residual: f64,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub viability: f64,
    pub inclusion: f64,
    /// `max |x(tᵢ₊₁) − x(tᵢ)| / h`
    pub speed: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    /// Piecewise-linear interpolation of the states.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let i = (((t - self.times[0]) / self.h).floor() as usize).min(n - 2);
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let d = linalg::sub(&self.states[i + 1], &self.states[i]);
        linalg::axpy(&self.states[i], s, &d)
    }

    /// CSV with header `t,x1..xN,v1..vN,f(x)`.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("f(x)".into());
        w.write_record(&header)?;
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.states[i].iter().map(|v| v.to_string()));
            row.extend(self.selections[i].iter().map(|v| v.to_string()));
            row.push(self.f_values[i].to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Write `<stem>.csv` and the residual sidecar `<stem>.residuals.json`.
    pub fn write_files(&self, dir: &Path, stem: &str, report: &ResidualReport) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        let mut side = std::fs::File::create(dir.join(format!("{stem}.residuals.json")))?;
        let body = serde_json::json!({
            "residuals": report,
            "violations": self.violations,
            "h": self.h,
        });
        writeln!(side, "{}", serde_json::to_string_pretty(&body)?)?;
        Ok(())
    }
}

fn extreme_direction(mode: &SelectionMode, n: usize) -> Result<Option<Vec<f64>>> {
    match mode {
        SelectionMode::ExtremePoint { seed, direction } => match direction {
            Some(d) => {
                check_dim(n, d.len())?;
                linalg::normalized(d)
                    .map(Some)
                    .ok_or_else(|| Error::Argument("extreme-point direction must be nonzero".into()))
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(Some(linalg::random_unit(&mut rng, n)))
            }
        },
        _ => Ok(None),
    }
}

/// `(E, e)` with `x(t+h) = E x(t) + e` for `ẋ = Ax + b`.
fn exact_linear_step(f: &MultiMap, h: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let MultiMapKind::Singleton { field: VectorField::Affine { matrix, offset, time_terms } } = &f.map else {
        return Err(Error::Unsupported("exact linear stepping needs a singleton affine field".into()));
    };
    if !time_terms.is_empty() {
        return Err(Error::Unsupported("exact linear stepping needs an autonomous field".into()));
    }
    let n = f.dim;
    // Augmented generator [[A, b], [0, 0]] carries the offset.
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        if let Some(m) = matrix {
            for j in 0..n {
                aug[(i, j)] = h * m[i][j];
            }
        }
        if let Some(b) = offset {
            aug[(i, n)] = h * b[i];
        }
    }
    let e = aug.exp();
    let big = (0..n).map(|i| (0..n).map(|j| e[(i, j)]).collect()).collect();
    let small = (0..n).map(|i| e[(i, n)]).collect();
    Ok((big, small))
}

fn pull_direction(f: &LipschitzFunction, x: &[f64]) -> Option<Vec<f64>> {
    let g = f.rule_min_norm_gradient(x);
    if let Some(u) = linalg::normalized(&g) {
        return Some(u);
    }
    f.local(x).grads.iter().find_map(|g| linalg::normalized(g))
}

struct Stepping<'a> {
    f: &'a MultiMap,
    k: &'a ConstraintSet,
    work: LipschitzFunction,
    /// Function whose sign tells how deep a point sits in K_ε.
    depth: LipschitzFunction,
    cfg: &'a IntegratorConfig,
    collar: f64,
    budget: f64,
    direction: Option<Vec<f64>>,
    exact: Option<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl Stepping<'_> {
    fn select(&self, t: f64, x: &[f64], violations: &mut Vec<Violation>) -> Result<Vec<f64>> {
        let near = self.depth.value(x) > -self.collar;
        let value = self.f.value(t, x);
        if value.vertices.len() == 1 && value.ball_radius == 0.0 {
            let v = value.vertices[0].clone();
            if near && self.work.in_domain_interior(x) {
                let c = multimap::least_violating(self.f, &self.work, t, x, &self.cfg.clarke)?;
                if c.objective > self.cfg.tangent_tol {
                    violations.push(Violation { t, point: x.to_vec(), objective: c.objective });
                }
            }
            return Ok(v);
        }
        if near || matches!(self.cfg.selection, SelectionMode::TangentNearBoundary) {
            let (choice, certified) = match &self.direction {
                Some(d) => multimap::select_tangent_toward(
                    self.f,
                    &self.work,
                    t,
                    x,
                    self.cfg.tangent_tol,
                    d,
                    &self.cfg.clarke,
                )?,
                None => {
                    let c = multimap::least_violating(self.f, &self.work, t, x, &self.cfg.clarke)?;
                    let ok = c.objective <= -self.cfg.tangent_tol;
                    (c, ok)
                }
            };
            if near && !certified && choice.objective > self.cfg.tangent_tol {
                violations.push(Violation { t, point: x.to_vec(), objective: choice.objective });
            }
            return Ok(choice.v);
        }
        Ok(match &self.direction {
            Some(d) => value.support(d).witness,
            None => value.centroid(),
        })
    }

    fn advance(&self, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
        match &self.exact {
            Some((e, b)) => linalg::add(&linalg::mat_vec(e, x), b),
            None => linalg::axpy(x, h, v),
        }
    }

    /// Move `y` back towards `{f ≤ ε}` along unit gradients, within the
    /// per-step displacement budget.
    fn pullback(&self, y: Vec<f64>, h: f64) -> Vec<f64> {
        let mut y = y;
        let mut left = self.budget * h;
        for _ in 0..self.cfg.pullback_iters {
            if !self.work.in_domain(&y) {
                break;
            }
            let excess = self.work.value(&y);
            if excess <= 0.0 || left <= 0.0 {
                break;
            }
            let Some(g) = pull_direction(&self.work, &y) else { break };
            let step = (self.cfg.pullback_gain * excess).min(left);
            y = linalg::axpy(&y, -step, &g);
            left -= step;
        }
        y
    }
}

/// Integrate `ẋ ∈ F(t, x)` from `x0` over `[0, T]` on the grid `T/⌈T/h⌉`.
pub fn solve_ivp(
    f: &MultiMap,
    k: &ConstraintSet,
    x0: &[f64],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_dim(f.dim, x0.len())?;
    check_dim(f.dim, k.dim())?;
    if !(horizon > 0.0) {
        return Err(Error::Argument("horizon T must be positive".into()));
    }
    let f0 = k.value(x0)?;
    if f0 > cfg.thicken_eps + boundary_tol(x0) {
        return Err(Error::Argument(format!(
            "initial point {x0:?} lies outside K_eps (f = {f0:e}, eps = {})",
            cfg.thicken_eps
        )));
    }
    let steps = ((horizon / cfg.h) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let exact = match cfg.stepper {
        Stepper::Euler => None,
        Stepper::ExactLinear => Some(exact_linear_step(f, h)?),
    };
    let work = if cfg.thicken_eps > 0.0 { k.rep.offset(-cfg.thicken_eps) } else { k.rep.clone() };
    // d_K vanishes on all of K, so for distance representations of canonical
    // sets the signed distance decides how close x is to the boundary.
    let depth = match (k.rep_kind, crate::geometry::delta_function(&k.kind)) {
        (RepKind::Distance, Ok(d)) => d.offset(-cfg.thicken_eps),
        _ => work.clone(),
    };
    let st = Stepping {
        f,
        k,
        work,
        depth,
        cfg,
        collar: cfg.collar.unwrap_or(2.0 * f.bound_c * h),
        budget: cfg.pullback_budget.unwrap_or(f.bound_c),
        direction: extreme_direction(&cfg.selection, f.dim)?,
        exact,
    };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut selections = Vec::with_capacity(steps + 1);
    let mut f_values = Vec::with_capacity(steps + 1);
    let mut violations = Vec::new();
    let mut x = x0.to_vec();
    for i in 0..=steps {
        let t = if i == steps { horizon } else { i as f64 * h };
        let v = st.select(t, &x, &mut violations)?;
        times.push(t);
        f_values.push(st.k.rep.value(&x));
        states.push(x.clone());
        selections.push(v.clone());
        if i == steps {
            break;
        }
        let y = st.pullback(st.advance(&x, &v, h), h);
        let t1 = t + h;
        if !k.ref_box.contains(&y) || !st.work.in_domain(&y) {
            return Err(Error::Divergence { t: t1, point: y });
        }
        let excess = st.work.value(&y);
        if excess > f.bound_c * h + boundary_tol(&y) {
            return Err(Error::Viability { t: t1, point: y, value: excess + cfg.thicken_eps });
        }
        x = y;
    }
    let mut traj = Trajectory {
        h,
        times,
        states,
        selections,
        f_values,
        viability_residual: 0.0,
        inclusion_residual: 0.0,
        violations,
    };
    let r = residual_report(&traj, f, k);
    traj.viability_residual = r.viability;
    traj.inclusion_residual = r.inclusion;
    Ok(traj)
}

/// `n_traj` trajectories with independent extreme-point directions.
pub fn sample_solution_set(
    f: &MultiMap,
    k: &ConstraintSet,
    x0: &[f64],
    horizon: f64,
    n_traj: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Result<Trajectory>>> {
    if n_traj == 0 {
        return Err(Error::Argument("n_traj must be at least 1".into()));
    }
    Ok((0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            let s = seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            c.selection = SelectionMode::ExtremePoint { seed: s, direction: None };
            solve_ivp(f, k, x0, horizon, &c)
        })
        .collect())
}

/// Residuals recomputed from the stored states and selections.
pub fn residual_report(traj: &Trajectory, f: &MultiMap, k: &ConstraintSet) -> ResidualReport {
    let viability = traj.states.iter().map(|x| k.rep.value(x)).fold(f64::NEG_INFINITY, f64::max);
    let inclusion = traj
        .states
        .iter()
        .zip(&traj.selections)
        .zip(&traj.times)
        .map(|((x, v), t)| f.value(*t, x).distance_estimate(v))
        .fold(0.0, f64::max);
    let speed = traj
        .states
        .windows(2)
        .zip(traj.times.windows(2))
        .map(|(w, t)| norm(&linalg::sub(&w[1], &w[0])) / (t[1] - t[0]))
        .fold(0.0, f64::max);
    ResidualReport { viability, inclusion, speed }
}

#[cfg(test)]
mod tests;
