//! Clarke calculus for locally Lipschitz functions given as expression
//! trees: generalized gradients (exact rules or gradient sampling), upper
//! and lower directional derivatives, polar-cone membership and Dini
//! derivatives.

mod expr;

pub(crate) use expr::{dedup, Switch};
pub use expr::{CustomMap, Expr, SmoothFn, SmoothMap, TIE_TOL};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm};

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Argument(format!("box bounds {lo:?} / {hi:?} are not ordered")));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        BoxDomain { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn around(center: &[f64], half_width: f64) -> Self {
        BoxDomain {
            lo: center.iter().map(|c| c - half_width).collect(),
            hi: center.iter().map(|c| c + half_width).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(xi, (l, h))| *l <= *xi && *xi <= *h)
    }

    pub fn contains_interior(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(xi, (l, h))| *l < *xi && *xi < *h)
    }

    pub fn diameter(&self) -> f64 {
        linalg::dist(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

/// A locally Lipschitz function `f: dom(f) → R` built from an expression tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzFunction {
    pub expr: Expr,
    pub dim: usize,
    /// `None` means the whole space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxDomain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_hint: Option<f64>,
}

impl LipschitzFunction {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        expr.validate(dim)?;
        Ok(LipschitzFunction { expr, dim, domain: None, lipschitz_hint: None })
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        check_dim(self.dim, domain.dim())?;
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    /// Re-run structural validation, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        self.expr.validate(self.dim)?;
        if let Some(d) = &self.domain {
            check_dim(self.dim, d.dim())?;
        }
        if let Some(l) = self.lipschitz_hint {
            if !(l > 0.0) {
                return Err(Error::Argument("lipschitz_hint must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.domain.as_ref().is_none_or(|d| d.contains(x))
    }

    pub fn in_domain_interior(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.domain.as_ref().is_none_or(|d| d.contains_interior(x))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        if !self.in_domain(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        Ok(self.expr.eval(x))
    }

    /// Evaluation without the domain check, for internal probes.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }

    pub fn negated(&self) -> LipschitzFunction {
        LipschitzFunction {
            expr: self.expr.clone().neg(),
            dim: self.dim,
            domain: self.domain.clone(),
            lipschitz_hint: self.lipschitz_hint,
        }
    }

    /// `f + c`
    pub fn offset(&self, c: f64) -> LipschitzFunction {
        LipschitzFunction {
            expr: Expr::sum(vec![self.expr.clone(), Expr::constant(self.dim, c)]),
            dim: self.dim,
            domain: self.domain.clone(),
            lipschitz_hint: self.lipschitz_hint,
        }
    }

    pub fn lipschitz_or(&self, default: f64) -> f64 {
        self.lipschitz_hint.unwrap_or(default)
    }

    pub(crate) fn local(&self, x: &[f64]) -> expr::Local {
        self.expr.local(x)
    }

    pub(crate) fn switches(&self, x: &[f64]) -> Vec<Switch> {
        self.expr.switches(x)
    }

    pub(crate) fn switch_value(&self, sw: &Switch, z: &[f64]) -> f64 {
        self.expr.switch_value(sw, z)
    }

    /// Minimum-norm element of the gradient given by the local rules alone.
    pub(crate) fn rule_min_norm_gradient(&self, x: &[f64]) -> Vec<f64> {
        let l = self.local(x);
        let (p, _) = linalg::min_norm_point(&l.grads);
        let r = norm(&p);
        if l.ball >= r {
            vec![0.0; x.len()]
        } else {
            linalg::scale(&p, (r - l.ball) / r)
        }
    }
}

/// Finite set of vectors (plus an optional ball summand) whose convex hull
/// stands for the generalized gradient at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub vectors: Vec<Vec<f64>>,
    /// Radius of a Euclidean ball added to the hull (0 for plain polytopes).
    #[serde(default)]
    pub ball_radius: f64,
    pub exact: bool,
    /// Sampling radius used; 0 when exact.
    pub radius: f64,
}

impl GradientBundle {
    /// `max_{p} ⟨p, v⟩`
    pub fn support(&self, v: &[f64]) -> f64 {
        self.vectors.iter().map(|p| dot(p, v)).fold(f64::NEG_INFINITY, f64::max) + self.ball_radius * norm(v)
    }

    /// `min_{p} ⟨p, v⟩`
    pub fn min_support(&self, v: &[f64]) -> f64 {
        self.vectors.iter().map(|p| dot(p, v)).fold(f64::INFINITY, f64::min) - self.ball_radius * norm(v)
    }

    /// Distance from the origin to the bundle hull.
    pub fn min_norm(&self) -> f64 {
        let (p, _) = linalg::min_norm_point(&self.vectors);
        (norm(&p) - self.ball_radius).max(0.0)
    }

    /// Generators of a polytope approximating the bundle, with a ball part
    /// replaced by points on its boundary.
    pub fn generators(&self) -> Vec<Vec<f64>> {
        if self.ball_radius <= 0.0 {
            return self.vectors.clone();
        }
        let n = self.vectors[0].len();
        let dirs = linalg::sphere_directions(n, if n == 2 { 64 } else { 8 * n + 32 });
        let mut out = Vec::new();
        for p in &self.vectors {
            for d in &dirs {
                out.push(linalg::axpy(p, self.ball_radius, d));
            }
        }
        out
    }

    /// Distance from `v` to the polar cone {w : ⟨p, w⟩ ≤ 0 for all p}, which
    /// equals the norm of the projection of `v` onto cone(bundle).
    pub fn polar_distance(&self, v: &[f64]) -> f64 {
        norm(&linalg::cone_projection(&self.generators(), v))
    }
}

/// Gradient-sampling configuration. `None` fields fall back to radius
/// `1e-4·(1+|x|)` and `20·N` samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClarkeConfig {
    #[serde(default)]
    pub sample_count: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ClarkeConfig {
    pub fn with_radius(radius: f64) -> Self {
        ClarkeConfig { radius: Some(radius), ..Default::default() }
    }

    pub fn radius_at(&self, x: &[f64]) -> f64 {
        self.radius.unwrap_or(1e-4 * (1.0 + norm(x)))
    }

    pub fn count(&self, n: usize) -> usize {
        self.sample_count.unwrap_or(20 * n)
    }
}

fn check_point(f: &LipschitzFunction, x: &[f64]) -> Result<()> {
    check_dim(f.dim, x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("point {x:?} is not finite")));
    }
    if !f.in_domain(x) {
        return Err(Error::Domain { point: x.to_vec() });
    }
    if !f.in_domain_interior(x) {
        return Err(Error::DomainBoundary { point: x.to_vec() });
    }
    Ok(())
}

/// Generalized gradient bundle at `x`.
pub fn clarke_gradient(f: &LipschitzFunction, x: &[f64], cfg: &ClarkeConfig) -> Result<GradientBundle> {
    check_point(f, x)?;
    let n = f.dim;
    let count = cfg.count(n);
    let radius = cfg.radius_at(x);
    if count < n + 1 {
        return Err(Error::Argument(format!("sample_count {count} must be at least N+1 = {}", n + 1)));
    }
    if !(radius > 0.0) {
        return Err(Error::Argument(format!("sampling radius {radius} must be positive")));
    }
    let local = f.local(x);
    if local.exact {
        return Ok(GradientBundle { vectors: local.grads, ball_radius: local.ball, exact: true, radius: 0.0 });
    }
    let base = if local.ball > 0.0 { Vec::new() } else { local.grads };
    for attempt in 0..2u64 {
        let seed = cfg.seed ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut found: Vec<Vec<f64>> = Vec::new();
        let mut draws = 0;
        while found.len() < count && draws < 50 * count {
            draws += 1;
            let z = linalg::random_in_ball(&mut rng, x, radius);
            if !f.in_domain(&z) {
                continue;
            }
            let l = f.local(&z);
            if l.is_differentiable() {
                found.push(l.grads.into_iter().next().unwrap());
            }
        }
        if !found.is_empty() {
            let mut vectors = base.clone();
            vectors.extend(found);
            return Ok(GradientBundle { vectors: dedup(vectors), ball_radius: 0.0, exact: false, radius });
        }
    }
    Err(Error::Sampling(format!("no differentiability points found in B({x:?}, {radius:e}) after a reseeded retry")))
}

/// Upper directional derivative `f°(x; v)` from the gradient bundle.
pub fn upper_dd(f: &LipschitzFunction, x: &[f64], v: &[f64], cfg: &ClarkeConfig) -> Result<f64> {
    check_dim(f.dim, v.len())?;
    Ok(clarke_gradient(f, x, cfg)?.support(v))
}

/// Lower directional derivative `f_○(x; v) = −(−f)°(x; v)`.
pub fn lower_dd(f: &LipschitzFunction, x: &[f64], v: &[f64], cfg: &ClarkeConfig) -> Result<f64> {
    Ok(-upper_dd(&f.negated(), x, v, cfg)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarStatus {
    Inside,
    Outside,
    Uncertain,
}

/// Membership of `v` in the negative polar cone of the generalized gradient,
/// with a strict margin `tol` on either side.
pub fn in_polar_cone(f: &LipschitzFunction, x: &[f64], v: &[f64], tol: f64, cfg: &ClarkeConfig) -> Result<PolarStatus> {
    if !(tol > 0.0) {
        return Err(Error::Argument("tol must be positive".into()));
    }
    let d = upper_dd(f, x, v, cfg)?;
    Ok(if d <= -tol {
        PolarStatus::Inside
    } else if d >= tol {
        PolarStatus::Outside
    } else {
        PolarStatus::Uncertain
    })
}

/// Upper Dini derivative estimate: the largest forward quotient over the
/// smallest decade of the step grid.
pub fn dini_upper(f: &LipschitzFunction, x: &[f64], v: &[f64], h_grid: &[f64]) -> Result<f64> {
    check_dim(f.dim, x.len())?;
    check_dim(f.dim, v.len())?;
    if h_grid.is_empty() {
        return Err(Error::Argument("step grid is empty".into()));
    }
    if h_grid.iter().any(|h| !(*h > 0.0)) || h_grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Argument("step grid must be positive and strictly decreasing".into()));
    }
    let fx = f.eval(x)?;
    let h_min = *h_grid.last().unwrap();
    let mut best = f64::NEG_INFINITY;
    for &h in h_grid.iter().filter(|&&h| h <= 10.0 * h_min) {
        let y = linalg::axpy(x, h, v);
        let q = (f.eval(&y)? - fx) / h;
        best = best.max(q);
    }
    Ok(best)
}

/// Difference-quotient estimate of `f°(x; v)`: the largest
/// `[f(y + h v) − f(y)] / h` over `y ∈ {x} ∪ B(x, radius)` and
/// `h ∈ {radius, radius/10}`.
pub fn quotient_estimate(
    f: &LipschitzFunction,
    x: &[f64],
    v: &[f64],
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_point(f, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![x.to_vec()];
    for _ in 0..samples {
        points.push(linalg::random_in_ball(&mut rng, x, radius));
    }
    let mut best = f64::NEG_INFINITY;
    for y in &points {
        for h in [radius, 0.1 * radius] {
            let z = linalg::axpy(y, h, v);
            if f.in_domain(y) && f.in_domain(&z) {
                best = best.max((f.value(&z) - f.value(y)) / h);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
