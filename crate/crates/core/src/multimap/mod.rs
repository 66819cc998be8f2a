//! Set-valued right-hand sides `F(t, x)` with compact convex values:
//! support functions, tangent selections, graph approximations, Aumann
//! integrals and inner-product bounds.

mod tangent;

pub use tangent::{least_violating, select_tangent, select_tangent_toward, TangentChoice};

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm};
use crate::nonsmooth::BoxDomain;

/// Polynomial in t, coefficients in increasing degree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimePoly(pub Vec<f64>);

impl TimePoly {
    pub fn constant(c: f64) -> Self {
        TimePoly(vec![c])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// `t^power · (matrix x + offset)`, added to an affine field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTerm {
    pub power: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

pub type FieldFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct CustomField(pub Arc<FieldFn>);

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomField")
    }
}

/// Single-valued field `v(t, x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorField {
    /// `A x + b + Σ t^k (A_k x + b_k)`
    Affine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        time_terms: Vec<TimeTerm>,
    },
    #[serde(skip)]
    Custom(CustomField),
}

fn affine_part(m: &Option<Vec<Vec<f64>>>, b: &Option<Vec<f64>>, x: &[f64], k: f64, out: &mut [f64]) {
    if let Some(m) = m {
        for (o, row) in out.iter_mut().zip(m) {
            *o += k * dot(row, x);
        }
    }
    if let Some(b) = b {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += k * bi;
        }
    }
}

impl VectorField {
    pub fn linear(matrix: Vec<Vec<f64>>) -> Self {
        VectorField::Affine { matrix: Some(matrix), offset: None, time_terms: Vec::new() }
    }

    pub fn constant(v: Vec<f64>) -> Self {
        VectorField::Affine { matrix: None, offset: Some(v), time_terms: Vec::new() }
    }

    pub fn custom(f: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VectorField::Custom(CustomField(Arc::new(f)))
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            VectorField::Affine { matrix, offset, time_terms } => {
                let mut out = vec![0.0; x.len()];
                affine_part(matrix, offset, x, 1.0, &mut out);
                for term in time_terms {
                    affine_part(&term.matrix, &term.offset, x, t.powi(term.power as i32), &mut out);
                }
                out
            }
            VectorField::Custom(c) => (c.0)(t, x),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |m: &Option<Vec<Vec<f64>>>, b: &Option<Vec<f64>>| -> Result<()> {
            if let Some(m) = m {
                check_dim(n, m.len())?;
                for row in m {
                    check_dim(n, row.len())?;
                }
            }
            if let Some(b) = b {
                check_dim(n, b.len())?;
            }
            Ok(())
        };
        match self {
            VectorField::Affine { matrix, offset, time_terms } => {
                check(matrix, offset)?;
                for term in time_terms {
                    check(&term.matrix, &term.offset)?;
                }
                Ok(())
            }
            VectorField::Custom(_) => Ok(()),
        }
    }
}

/// `co(vertices) + B(0, ball_radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexValue {
    pub vertices: Vec<Vec<f64>>,
    #[serde(default)]
    pub ball_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportQuery {
    pub value: f64,
    pub witness: Vec<f64>,
}

impl ConvexValue {
    pub fn point(v: Vec<f64>) -> Self {
        ConvexValue { vertices: vec![v], ball_radius: 0.0 }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConvexValue { vertices: vec![center], ball_radius: radius }
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Self {
        ConvexValue { vertices, ball_radius: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn support(&self, p: &[f64]) -> SupportQuery {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (i, v) in self.vertices.iter().enumerate() {
            let s = dot(p, v);
            if s > best {
                best = s;
                arg = i;
            }
        }
        let np = norm(p);
        let witness = match linalg::normalized(p) {
            Some(u) if self.ball_radius > 0.0 => linalg::axpy(&self.vertices[arg], self.ball_radius, &u),
            _ => self.vertices[arg].clone(),
        };
        SupportQuery { value: best + self.ball_radius * np, witness }
    }

    /// Minkowski sum.
    pub fn minkowski(&self, other: &ConvexValue) -> ConvexValue {
        let mut vertices = Vec::with_capacity(self.vertices.len() * other.vertices.len());
        for a in &self.vertices {
            for b in &other.vertices {
                vertices.push(linalg::add(a, b));
            }
        }
        ConvexValue { vertices: crate::nonsmooth::dedup(vertices), ball_radius: self.ball_radius + other.ball_radius }
    }

    pub fn scaled(&self, k: f64) -> ConvexValue {
        ConvexValue {
            vertices: self.vertices.iter().map(|v| linalg::scale(v, k)).collect(),
            ball_radius: self.ball_radius * k.abs(),
        }
    }

    /// Centroid of the vertices; the center of the ball part.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for v in &self.vertices {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        linalg::scale(&c, 1.0 / self.vertices.len() as f64)
    }

    /// Largest norm of an element.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max) + self.ball_radius
    }

    /// Distance from `v` to the value: exact for points and segments,
    /// otherwise `max_p ⟨p, v⟩ − σ(p)` over sampled unit `p`, a lower
    /// estimate exact up to the direction grid.
    pub fn distance_estimate(&self, v: &[f64]) -> f64 {
        // Points and segments (possibly thickened) have a closed form.
        match self.vertices.as_slice() {
            [w] => return (linalg::dist(v, w) - self.ball_radius).max(0.0),
            [a, b] => {
                let ab = linalg::sub(b, a);
                let len2 = dot(&ab, &ab);
                let s = if len2 > 0.0 { (dot(&linalg::sub(v, a), &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let near = linalg::axpy(a, s, &ab);
                return (linalg::dist(v, &near) - self.ball_radius).max(0.0);
            }
            _ => {}
        }
        if self.vertices.iter().any(|w| w.as_slice() == v) {
            return 0.0;
        }
        let n = v.len();
        let mut dirs = linalg::sphere_directions(n, if n <= 2 { 256 } else { 64 * n });
        let dirs_extra: Vec<Vec<f64>> =
            self.vertices.iter().filter_map(|w| linalg::normalized(&linalg::sub(v, w))).collect();
        dirs.extend(dirs_extra);
        dirs.iter().map(|p| dot(p, v) - self.support(p).value).fold(0.0, f64::max)
    }

    /// Polytope approximation: vertices plus ball-boundary points.
    pub(crate) fn expanded(&self, ball_dirs: usize) -> Vec<Vec<f64>> {
        if self.ball_radius <= 0.0 {
            return self.vertices.clone();
        }
        let dirs = linalg::sphere_directions(self.dim(), ball_dirs);
        let mut out = Vec::with_capacity(self.vertices.len() * dirs.len());
        for v in &self.vertices {
            for d in &dirs {
                out.push(linalg::axpy(v, self.ball_radius, d));
            }
        }
        out
    }
}

pub type ValueFn = dyn Fn(f64, &[f64]) -> ConvexValue + Send + Sync;

#[derive(Clone)]
pub struct CustomValue(pub Arc<ValueFn>);

impl fmt::Debug for CustomValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomValue")
    }
}

fn default_tie_radius() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiMapKind {
    Singleton {
        field: VectorField,
    },
    /// Convex hull of vertex fields.
    Polytope {
        vertices: Vec<VectorField>,
    },
    Ball {
        center: VectorField,
        radius: TimePoly,
    },
    Sum {
        parts: Vec<MultiMapKind>,
    },
    /// `s(t) · F(t, x)`
    Scaled {
        factor: TimePoly,
        inner: Box<MultiMapKind>,
    },
    /// Field of two unit circles tangent at the origin, centers `(±1, 0)`:
    /// clockwise unit rotation around `(1, 0)` near the right circle and
    /// counterclockwise around `(−1, 0)` near the left one. Within
    /// `tie_radius` of the origin the value is the hull of both.
    TwoCircles {
        #[serde(default = "default_tie_radius")]
        tie_radius: f64,
    },
    #[serde(skip)]
    Custom(CustomValue),
}

fn rotation_about(z: &[f64], c: [f64; 2], clockwise: bool) -> Vec<f64> {
    let (a, b) = (z[0] - c[0], z[1] - c[1]);
    let r = (a * a + b * b).sqrt();
    if r == 0.0 {
        return vec![0.0, 0.0];
    }
    if clockwise {
        vec![b / r, -a / r]
    } else {
        vec![-b / r, a / r]
    }
}

impl MultiMapKind {
    fn value(&self, t: f64, x: &[f64]) -> ConvexValue {
        match self {
            MultiMapKind::Singleton { field } => ConvexValue::point(field.eval(t, x)),
            MultiMapKind::Polytope { vertices } => {
                ConvexValue::polytope(vertices.iter().map(|v| v.eval(t, x)).collect())
            }
            MultiMapKind::Ball { center, radius } => ConvexValue::ball(center.eval(t, x), radius.eval(t).max(0.0)),
            MultiMapKind::Sum { parts } => {
                let mut it = parts.iter();
                let first = it.next().expect("validated nonempty").value(t, x);
                it.fold(first, |acc, p| acc.minkowski(&p.value(t, x)))
            }
            MultiMapKind::Scaled { factor, inner } => inner.value(t, x).scaled(factor.eval(t)),
            MultiMapKind::TwoCircles { tie_radius } => {
                let g1 = rotation_about(x, [1.0, 0.0], true);
                let g2 = rotation_about(x, [-1.0, 0.0], false);
                if norm(x) < *tie_radius {
                    return ConvexValue::polytope(crate::nonsmooth::dedup(vec![g1, g2]));
                }
                let d1 = (linalg::dist(x, &[1.0, 0.0]) - 1.0).abs();
                let d2 = (linalg::dist(x, &[-1.0, 0.0]) - 1.0).abs();
                ConvexValue::point(if d1 <= d2 { g1 } else { g2 })
            }
            MultiMapKind::Custom(c) => (c.0)(t, x),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            MultiMapKind::Singleton { field } => field.validate(n),
            MultiMapKind::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(Error::Argument("polytope multimap needs at least one vertex".into()));
                }
                vertices.iter().try_for_each(|v| v.validate(n))
            }
            MultiMapKind::Ball { center, .. } => center.validate(n),
            MultiMapKind::Sum { parts } => {
                if parts.is_empty() {
                    return Err(Error::Argument("sum multimap needs at least one part".into()));
                }
                parts.iter().try_for_each(|p| p.validate(n))
            }
            MultiMapKind::Scaled { inner, .. } => inner.validate(n),
            MultiMapKind::TwoCircles { tie_radius } => {
                check_dim(2, n)?;
                if !(*tie_radius >= 0.0) {
                    return Err(Error::Argument("tie_radius must be nonnegative".into()));
                }
                Ok(())
            }
            MultiMapKind::Custom(_) => Ok(()),
        }
    }
}

/// `F : [0, T] × R^N ⊸ R^N` with a uniform bound `|y| ≤ bound_c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiMap {
    pub dim: usize,
    pub horizon: f64,
    pub bound_c: f64,
    pub map: MultiMapKind,
}

impl MultiMap {
    pub fn new(dim: usize, map: MultiMapKind, horizon: f64, bound_c: f64) -> Result<Self> {
        let m = MultiMap { dim, horizon, bound_c, map };
        m.validate()?;
        Ok(m)
    }

    /// Like [`MultiMap::new`] with `bound_c` estimated as 1.05 times the
    /// largest sampled norm over `[0, T] × ref_box`.
    pub fn with_estimated_bound(dim: usize, map: MultiMapKind, horizon: f64, ref_box: &BoxDomain) -> Result<Self> {
        let mut m = MultiMap { dim, horizon, bound_c: 1.0, map };
        m.validate()?;
        m.bound_c = (1.05 * m.sampled_max_norm(ref_box, 2000, 0)).max(1e-12);
        Ok(m)
    }

    pub fn singleton(field: VectorField, dim: usize, horizon: f64, ref_box: &BoxDomain) -> Result<Self> {
        Self::with_estimated_bound(dim, MultiMapKind::Singleton { field }, horizon, ref_box)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Argument("horizon T must be positive".into()));
        }
        if !(self.bound_c > 0.0) {
            return Err(Error::Argument("bound_c must be positive".into()));
        }
        self.map.validate(self.dim)
    }

    pub fn value(&self, t: f64, x: &[f64]) -> ConvexValue {
        self.map.value(t, x)
    }

    /// `σ_{F(t,x)}(p)` with an argmax witness.
    pub fn support(&self, t: f64, x: &[f64], p: &[f64]) -> SupportQuery {
        self.value(t, x).support(p)
    }

    fn sampled_max_norm(&self, ref_box: &BoxDomain, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m: f64 = 0.0;
        for i in 0..samples {
            let t = self.horizon * i as f64 / (samples.max(2) - 1) as f64;
            let x = linalg::random_in_box(&mut rng, &ref_box.lo, &ref_box.hi);
            m = m.max(self.value(t, &x).max_norm());
        }
        // Corners, where affine fields peak.
        let n = self.dim;
        if n <= 10 {
            for mask in 0..(1u32 << n) {
                let x: Vec<f64> =
                    (0..n).map(|i| if mask >> i & 1 == 1 { ref_box.hi[i] } else { ref_box.lo[i] }).collect();
                for t in [0.0, 0.5 * self.horizon, self.horizon] {
                    m = m.max(self.value(t, &x).max_norm());
                }
            }
        }
        m
    }

    /// Check the uniform bound on random samples of `[0, T] × ref_box`.
    pub fn check_bound(&self, ref_box: &BoxDomain, samples: usize, seed: u64) -> Result<()> {
        let m = self.sampled_max_norm(ref_box, samples, seed);
        if m > self.bound_c * (1.0 + 1e-9) {
            return Err(Error::Argument(format!("sampled |F| = {m} exceeds bound_c = {}", self.bound_c)));
        }
        Ok(())
    }
}

/// Convex value standing in for `F_m(t, x)`: the hull of
/// `B(F(t, y), 1/m)` over a grid of `y ∈ B(x, 3 r_m)`, `r_m = 3^{−m}`.
pub fn graph_approx(f: &MultiMap, m: u32, t: f64, x: &[f64], grid_per_axis: usize) -> Result<ConvexValue> {
    if m < 1 {
        return Err(Error::Argument("graph_approx needs m ≥ 1".into()));
    }
    check_dim(f.dim, x.len())?;
    let n = f.dim;
    let r = 3.0 * 3f64.powi(-(m as i32));
    let k = grid_per_axis.max(1);
    let mut values = vec![f.value(t, x)];
    let total = k.checked_pow(n as u32).ok_or_else(|| Error::Argument("grid too large".into()))?;
    for idx in 0..total {
        let mut rem = idx;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let j = rem % k;
                rem /= k;
                let s = if k == 1 { 0.0 } else { -1.0 + 2.0 * j as f64 / (k - 1) as f64 };
                x[i] + r * s
            })
            .collect();
        if linalg::dist(&y, x) <= r {
            values.push(f.value(t, &y));
        }
    }
    let base = values.iter().map(|v| v.ball_radius).fold(f64::INFINITY, f64::min);
    let mut vertices = Vec::new();
    for v in &values {
        if v.ball_radius > base {
            let extra = ConvexValue { vertices: v.vertices.clone(), ball_radius: v.ball_radius - base };
            vertices.extend(extra.expanded(if n == 2 { 64 } else { 8 * n + 32 }));
        } else {
            vertices.extend(v.vertices.iter().cloned());
        }
    }
    Ok(ConvexValue { vertices: crate::nonsmooth::dedup(vertices), ball_radius: base + 1.0 / m as f64 })
}

/// Composite trapezoid rule for `∫₀ᵀ σ_{F(t,x₀)}(p) dt`, the support of
/// the Aumann integral of `F(·, x₀)`.
pub fn aumann_support(f: &MultiMap, x0: &[f64], p: &[f64], quad_nodes: usize) -> Result<f64> {
    if quad_nodes < 2 {
        return Err(Error::Argument("aumann_support needs at least 2 quadrature nodes".into()));
    }
    check_dim(f.dim, x0.len())?;
    check_dim(f.dim, p.len())?;
    let h = f.horizon / (quad_nodes - 1) as f64;
    let mut s = 0.0;
    for i in 0..quad_nodes {
        let w = if i == 0 || i == quad_nodes - 1 { 0.5 } else { 1.0 };
        s += w * f.support(i as f64 * h, x0, p).value;
    }
    Ok(s * h)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Separation {
    pub separated: bool,
    /// Unit `p ⊥ subspace` with `min ⟨p, ∫F⟩ > 0`, when found.
    pub witness: Option<Vec<f64>>,
    /// Best `min ⟨p, ∫F⟩` over the sampled `p`.
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Orthonormal basis of the orthogonal complement of `span(basis)`.
pub fn orthogonal_complement(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    fn push(v: &[f64], q: &mut Vec<Vec<f64>>) {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for e in q.iter() {
                let c = dot(&w, e);
                w = linalg::axpy(&w, -c, e);
            }
        }
        if norm(&w) > 1e-10 * (1.0 + norm(v)) {
            q.push(linalg::normalized(&w).unwrap());
        }
    }
    let mut q: Vec<Vec<f64>> = Vec::new();
    for b in basis {
        push(b, &mut q);
    }
    let span_dim = q.len();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        push(&e, &mut q);
    }
    q.split_off(span_dim)
}

/// Whether the Aumann integral of `F(·, x₀)` misses `span(subspace_basis)`,
/// certified by a sampled unit `p` in the orthogonal complement with
/// `−σ(−p) > 0`.
pub fn aumann_separated(
    f: &MultiMap,
    x0: &[f64],
    subspace_basis: &[Vec<f64>],
    sphere_samples: usize,
) -> Result<Separation> {
    check_dim(f.dim, x0.len())?;
    for b in subspace_basis {
        check_dim(f.dim, b.len())?;
    }
    let comp = orthogonal_complement(subspace_basis, f.dim);
    if comp.is_empty() {
        let inf = f64::NEG_INFINITY;
        return Ok(Separation {
            separated: false,
            witness: None,
            margin: inf,
            note: Some("subspace is all of R^N; no separating direction exists".into()),
        });
    }
    let k = comp.len();
    let nodes = 129;
    let mut best: (f64, Option<Vec<f64>>) = (f64::NEG_INFINITY, None);
    for d in linalg::sphere_directions(k, sphere_samples.max(2)) {
        let mut p = vec![0.0; f.dim];
        for (di, e) in d.iter().zip(&comp) {
            p = linalg::axpy(&p, *di, e);
        }
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        let m = -aumann_support(f, x0, &neg, nodes)?;
        if m > best.0 {
            best = (m, Some(p));
        }
    }
    let separated = best.0 > 0.0;
    Ok(Separation { separated, witness: if separated { best.1 } else { None }, margin: best.0, note: None })
}

/// `(⟨A, B⟩⁻, ⟨A, B⟩⁺)`: the extreme values of `⟨a, b⟩` over `a ∈ A, b ∈ B`.
pub fn inner_product_bounds(a: &ConvexValue, b: &ConvexValue) -> (f64, f64) {
    let neg_a = a.scaled(-1.0);
    (-upper_inner(&neg_a, b), upper_inner(a, b))
}

fn upper_inner(a: &ConvexValue, b: &ConvexValue) -> f64 {
    // max over b of σ_A(b); σ_A is convex, so extreme points of B suffice.
    if b.ball_radius <= 0.0 {
        return b.vertices.iter().map(|w| a.support(w).value).fold(f64::NEG_INFINITY, f64::max);
    }
    let n = b.dim();
    let mut dirs = linalg::sphere_directions(n, if n <= 2 { 720 } else { 200 * n });
    for v in a.vertices.iter().chain(&b.vertices) {
        if let Some(u) = linalg::normalized(v) {
            dirs.push(linalg::scale(&u, -1.0));
            dirs.push(u);
        }
    }
    let mut best = f64::NEG_INFINITY;
    for w in &b.vertices {
        for d in &dirs {
            let mut u = d.clone();
            // A few ascent steps: the maximizer direction for fixed a is â.
            for _ in 0..20 {
                let bb = linalg::axpy(w, b.ball_radius, &u);
                let s = a.support(&bb).witness;
                match linalg::normalized(&s) {
                    Some(next) if linalg::dist(&next, &u) > 1e-13 => {
                        let nb = linalg::axpy(w, b.ball_radius, &next);
                        if a.support(&nb).value >= a.support(&bb).value {
                            u = next;
                        } else {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            best = best.max(a.support(&linalg::axpy(w, b.ball_radius, &u)).value);
        }
    }
    best
}
