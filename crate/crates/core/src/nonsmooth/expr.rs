//! Expression trees for locally Lipschitz functions and the local calculus
//! rules evaluated on them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_t_vec, mat_vec, norm, scale, sub};

/// Relative tolerance deciding whether two branch values tie.
pub const TIE_TOL: f64 = 1e-9;

pub(crate) fn tie_tol(v: f64) -> f64 {
    TIE_TOL * (1.0 + v.abs())
}

/// Value and Jacobian of a user-supplied smooth map R^N -> R^M.
pub type SmoothFn = dyn Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>) + Send + Sync;

#[derive(Clone)]
pub struct CustomMap {
    pub dim_in: usize,
    pub dim_out: usize,
    pub func: Arc<SmoothFn>,
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomMap({} -> {})", self.dim_in, self.dim_out)
    }
}

/// Smooth inner map of a composition node.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothMap {
    /// `x -> A x + b`
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    #[serde(skip)]
    Custom(CustomMap),
}

impl SmoothMap {
    pub fn dim_in(&self) -> Option<usize> {
        match self {
            SmoothMap::Linear { matrix, .. } => matrix.first().map(|r| r.len()),
            SmoothMap::Custom(c) => Some(c.dim_in),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            SmoothMap::Linear { matrix, .. } => matrix.len(),
            SmoothMap::Custom(c) => c.dim_out,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SmoothMap::Linear { matrix, offset } => {
                let mut y = mat_vec(matrix, x);
                if let Some(b) = offset {
                    for (yi, bi) in y.iter_mut().zip(b) {
                        *yi += bi;
                    }
                }
                y
            }
            SmoothMap::Custom(c) => (c.func)(x).0,
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        match self {
            SmoothMap::Linear { matrix, .. } => (self.apply(x), matrix.clone()),
            SmoothMap::Custom(c) => (c.func)(x),
        }
    }
}

/// Node of a Lipschitz expression tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    /// `⟨coeffs, x⟩ + offset`
    Affine {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `xᵀ Q x + ⟨linear, x⟩ + offset`
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
    /// `|x − center|` (center defaults to the origin)
    Norm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    DistBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// Distance to {y : ⟨a_i, y⟩ ≤ b_i for all i}.
    DistPolytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Sum {
        terms: Vec<Expr>,
    },
    Scale {
        factor: f64,
        arg: Box<Expr>,
    },
    Neg {
        arg: Box<Expr>,
    },
    Max {
        args: Vec<Expr>,
    },
    Min {
        args: Vec<Expr>,
    },
    Abs {
        arg: Box<Expr>,
    },
    /// `outer(inner(x))`
    Compose {
        inner: SmoothMap,
        outer: Box<Expr>,
    },
}

/// Local first-order data of an expression at a point.
#[derive(Clone, Debug)]
pub(crate) struct Local {
    pub value: f64,
    /// Generators of the gradient set (before adding the ball part).
    pub grads: Vec<Vec<f64>>,
    /// Radius of a Minkowski ball summand of the gradient set.
    pub ball: f64,
    /// The rules reproduce the Clarke gradient exactly.
    pub exact: bool,
    /// Clarke regular at the point.
    pub regular: bool,
    /// The negation is Clarke regular at the point.
    pub antiregular: bool,
    /// Strictly differentiable at the point.
    pub smooth: bool,
}

impl Local {
    fn smooth(value: f64, grad: Vec<f64>) -> Self {
        Local { value, grads: vec![grad], ball: 0.0, exact: true, regular: true, antiregular: true, smooth: true }
    }

    fn scaled(mut self, k: f64) -> Self {
        self.value *= k;
        for g in &mut self.grads {
            for gi in g.iter_mut() {
                *gi *= k;
            }
        }
        self.ball *= k.abs();
        if k < 0.0 {
            std::mem::swap(&mut self.regular, &mut self.antiregular);
        }
        if k == 0.0 {
            let n = self.grads[0].len();
            return Local::smooth(0.0, vec![0.0; n]);
        }
        self
    }

    /// Replace the ball part by the 2N axis points of its boundary. The
    /// result is an inner approximation, hence inexact.
    fn expand_ball(mut self) -> Self {
        if self.ball <= 0.0 {
            return self;
        }
        let n = self.grads[0].len();
        let mut out = Vec::with_capacity(self.grads.len() * 2 * n);
        for g in &self.grads {
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut p = g.clone();
                    p[i] += s * self.ball;
                    out.push(p);
                }
            }
        }
        self.grads = dedup(out);
        self.ball = 0.0;
        self.exact = false;
        self
    }

    pub fn is_differentiable(&self) -> bool {
        self.ball == 0.0 && self.grads.len() == 1
    }
}

pub(crate) fn dedup(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(v.len());
    for p in v.drain(..) {
        let scale_p = 1.0 + norm(&p);
        if !out.iter().any(|q| norm(&sub(q, &p)) <= 1e-12 * scale_p) {
            out.push(p);
        }
    }
    out
}

/// A place in the tree where branches switch, used to locate kinks.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Switch {
    pub path: Vec<usize>,
    pub kind: SwitchKind,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum SwitchKind {
    /// Difference of two child values of a max/min node.
    Pair(usize, usize),
    /// Argument of an abs node, or the signed gap of a distance-to-ball leaf.
    Zero,
}

fn projection_onto_polytope(normals: &[Vec<f64>], offsets: &[f64], x: &[f64]) -> Vec<f64> {
    // Exact Euclidean projection: try every active set of size ≤ N and keep
    // the nearest feasible candidate satisfying the KKT sign conditions.
    let n = x.len();
    let m = normals.len();
    let feasible = |y: &[f64]| normals.iter().zip(offsets).all(|(a, b)| dot(a, y) <= b + 1e-10 * (1.0 + b.abs()));
    if feasible(x) {
        return x.to_vec();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let max_size = n.min(m);
    let mut subset: Vec<usize> = Vec::new();
    fn recurse(start: usize, m: usize, max_size: usize, subset: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if !subset.is_empty() {
            visit(subset);
        }
        if subset.len() == max_size {
            return;
        }
        for i in start..m {
            subset.push(i);
            recurse(i + 1, m, max_size, subset, visit);
            subset.pop();
        }
    }
    let mut visit = |s: &[usize]| {
        // Solve min |y − x| s.t. a_i·y = b_i for i in s:
        // y = x − Aᵀ μ with (A Aᵀ) μ = A x − b.
        let k = s.len();
        let g = nalgebra::DMatrix::from_fn(k, k, |i, j| dot(&normals[s[i]], &normals[s[j]]));
        let rhs = nalgebra::DVector::from_fn(k, |i, _| dot(&normals[s[i]], x) - offsets[s[i]]);
        let Some(mu) = g.lu().solve(&rhs) else { return };
        if mu.iter().any(|&v| v < -1e-12) {
            return;
        }
        let mut y = x.to_vec();
        for (c, &i) in s.iter().enumerate() {
            for (yj, aj) in y.iter_mut().zip(&normals[i]) {
                *yj -= mu[c] * aj;
            }
        }
        if feasible(&y) {
            let d = norm(&sub(&y, x));
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    };
    recurse(0, m, max_size, &mut subset, &mut visit);
    best.map(|(_, y)| y).unwrap_or_else(|| x.to_vec())
}

impl Expr {
    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Expr {
        Expr::Affine { coeffs, offset }
    }

    pub fn constant(n: usize, c: f64) -> Expr {
        Expr::Affine { coeffs: vec![0.0; n], offset: c }
    }

    /// Coordinate projection `x -> x_i` in R^n.
    pub fn coord(n: usize, i: usize) -> Expr {
        let mut coeffs = vec![0.0; n];
        coeffs[i] = 1.0;
        Expr::Affine { coeffs, offset: 0.0 }
    }

    pub fn norm(n: usize) -> Expr {
        Expr::Norm { center: None, dim: Some(n) }
    }

    pub fn norm_at(center: Vec<f64>) -> Expr {
        Expr::Norm { center: Some(center), dim: None }
    }

    /// `|x|² + offset`
    pub fn squared_norm(n: usize, offset: f64) -> Expr {
        Expr::Quadratic { matrix: crate::linalg::identity(n), linear: None, offset }
    }

    pub fn dist_ball(center: Vec<f64>, radius: f64) -> Expr {
        Expr::DistBall { center, radius }
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        Expr::Sum { terms }
    }

    pub fn max(args: Vec<Expr>) -> Expr {
        Expr::Max { args }
    }

    pub fn min(args: Vec<Expr>) -> Expr {
        Expr::Min { args }
    }

    pub fn abs(arg: Expr) -> Expr {
        Expr::Abs { arg: Box::new(arg) }
    }

    pub fn scaled(self, factor: f64) -> Expr {
        Expr::Scale { factor, arg: Box::new(self) }
    }

    pub fn neg(self) -> Expr {
        Expr::Neg { arg: Box::new(self) }
    }

    pub fn plus(self, c: f64) -> Result<Expr> {
        let n = self.input_dim().ok_or_else(|| Error::Argument("cannot infer dimension of expression".into()))?;
        Ok(Expr::Sum { terms: vec![self, Expr::constant(n, c)] })
    }

    pub fn compose(inner: SmoothMap, outer: Expr) -> Expr {
        Expr::Compose { inner, outer: Box::new(outer) }
    }

    /// Input dimension implied by the leaves, when any leaf fixes it.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Expr::Affine { coeffs, .. } => Some(coeffs.len()),
            Expr::Quadratic { matrix, .. } => Some(matrix.len()),
            Expr::Norm { center, dim } => center.as_ref().map(|c| c.len()).or(*dim),
            Expr::DistBall { center, .. } => Some(center.len()),
            Expr::DistPolytope { normals, .. } => normals.first().map(|a| a.len()),
            Expr::Sum { terms } => terms.iter().find_map(|t| t.input_dim()),
            Expr::Max { args } | Expr::Min { args } => args.iter().find_map(|t| t.input_dim()),
            Expr::Scale { arg, .. } | Expr::Neg { arg } | Expr::Abs { arg } => arg.input_dim(),
            Expr::Compose { inner, .. } => inner.dim_in(),
        }
    }

    /// Structural validation against an input dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |got: usize| crate::error::check_dim(n, got);
        match self {
            Expr::Affine { coeffs, offset } => {
                check(coeffs.len())?;
                finite(coeffs)?;
                finite(&[*offset])
            }
            Expr::Quadratic { matrix, linear, offset } => {
                check(matrix.len())?;
                for row in matrix {
                    check(row.len())?;
                    finite(row)?;
                }
                if let Some(l) = linear {
                    check(l.len())?;
                    finite(l)?;
                }
                finite(&[*offset])
            }
            Expr::Norm { center, dim } => {
                if let Some(c) = center {
                    check(c.len())?;
                    finite(c)?;
                }
                if let Some(d) = dim {
                    check(*d)?;
                }
                Ok(())
            }
            Expr::DistBall { center, radius } => {
                check(center.len())?;
                finite(center)?;
                if !(*radius >= 0.0) {
                    return Err(Error::Argument(format!("ball radius {radius} must be ≥ 0")));
                }
                Ok(())
            }
            Expr::DistPolytope { normals, offsets } => {
                if normals.is_empty() || normals.len() != offsets.len() {
                    return Err(Error::Argument("polytope needs matching, nonempty normals and offsets".into()));
                }
                for a in normals {
                    check(a.len())?;
                    finite(a)?;
                    if norm(a) == 0.0 {
                        return Err(Error::Argument("polytope face normal is zero".into()));
                    }
                }
                finite(offsets)
            }
            Expr::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::Argument("sum node needs at least one term".into()));
                }
                terms.iter().try_for_each(|t| t.validate(n))
            }
            Expr::Max { args } | Expr::Min { args } => {
                if args.is_empty() {
                    return Err(Error::Argument("max/min node needs at least one child".into()));
                }
                args.iter().try_for_each(|t| t.validate(n))
            }
            Expr::Scale { factor, arg } => {
                finite(&[*factor])?;
                arg.validate(n)
            }
            Expr::Neg { arg } | Expr::Abs { arg } => arg.validate(n),
            Expr::Compose { inner, outer } => {
                if let Some(d) = inner.dim_in() {
                    check(d)?;
                }
                if let SmoothMap::Linear { matrix, offset } = inner {
                    for row in matrix {
                        check(row.len())?;
                        finite(row)?;
                    }
                    if let Some(b) = offset {
                        crate::error::check_dim(matrix.len(), b.len())?;
                    }
                }
                outer.validate(inner.dim_out())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Affine { coeffs, offset } => dot(coeffs, x) + offset,
            Expr::Quadratic { matrix, linear, offset } => {
                let qx = mat_vec(matrix, x);
                dot(x, &qx) + linear.as_ref().map_or(0.0, |l| dot(l, x)) + offset
            }
            Expr::Norm { center, .. } => match center {
                Some(c) => norm(&sub(x, c)),
                None => norm(x),
            },
            Expr::DistBall { center, radius } => (norm(&sub(x, center)) - radius).max(0.0),
            Expr::DistPolytope { normals, offsets } => {
                let p = projection_onto_polytope(normals, offsets, x);
                norm(&sub(x, &p))
            }
            Expr::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            Expr::Scale { factor, arg } => factor * arg.eval(x),
            Expr::Neg { arg } => -arg.eval(x),
            Expr::Max { args } => args.iter().map(|a| a.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            Expr::Min { args } => args.iter().map(|a| a.eval(x)).fold(f64::INFINITY, f64::min),
            Expr::Abs { arg } => arg.eval(x).abs(),
            Expr::Compose { inner, outer } => outer.eval(&inner.apply(x)),
        }
    }

    /// Local calculus rules at `x`.
    pub(crate) fn local(&self, x: &[f64]) -> Local {
        let n = x.len();
        match self {
            Expr::Affine { coeffs, offset } => Local::smooth(dot(coeffs, x) + offset, coeffs.clone()),
            Expr::Quadratic { matrix, linear, offset } => {
                let qx = mat_vec(matrix, x);
                let qtx = mat_t_vec(matrix, x);
                let mut grad: Vec<f64> = qx.iter().zip(&qtx).map(|(a, b)| a + b).collect();
                if let Some(l) = linear {
                    for (g, li) in grad.iter_mut().zip(l) {
                        *g += li;
                    }
                }
                let value = dot(x, &qx) + linear.as_ref().map_or(0.0, |l| dot(l, x)) + offset;
                Local::smooth(value, grad)
            }
            Expr::Norm { center, .. } => {
                let d = match center {
                    Some(c) => sub(x, c),
                    None => x.to_vec(),
                };
                let r = norm(&d);
                if r > 1e-14 * (1.0 + norm(x)) {
                    Local::smooth(r, scale(&d, 1.0 / r))
                } else {
                    Local {
                        value: r,
                        grads: vec![vec![0.0; n]],
                        ball: 1.0,
                        exact: true,
                        regular: true,
                        antiregular: false,
                        smooth: false,
                    }
                }
            }
            Expr::DistBall { center, radius } => {
                let d = sub(x, center);
                let r = norm(&d);
                let gap = r - radius;
                if gap > tie_tol(*radius) {
                    Local::smooth(gap, scale(&d, 1.0 / r))
                } else if gap < -tie_tol(*radius) || r == 0.0 {
                    Local::smooth(0.0, vec![0.0; n])
                } else {
                    Local {
                        value: gap.max(0.0),
                        grads: vec![vec![0.0; n], scale(&d, 1.0 / r)],
                        ball: 0.0,
                        exact: true,
                        regular: true,
                        antiregular: false,
                        smooth: false,
                    }
                }
            }
            Expr::DistPolytope { normals, offsets } => {
                let p = projection_onto_polytope(normals, offsets, x);
                let d = sub(x, &p);
                let dist = norm(&d);
                let scale_x = 1.0 + norm(x);
                if dist > TIE_TOL * scale_x {
                    return Local::smooth(dist, scale(&d, 1.0 / dist));
                }
                let active: Vec<Vec<f64>> = normals
                    .iter()
                    .zip(offsets)
                    .filter(|(a, b)| dot(a, x) - *b >= -TIE_TOL * scale_x * norm(a))
                    .map(|(a, _)| scale(a, 1.0 / norm(a)))
                    .collect();
                if active.is_empty() {
                    return Local::smooth(0.0, vec![0.0; n]);
                }
                let exact = active.len() == 1;
                let mut grads = vec![vec![0.0; n]];
                grads.extend(active);
                Local {
                    value: dist,
                    grads: dedup(grads),
                    ball: 0.0,
                    exact,
                    regular: true,
                    antiregular: false,
                    smooth: false,
                }
            }
            Expr::Sum { terms } => {
                let locals: Vec<Local> = terms.iter().map(|t| t.local(x)).collect();
                sum_locals(locals)
            }
            Expr::Scale { factor, arg } => arg.local(x).scaled(*factor),
            Expr::Neg { arg } => arg.local(x).scaled(-1.0),
            Expr::Max { args } => extremum(args, x, true),
            Expr::Min { args } => extremum(args, x, false),
            Expr::Abs { arg } => {
                let l = arg.local(x);
                let v = l.value;
                if v > tie_tol(v) {
                    l
                } else if v < -tie_tol(v) {
                    l.scaled(-1.0)
                } else {
                    let exact = l.exact && l.regular && l.antiregular;
                    let regular = l.regular && l.antiregular;
                    let neg = l.clone().scaled(-1.0);
                    let base = l;
                    let mut both = vec![base, neg];
                    if both.iter().any(|b| b.ball > 0.0) {
                        both = both.into_iter().map(|b| b.expand_ball()).collect();
                    }
                    let mut grads = Vec::new();
                    for b in both {
                        grads.extend(b.grads);
                    }
                    Local {
                        value: v.abs(),
                        grads: dedup(grads),
                        ball: 0.0,
                        exact,
                        regular,
                        antiregular: false,
                        smooth: false,
                    }
                }
            }
            Expr::Compose { inner, outer } => {
                let (y, jac) = inner.jacobian(x);
                let mut l = outer.local(&y);
                if l.ball > 0.0 {
                    l = l.expand_ball();
                }
                let grads: Vec<Vec<f64>> = l.grads.iter().map(|g| mat_t_vec(&jac, g)).collect();
                let surjective = !jac.is_empty() && {
                    let m = crate::linalg::to_dmatrix(&jac);
                    let sv = m.singular_values();
                    let smax = sv.max();
                    sv.iter().filter(|s| **s > 1e-12 * smax.max(1e-300)).count() == jac.len()
                };
                let exact = l.exact && (l.smooth || l.regular || surjective);
                Local {
                    value: l.value,
                    grads: dedup(grads),
                    ball: 0.0,
                    exact,
                    regular: l.regular,
                    antiregular: l.antiregular,
                    smooth: l.smooth,
                }
            }
        }
    }

    /// Active kink locations whose sign change marks a branch switch.
    pub(crate) fn switches(&self, x: &[f64]) -> Vec<Switch> {
        let mut out = Vec::new();
        self.collect_switches(x, &mut Vec::new(), &mut out);
        out
    }

    fn collect_switches(&self, x: &[f64], path: &mut Vec<usize>, out: &mut Vec<Switch>) {
        match self {
            Expr::Max { args } | Expr::Min { args } => {
                if args.len() >= 2 {
                    let is_max = matches!(self, Expr::Max { .. });
                    let mut vals: Vec<(usize, f64)> = args.iter().enumerate().map(|(i, a)| (i, a.eval(x))).collect();
                    vals.sort_by(|a, b| if is_max { b.1.total_cmp(&a.1) } else { a.1.total_cmp(&b.1) });
                    out.push(Switch { path: path.clone(), kind: SwitchKind::Pair(vals[0].0, vals[1].0) });
                    for (i, a) in args.iter().enumerate() {
                        path.push(i);
                        a.collect_switches(x, path, out);
                        path.pop();
                    }
                } else {
                    path.push(0);
                    args[0].collect_switches(x, path, out);
                    path.pop();
                }
            }
            Expr::Abs { arg } => {
                out.push(Switch { path: path.clone(), kind: SwitchKind::Zero });
                path.push(0);
                arg.collect_switches(x, path, out);
                path.pop();
            }
            Expr::DistBall { .. } => out.push(Switch { path: path.clone(), kind: SwitchKind::Zero }),
            Expr::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    path.push(i);
                    t.collect_switches(x, path, out);
                    path.pop();
                }
            }
            Expr::Scale { arg, .. } | Expr::Neg { arg } => {
                path.push(0);
                arg.collect_switches(x, path, out);
                path.pop();
            }
            Expr::Compose { inner, outer } => {
                let y = inner.apply(x);
                path.push(0);
                outer.collect_switches(&y, path, out);
                path.pop();
            }
            _ => {}
        }
    }

    /// Value of a switching function at `z`; its zeros are kink points.
    pub(crate) fn switch_value(&self, sw: &Switch, z: &[f64]) -> f64 {
        self.switch_at(&sw.path, &sw.kind, z)
    }

    fn switch_at(&self, path: &[usize], kind: &SwitchKind, z: &[f64]) -> f64 {
        if let Some((&head, rest)) = path.split_first() {
            return match self {
                Expr::Sum { terms } => terms[head].switch_at(rest, kind, z),
                Expr::Max { args } | Expr::Min { args } => args[head].switch_at(rest, kind, z),
                Expr::Scale { arg, .. } | Expr::Neg { arg } | Expr::Abs { arg } => arg.switch_at(rest, kind, z),
                Expr::Compose { inner, outer } => outer.switch_at(rest, kind, &inner.apply(z)),
                _ => f64::NAN,
            };
        }
        match (self, kind) {
            (Expr::Max { args }, SwitchKind::Pair(i, j)) | (Expr::Min { args }, SwitchKind::Pair(i, j)) => {
                args[*i].eval(z) - args[*j].eval(z)
            }
            (Expr::Abs { arg }, SwitchKind::Zero) => arg.eval(z),
            (Expr::DistBall { center, radius }, SwitchKind::Zero) => norm(&sub(z, center)) - radius,
            _ => f64::NAN,
        }
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument("non-finite coefficient in expression".into()))
    }
}

fn sum_locals(locals: Vec<Local>) -> Local {
    let nonsmooth = locals.iter().filter(|l| !l.smooth).count();
    let all_regular = locals.iter().all(|l| l.regular);
    let all_anti = locals.iter().all(|l| l.antiregular);
    let exact = locals.iter().all(|l| l.exact) && (all_regular || all_anti || nonsmooth <= 1);
    let smooth = nonsmooth == 0;
    let mut value = 0.0;
    let mut ball = 0.0;
    let mut grads: Vec<Vec<f64>> = vec![vec![0.0; locals[0].grads[0].len()]];
    for l in locals {
        value += l.value;
        ball += l.ball;
        let mut next = Vec::with_capacity(grads.len() * l.grads.len());
        for g in &grads {
            for h in &l.grads {
                next.push(g.iter().zip(h).map(|(a, b)| a + b).collect());
            }
        }
        grads = dedup(next);
    }
    Local { value, grads, ball, exact, regular: all_regular, antiregular: all_anti, smooth }
}

fn extremum(args: &[Expr], x: &[f64], is_max: bool) -> Local {
    let locals: Vec<Local> = args.iter().map(|a| a.local(x)).collect();
    let best = if is_max {
        locals.iter().map(|l| l.value).fold(f64::NEG_INFINITY, f64::max)
    } else {
        locals.iter().map(|l| l.value).fold(f64::INFINITY, f64::min)
    };
    let tol = tie_tol(best);
    let mut active: Vec<Local> =
        locals.into_iter().filter(|l| if is_max { l.value >= best - tol } else { l.value <= best + tol }).collect();
    if active.len() == 1 {
        let mut l = active.pop().unwrap();
        l.value = best;
        return l;
    }
    let balls: Vec<f64> = active.iter().map(|l| l.ball).collect();
    let uniform_ball = balls.iter().all(|b| *b == balls[0]);
    let mut exact = active.iter().all(|l| l.exact);
    if !uniform_ball {
        active = active.into_iter().map(|l| l.expand_ball()).collect();
        exact = false;
    }
    let ball = active[0].ball;
    // A max of regular functions has gradient = hull of active gradients; a
    // min only satisfies an inclusion, so sampling takes over.
    let regular;
    let antiregular;
    if is_max {
        regular = active.iter().all(|l| l.regular);
        antiregular = false;
        exact = exact && regular;
    } else {
        regular = false;
        antiregular = active.iter().all(|l| l.antiregular);
        exact = false;
    }
    let mut grads = Vec::new();
    for l in active {
        grads.extend(l.grads);
    }
    Local { value: best, grads: dedup(grads), ball, exact, regular, antiregular, smooth: false }
}
