//! Brouwer degree of continuous maps on boxes and balls (nonlinear maps in
//! dimension ≤ 3, linear maps in any dimension), Poincaré–Bohl checks and
//! null-space projectors.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};
use crate::nonsmooth::BoxDomain;

/// Default number of boundary segments for the 2D winding number.
pub const WINDING_RESOLUTION: usize = 4096;
const WINDING_CAP: usize = 1 << 20;
const MARGIN_TOL: f64 = 1e-9;

pub type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct CustomContinuous {
    pub dim: usize,
    pub func: Arc<MapFn>,
}

impl fmt::Debug for CustomContinuous {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomContinuous({})", self.dim)
    }
}

/// Continuous map `R^N → R^N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousMap {
    /// `x ↦ A x + b`
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    /// `z ↦ z^power` on `R² ≅ C`.
    ComplexPower { power: u32 },
    #[serde(skip)]
    Custom(CustomContinuous),
}

impl ContinuousMap {
    pub fn identity(n: usize) -> Self {
        ContinuousMap::Linear { matrix: linalg::identity(n), offset: None }
    }

    pub fn custom(dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ContinuousMap::Custom(CustomContinuous { dim, func: Arc::new(f) })
    }

    pub fn dim(&self) -> usize {
        match self {
            ContinuousMap::Linear { matrix, .. } => matrix.len(),
            ContinuousMap::ComplexPower { .. } => 2,
            ContinuousMap::Custom(c) => c.dim,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ContinuousMap::Linear { matrix, offset } => {
                let y = linalg::mat_vec(matrix, x);
                match offset {
                    Some(b) => linalg::add(&y, b),
                    None => y,
                }
            }
            ContinuousMap::ComplexPower { power } => {
                let (mut re, mut im) = (1.0, 0.0);
                for _ in 0..*power {
                    (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
                }
                vec![re, im]
            }
            ContinuousMap::Custom(c) => (c.func)(x),
        }
    }

    fn validate(&self) -> Result<()> {
        if let ContinuousMap::Linear { matrix, offset } = self {
            let n = matrix.len();
            if n == 0 {
                return Err(Error::Argument("linear map needs a nonempty matrix".into()));
            }
            for row in matrix {
                check_dim(n, row.len())?;
            }
            if let Some(b) = offset {
                check_dim(n, b.len())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn unit_ball(n: usize) -> Self {
        Region::Ball { center: vec![0.0; n], radius: 1.0 }
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        Region::Box { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn from_box(b: &BoxDomain) -> Self {
        Region::Box { lo: b.lo.clone(), hi: b.hi.clone() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::Argument("region box needs lo < hi".into()));
                }
            }
            Region::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Argument("region ball radius must be positive".into()));
                }
            }
        }
        if self.dim() == 0 {
            return Err(Error::Argument("region dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn contains_interior(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l < v && v < h),
            Region::Ball { center, radius } => linalg::dist(x, center) < *radius,
        }
    }

    /// Distance from `x` to the boundary of the region.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => (linalg::dist(x, center) - radius).abs(),
            Region::Box { lo, hi } => {
                let outside: f64 = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (l, h))| (l - v).max(v - h).max(0.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if outside > 0.0 {
                    outside
                } else {
                    x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| (v - l).min(h - v)).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
        }
    }

    /// Points on the boundary, roughly `count` of them.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        match self {
            Region::Ball { center, radius } => linalg::sphere_directions(n, count.max(2))
                .into_iter()
                .map(|d| linalg::axpy(center, *radius, &d))
                .collect(),
            Region::Box { lo, hi } => {
                if n == 1 {
                    return vec![lo.clone(), hi.clone()];
                }
                // Per-face tensor grids.
                let per_face = (count / (2 * n)).max(1);
                let k = ((per_face as f64).powf(1.0 / (n - 1) as f64).ceil() as usize).max(2);
                let mut out = Vec::new();
                for axis in 0..n {
                    for end in [lo[axis], hi[axis]] {
                        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
                        let total = k.pow(others.len() as u32);
                        for idx in 0..total {
                            let mut rem = idx;
                            let mut x = vec![0.0; n];
                            x[axis] = end;
                            for &i in &others {
                                let j = rem % k;
                                rem /= k;
                                x[i] = lo[i] + (hi[i] - lo[i]) * j as f64 / (k - 1) as f64;
                            }
                            out.push(x);
                        }
                    }
                }
                out
            }
        }
    }

    /// Positively oriented closed boundary polyline in 2D (last point omitted).
    fn polyline(&self, segments: usize) -> Vec<Vec<f64>> {
        match self {
            Region::Ball { center, radius } => (0..segments)
                .map(|i| {
                    let th = TAU * i as f64 / segments as f64;
                    vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()]
                })
                .collect(),
            Region::Box { lo, hi } => {
                let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
                let per = (segments / 4).max(1);
                let mut out = Vec::with_capacity(4 * per);
                for c in 0..4 {
                    let (a, b) = (corners[c], corners[(c + 1) % 4]);
                    for j in 0..per {
                        let s = j as f64 / per as f64;
                        out.push(vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMethod {
    LinearDet,
    SignChange1d,
    Winding2d,
    GridRegularValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub degree: i64,
    pub method: DegreeMethod,
    /// `min |map(x) − y|` over the boundary samples.
    pub boundary_margin: f64,
    /// Segments (2D) or grid nodes per axis (3D) actually used.
    pub resolution: usize,
}

fn boundary_margin(map: &ContinuousMap, y: &[f64], samples: &[Vec<f64>]) -> (f64, Vec<f64>) {
    samples
        .par_iter()
        .map(|x| (linalg::dist(&map.apply(x), y), x.clone()))
        .reduce(|| (f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a })
}

fn require_margin(margin: (f64, Vec<f64>), tol: f64) -> Result<f64> {
    if margin.0 <= tol {
        return Err(Error::DegreeUndefined { margin: margin.0, point: margin.1 });
    }
    Ok(margin.0)
}

/// Brouwer degree `deg(map, int region, y)` with the default boundary
/// margin tolerance.
pub fn brouwer_degree(map: &ContinuousMap, region: &Region, y: &[f64], resolution: usize) -> Result<DegreeResult> {
    brouwer_degree_with(map, region, y, resolution, MARGIN_TOL)
}

pub fn brouwer_degree_with(
    map: &ContinuousMap,
    region: &Region,
    y: &[f64],
    resolution: usize,
    margin_tol: f64,
) -> Result<DegreeResult> {
    map.validate()?;
    region.validate()?;
    let n = region.dim();
    check_dim(n, map.dim())?;
    check_dim(n, y.len())?;
    if let ContinuousMap::Linear { matrix, offset } = map {
        let samples = region.boundary_samples((64 * n).max(256));
        let sampled = boundary_margin(map, y, &samples);
        let a = linalg::to_dmatrix(matrix);
        let rhs = match offset {
            Some(b) => linalg::sub(y, b),
            None => y.to_vec(),
        };
        let det = a.determinant();
        let root = if det != 0.0 { a.clone().lu().solve(&nalgebra::DVector::from_vec(rhs.clone())) } else { None };
        let degree = match &root {
            Some(x) => {
                // |Ax − y| ≥ σ_min |x − x*|: a lower bound the samples cannot miss.
                let smin = a.singular_values().min();
                let lower = smin * region.boundary_distance(x.as_slice());
                if lower <= margin_tol {
                    return Err(Error::DegreeUndefined { margin: lower, point: x.as_slice().to_vec() });
                }
                if region.contains_interior(x.as_slice()) {
                    det.signum() as i64
                } else {
                    0
                }
            }
            None => singular_linear_degree(&a, &rhs, region, margin_tol)?,
        };
        let margin = require_margin(sampled, margin_tol)?;
        return Ok(DegreeResult { degree, method: DegreeMethod::LinearDet, boundary_margin: margin, resolution: 0 });
    }
    match n {
        1 => degree_1d(map, region, y, margin_tol),
        2 => degree_2d(map, region, y, resolution.max(8), margin_tol),
        3 => degree_3d(map, region, y, resolution.max(4), margin_tol),
        _ => Err(Error::Unsupported(format!("degree of nonlinear maps in dimension {n}"))),
    }
}

/// Degree of a singular linear map: zero when `Ax = y` has no solution in
/// the closed region, undefined when the solution set (an affine subspace)
/// meets it, since it then crosses the boundary.
fn singular_linear_degree(a: &DMatrix<f64>, rhs: &[f64], region: &Region, tol: f64) -> Result<i64> {
    let n = rhs.len();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let pinv =
        svd.pseudo_inverse(1e-12 * smax.max(f64::MIN_POSITIVE)).map_err(|e| Error::Inconclusive(e.to_string()))?;
    let b = nalgebra::DVector::from_column_slice(rhs);
    let x0 = &pinv * &b;
    // dist(y, range A) bounds |Ax − y| from below everywhere.
    if (a * &x0 - &b).norm() > tol {
        return Ok(0);
    }
    let (center, reach) = match region {
        Region::Ball { center, radius } => (center.clone(), *radius),
        Region::Box { lo, hi } => {
            let c: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
            (c.clone(), linalg::dist(&c, hi))
        }
    };
    // Nearest point of x0 + ker A to the center.
    let c = nalgebra::DVector::from_vec(center.clone());
    let proj = DMatrix::identity(n, n) - &pinv * a;
    let nearest = &x0 + &proj * (&c - &x0);
    if (&nearest - &c).norm() > reach + tol {
        return Ok(0);
    }
    Err(Error::DegreeUndefined { margin: 0.0, point: nearest.as_slice().to_vec() })
}

fn degree_1d(map: &ContinuousMap, region: &Region, y: &[f64], tol: f64) -> Result<DegreeResult> {
    let (lo, hi) = region.bounds();
    let samples = vec![lo.clone(), hi.clone()];
    let margin = require_margin(boundary_margin(map, y, &samples), tol)?;
    let sa = (map.apply(&lo)[0] - y[0]).signum();
    let sb = (map.apply(&hi)[0] - y[0]).signum();
    Ok(DegreeResult {
        degree: ((sb - sa) / 2.0) as i64,
        method: DegreeMethod::SignChange1d,
        boundary_margin: margin,
        resolution: 2,
    })
}

fn winding(map: &ContinuousMap, region: &Region, y: &[f64], segments: usize) -> (f64, f64, Vec<f64>) {
    let pts = region.polyline(segments);
    let vals: Vec<(Vec<f64>, f64)> = pts
        .par_iter()
        .map(|x| {
            let v = linalg::sub(&map.apply(x), y);
            let d = norm(&v);
            (v, d)
        })
        .collect();
    let mut total = 0.0;
    let mut margin = (f64::INFINITY, Vec::new());
    for i in 0..vals.len() {
        let (a, da) = &vals[i];
        let (b, _) = &vals[(i + 1) % vals.len()];
        total += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        if *da < margin.0 {
            margin = (*da, pts[i].clone());
        }
    }
    (total / TAU, margin.0, margin.1)
}

fn degree_2d(map: &ContinuousMap, region: &Region, y: &[f64], resolution: usize, tol: f64) -> Result<DegreeResult> {
    let mut segs = resolution;
    let (w, m, p) = winding(map, region, y, segs);
    require_margin((m, p), tol)?;
    let mut prev = w.round() as i64;
    let mut margin = m;
    loop {
        segs *= 2;
        let (w, m, p) = winding(map, region, y, segs);
        margin = margin.min(require_margin((m, p), tol)?);
        let cur = w.round() as i64;
        // Agreement of two successive resolutions, each close to an integer.
        if cur == prev && (w - cur as f64).abs() < 0.25 {
            return Ok(DegreeResult {
                degree: cur,
                method: DegreeMethod::Winding2d,
                boundary_margin: margin,
                resolution: segs,
            });
        }
        if segs >= WINDING_CAP {
            return Err(Error::Inconclusive(format!("winding number did not stabilize by {segs} segments")));
        }
        prev = cur;
    }
}

fn jacobian_cd(map: &ContinuousMap, x: &[f64], scale: f64) -> DMatrix<f64> {
    let n = x.len();
    let h = 1e-6 * scale.max(1.0);
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (map.apply(&xp), map.apply(&xm));
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

fn polish(map: &ContinuousMap, y: &[f64], start: &[f64], scale: f64) -> Option<Vec<f64>> {
    let mut x = start.to_vec();
    for _ in 0..40 {
        let r = linalg::sub(&map.apply(&x), y);
        if norm(&r) <= 1e-12 * (1.0 + norm(y)) {
            return Some(x);
        }
        let j = jacobian_cd(map, &x, scale);
        let dx = j.lu().solve(&nalgebra::DVector::from_vec(r))?;
        let step = norm(dx.as_slice());
        x = linalg::sub(&x, dx.as_slice());
        if !x.iter().all(|v| v.is_finite()) || step > 10.0 * scale {
            return None;
        }
    }
    let r = norm(&linalg::sub(&map.apply(&x), y));
    (r <= 1e-9 * (1.0 + norm(y))).then_some(x)
}

fn degree_3d(map: &ContinuousMap, region: &Region, y: &[f64], per_axis: usize, tol: f64) -> Result<DegreeResult> {
    let samples = region.boundary_samples(6 * per_axis * per_axis * 4);
    let margin = require_margin(boundary_margin(map, y, &samples), tol)?;
    let (lo, hi) = region.bounds();
    let n = 3;
    let scale = linalg::dist(&lo, &hi);
    let cell = (0..n).map(|i| (hi[i] - lo[i]) / per_axis as f64).fold(0.0, f64::max);
    let nodes: Vec<Vec<f64>> = (0..per_axis.pow(3))
        .map(|idx| {
            let mut rem = idx;
            (0..n)
                .map(|i| {
                    let j = rem % per_axis;
                    rem /= per_axis;
                    lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / per_axis as f64
                })
                .collect()
        })
        .collect();
    let roots: Vec<Vec<f64>> =
        nodes.par_iter().filter_map(|x| polish(map, y, x, scale)).filter(|r| region.contains_interior(r)).collect();
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        if !distinct.iter().any(|q| linalg::dist(q, &r) <= 1e-6 * (1.0 + cell)) {
            distinct.push(r);
        }
    }
    let mut degree = 0;
    for r in &distinct {
        let det = jacobian_cd(map, r, scale).determinant();
        if det.abs() <= 1e-10 {
            return Err(Error::Inconclusive(format!("target is not a regular value: det J ≈ 0 at {r:?}")));
        }
        degree += det.signum() as i64;
    }
    Ok(DegreeResult { degree, method: DegreeMethod::GridRegularValue, boundary_margin: margin, resolution: per_axis })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareBohl {
    pub holds: bool,
    /// Sample with the smallest slack `|m₁| + |m₂| − |m₁ − m₂|`.
    pub worst_point: Vec<f64>,
    pub worst_slack: f64,
}

/// Whether `|m₁(x) − m₂(x)| < |m₁(x)| + |m₂(x)| − margin` at every sample,
/// so the linear homotopy between the maps has no zero on the samples.
pub fn poincare_bohl_check(
    map1: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    map2: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    boundary_samples: &[Vec<f64>],
    margin: f64,
) -> Result<PoincareBohl> {
    if boundary_samples.is_empty() {
        return Err(Error::Argument("poincare_bohl_check needs boundary samples".into()));
    }
    let (slack, point) = boundary_samples
        .par_iter()
        .map(|x| {
            let (a, b) = (map1(x), map2(x));
            (norm(&a) + norm(&b) - linalg::dist(&a, &b), x.clone())
        })
        .reduce(|| (f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });
    Ok(PoincareBohl { holds: slack > margin, worst_point: point, worst_slack: slack })
}

/// Orthonormal bases of `ker(id − C)` and `im(id − C)`, with the rank
/// decided at the singular-value threshold `1e−10·‖id − C‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetSplit {
    pub kernel_basis: Vec<Vec<f64>>,
    pub image_basis: Vec<Vec<f64>>,
    pub projector: Vec<Vec<f64>>,
}

pub fn floquet_split(c: &[Vec<f64>]) -> Result<FloquetSplit> {
    let n = c.len();
    for row in c {
        check_dim(n, row.len())?;
    }
    let m = DMatrix::identity(n, n) - linalg::to_dmatrix(c);
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = 1e-10 * smax;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut kernel_basis: Vec<Vec<f64>> = Vec::new();
    let mut image_basis: Vec<Vec<f64>> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || *s <= thr {
            kernel_basis.push(vt.row(i).iter().cloned().collect());
        } else {
            image_basis.push(u.column(i).iter().cloned().collect());
        }
    }
    let mut projector = vec![vec![0.0; n]; n];
    for q in &kernel_basis {
        for i in 0..n {
            for j in 0..n {
                projector[i][j] += q[i] * q[j];
            }
        }
    }
    Ok(FloquetSplit { kernel_basis, image_basis, projector })
}

/// Orthogonal projector `P_N` onto `ker(id − C)`.
pub fn null_space_projector(c: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(floquet_split(c)?.projector)
}

/// Degree of `z ↦ Qᵀ map(Q z)` over `region ∩ span(Q)` in the coordinates of
/// the orthonormal `basis = Q`. The region is given in kernel coordinates.
pub fn kernel_degree(map: Arc<MapFn>, basis: &[Vec<f64>], region: &Region, resolution: usize) -> Result<DegreeResult> {
    let k = basis.len();
    if k == 0 {
        return Err(Error::Argument("kernel is trivial; nothing to reduce".into()));
    }
    check_dim(k, region.dim())?;
    let q: Vec<Vec<f64>> = basis.to_vec();
    let reduced = ContinuousMap::custom(k, move |z: &[f64]| {
        let n = q[0].len();
        let mut x = vec![0.0; n];
        for (zi, qi) in z.iter().zip(&q) {
            x = linalg::axpy(&x, *zi, qi);
        }
        let fx = map(&x);
        q.iter().map(|qi| linalg::dot(qi, &fx)).collect()
    });
    brouwer_degree(&reduced, region, &vec![0.0; k], resolution)
}
