//! Constraint sets `K = {f ≤ 0}` given by a representing function:
//! membership, boundary sampling, regularity classification, canonical
//! signed-distance functions, tangent and normal cone tests, and
//! ε-thickening.

mod regularity;

pub use regularity::{
    classify_regularity, classify_regularity_with, liminf_polar_distance, AnnulusInfimum, PointRegularity,
    ProbeOptions, RegularityClass, RegularityReport,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm, sub};
use crate::nonsmooth::{self, BoxDomain, ClarkeConfig, Expr, LipschitzFunction, PolarStatus};

/// Default boundary tolerance `1e-8·(1+|x|)`.
pub fn boundary_tol(x: &[f64]) -> f64 {
    1e-8 * (1.0 + norm(x))
}

const BISECTION_BUDGET: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetry {
    #[serde(default)]
    pub set_symmetric: bool,
    #[serde(default)]
    pub rep_even: bool,
    #[serde(default)]
    pub superlevels_symmetric: bool,
}

impl Symmetry {
    pub fn all() -> Self {
        Symmetry { set_symmetric: true, rep_even: true, superlevels_symmetric: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Canonical kind of a constraint set, used for closed-form shortcuts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : ⟨normal, x⟩ ≤ offset}`
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// `{x : ⟨a_i, x⟩ ≤ b_i}`
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    /// Union of circle curves in the plane.
    CircleUnion {
        circles: Vec<Circle>,
    },
    Custom {
        name: String,
    },
    /// `{f_base ≤ eps}`
    Thickened {
        base: Box<SetKind>,
        eps: f64,
    },
}

/// What kind of function represents the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    /// The distance function `d_K`.
    Distance,
    /// The signed distance `Δ_K = d_K − d_{K^c}`.
    Signed,
    /// A squared-norm form such as `|x|² − r²`.
    Squared,
    Custom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rep: LipschitzFunction,
    pub ref_box: BoxDomain,
    pub symmetry: Symmetry,
    pub kind: SetKind,
    pub rep_kind: RepKind,
    /// Stored metadata for canonical fixtures; never computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_characteristic: Option<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

/// Which representing function to build for a canonical set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepChoice {
    #[default]
    Distance,
    Signed,
    Squared,
}

/// JSON description of a constraint set.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetDescriptor {
    Ball {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        dim: Option<usize>,
        radius: f64,
        #[serde(default)]
        rep: RepChoice,
        #[serde(default)]
        ref_box: Option<BoxDomain>,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
        #[serde(default)]
        ref_box: Option<BoxDomain>,
    },
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        #[serde(default)]
        rep: RepChoice,
        #[serde(default)]
        ref_box: Option<BoxDomain>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default)]
        rep: RepChoice,
        #[serde(default)]
        ref_box: Option<BoxDomain>,
    },
    CircleUnion {
        circles: Vec<Circle>,
        #[serde(default)]
        ref_box: Option<BoxDomain>,
    },
    Custom {
        rep: LipschitzFunction,
        ref_box: BoxDomain,
        #[serde(default)]
        symmetry: Symmetry,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        euler_characteristic: Option<i64>,
    },
}

impl ConstraintSet {
    /// Build and check: the set must be nonempty inside `ref_box`, and an
    /// even representation must pass a random evenness probe.
    pub fn new(
        rep: LipschitzFunction,
        ref_box: BoxDomain,
        symmetry: Symmetry,
        kind: SetKind,
        rep_kind: RepKind,
    ) -> Result<Self> {
        rep.validate()?;
        check_dim(rep.dim, ref_box.dim())?;
        let set = ConstraintSet { rep, ref_box, symmetry, kind, rep_kind, euler_characteristic: None };
        set.check_nonempty()?;
        if set.symmetry.rep_even {
            set.check_even()?;
        }
        Ok(set)
    }

    pub fn with_euler_characteristic(mut self, chi: i64) -> Self {
        self.euler_characteristic = Some(chi);
        self
    }

    fn check_nonempty(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f_6e65);
        let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
        for _ in 0..2000 {
            let x = linalg::random_in_box(&mut rng, &self.ref_box.lo, &self.ref_box.hi);
            let v = self.rep.value(&x);
            if v <= boundary_tol(&x) {
                return Ok(());
            }
            best.push((v, x));
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, x) in best.iter().take(16) {
            if let Some(z) = pull_to_level(&self.rep, x, 0.0) {
                if self.ref_box.contains(&z) {
                    return Ok(());
                }
            }
        }
        Err(Error::Argument("constraint set appears empty inside its reference box".into()))
    }

    fn check_even(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6576_656e);
        for _ in 0..256 {
            let x = linalg::random_in_box(&mut rng, &self.ref_box.lo, &self.ref_box.hi);
            let mx: Vec<f64> = x.iter().map(|v| -v).collect();
            if !self.rep.in_domain(&x) || !self.rep.in_domain(&mx) {
                continue;
            }
            let (a, b) = (self.rep.value(&x), self.rep.value(&mx));
            if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                return Err(Error::Argument(format!("representation flagged even but f({x:?}) ≠ f(−x)")));
            }
        }
        Ok(())
    }

    /// Ball `D(center, radius)` with the requested representation.
    pub fn ball(center: Vec<f64>, radius: f64, rep: RepChoice) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Argument("ball radius must be positive".into()));
        }
        let n = center.len();
        let ref_box = BoxDomain::around(&center, 1.5 * radius);
        Self::ball_in(center, radius, rep, ref_box, n)
    }

    fn ball_in(center: Vec<f64>, radius: f64, rep: RepChoice, ref_box: BoxDomain, n: usize) -> Result<Self> {
        let (expr, rep_kind) = match rep {
            RepChoice::Distance => (Expr::dist_ball(center.clone(), radius), RepKind::Distance),
            RepChoice::Signed => (Expr::norm_at(center.clone()).plus(-radius)?, RepKind::Signed),
            RepChoice::Squared => {
                let c2 = dot(&center, &center);
                (
                    Expr::Quadratic {
                        matrix: linalg::identity(n),
                        linear: Some(center.iter().map(|c| -2.0 * c).collect()),
                        offset: c2 - radius * radius,
                    },
                    RepKind::Squared,
                )
            }
        };
        let lip = match rep {
            RepChoice::Squared => 2.0 * (ref_box.diameter() + norm(&center)),
            _ => 1.0,
        };
        let rep = LipschitzFunction::new(expr, n)?.with_lipschitz(lip);
        let symmetric = norm(&center) == 0.0;
        let symmetry = if symmetric { Symmetry::all() } else { Symmetry::default() };
        Ok(Self::new(rep, ref_box, symmetry, SetKind::Ball { center, radius }, rep_kind)?.with_euler_characteristic(1))
    }

    /// Half-space `{⟨normal, x⟩ ≤ offset}` represented by its signed distance.
    pub fn halfspace(normal: Vec<f64>, offset: f64, ref_box: Option<BoxDomain>) -> Result<Self> {
        let kind = SetKind::Halfspace { normal: normal.clone(), offset };
        let rep = delta_function(&kind)?;
        let a2 = dot(&normal, &normal);
        let foot = linalg::scale(&normal, offset / a2);
        let ref_box = ref_box.unwrap_or_else(|| BoxDomain::around(&foot, 2.0));
        Ok(Self::new(rep, ref_box, Symmetry::default(), kind, RepKind::Signed)?.with_euler_characteristic(1))
    }

    /// Convex polytope `{⟨a_i, x⟩ ≤ b_i}`; Signed uses Δ_K, Distance uses d_K.
    pub fn polytope(
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        rep: RepChoice,
        ref_box: Option<BoxDomain>,
    ) -> Result<Self> {
        let kind = SetKind::Polytope { normals: normals.clone(), offsets: offsets.clone() };
        let n = normals.first().map_or(0, |a| a.len());
        let (f, rep_kind) = match rep {
            RepChoice::Signed => (delta_function(&kind)?, RepKind::Signed),
            RepChoice::Distance => (
                LipschitzFunction::new(Expr::DistPolytope { normals: normals.clone(), offsets: offsets.clone() }, n)?
                    .with_lipschitz(1.0),
                RepKind::Distance,
            ),
            RepChoice::Squared => return Err(Error::Unsupported("squared representation of a polytope".into())),
        };
        let ref_box = match ref_box {
            Some(b) => b,
            None => polytope_bounding_box(&normals, &offsets)?,
        };
        let symmetric = normals.iter().zip(&offsets).all(|(a, b)| {
            normals.iter().zip(&offsets).any(|(c, d)| {
                (b - d).abs() <= 1e-12 * (1.0 + b.abs()) && norm(&linalg::add(a, c)) <= 1e-12 * (1.0 + norm(a))
            })
        });
        let symmetry = if symmetric { Symmetry::all() } else { Symmetry::default() };
        Ok(Self::new(f, ref_box, symmetry, kind, rep_kind)?.with_euler_characteristic(1))
    }

    /// Axis-aligned box as a polytope.
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>, rep: RepChoice, ref_box: Option<BoxDomain>) -> Result<Self> {
        let bx = BoxDomain::new(lo.clone(), hi.clone())?;
        let n = lo.len();
        let mut normals = Vec::with_capacity(2 * n);
        let mut offsets = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            normals.push(e.clone());
            offsets.push(hi[i]);
            e[i] = -1.0;
            normals.push(e);
            offsets.push(-lo[i]);
        }
        let pad = 0.5 * bx.lo.iter().zip(&bx.hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        let ref_box = ref_box.unwrap_or_else(|| BoxDomain {
            lo: lo.iter().map(|v| v - pad).collect(),
            hi: hi.iter().map(|v| v + pad).collect(),
        });
        Self::polytope(normals, offsets, rep, Some(ref_box))
    }

    /// Union of planar circle curves represented by the distance function.
    pub fn circle_union(circles: Vec<Circle>, ref_box: Option<BoxDomain>) -> Result<Self> {
        if circles.is_empty() {
            return Err(Error::Argument("circle union needs at least one circle".into()));
        }
        for c in &circles {
            check_dim(2, c.center.len())?;
            if !(c.radius > 0.0) {
                return Err(Error::Argument("circle radius must be positive".into()));
            }
        }
        let parts: Vec<Expr> =
            circles.iter().map(|c| Expr::abs(Expr::norm_at(c.center.clone()).plus(-c.radius).unwrap())).collect();
        let expr = if parts.len() == 1 { parts.into_iter().next().unwrap() } else { Expr::min(parts) };
        let rep = LipschitzFunction::new(expr, 2)?.with_lipschitz(1.0);
        let ref_box = ref_box.unwrap_or_else(|| {
            let rmax = circles.iter().map(|c| c.radius).fold(0.0, f64::max);
            let lo = (0..2)
                .map(|i| circles.iter().map(|c| c.center[i] - c.radius).fold(f64::INFINITY, f64::min) - 0.5 * rmax)
                .collect();
            let hi = (0..2)
                .map(|i| circles.iter().map(|c| c.center[i] + c.radius).fold(f64::NEG_INFINITY, f64::max) + 0.5 * rmax)
                .collect();
            BoxDomain { lo, hi }
        });
        let symmetric = circles.iter().all(|c| {
            circles
                .iter()
                .any(|d| (c.radius - d.radius).abs() < 1e-12 && norm(&linalg::add(&c.center, &d.center)) < 1e-12)
        });
        let symmetry = if symmetric { Symmetry::all() } else { Symmetry::default() };
        let chi = match circles.as_slice() {
            [_] => Some(0),
            [a, b] if (linalg::dist(&a.center, &b.center) - a.radius - b.radius).abs() < 1e-12 => Some(-1),
            _ => None,
        };
        let mut set = Self::new(rep, ref_box, symmetry, SetKind::CircleUnion { circles }, RepKind::Distance)?;
        set.euler_characteristic = chi;
        Ok(set)
    }

    pub fn from_descriptor(d: &SetDescriptor) -> Result<Self> {
        match d.clone() {
            SetDescriptor::Ball { center, dim, radius, rep, ref_box } => {
                let center = match (center, dim) {
                    (Some(c), _) => c,
                    (None, Some(n)) => vec![0.0; n],
                    (None, None) => return Err(Error::Argument("ball needs a center or a dim".into())),
                };
                let n = center.len();
                let ref_box = ref_box.unwrap_or_else(|| BoxDomain::around(&center, 1.5 * radius));
                if !(radius > 0.0) {
                    return Err(Error::Argument("ball radius must be positive".into()));
                }
                Self::ball_in(center, radius, rep, ref_box, n)
            }
            SetDescriptor::Halfspace { normal, offset, ref_box } => Self::halfspace(normal, offset, ref_box),
            SetDescriptor::Polytope { normals, offsets, rep, ref_box } => {
                Self::polytope(normals, offsets, rep, ref_box)
            }
            SetDescriptor::Box { lo, hi, rep, ref_box } => Self::boxed(lo, hi, rep, ref_box),
            SetDescriptor::CircleUnion { circles, ref_box } => Self::circle_union(circles, ref_box),
            SetDescriptor::Custom { rep, ref_box, symmetry, name, euler_characteristic } => {
                let mut set = Self::new(
                    rep,
                    ref_box,
                    symmetry,
                    SetKind::Custom { name: name.unwrap_or_else(|| "custom".into()) },
                    RepKind::Custom,
                )?;
                set.euler_characteristic = euler_characteristic;
                Ok(set)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.rep.dim
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.rep.eval(x)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rep.in_domain(x) && self.rep.value(x) <= tol
    }

    /// Whether K has nonempty interior. Canonical solid kinds answer
    /// structurally (a distance representation vanishes on the interior, so
    /// sampling `f < 0` would miss it); other kinds are probed by sampling.
    pub fn has_interior(&self) -> bool {
        match &self.kind {
            SetKind::Ball { .. } | SetKind::Halfspace { .. } | SetKind::Polytope { .. } => true,
            SetKind::CircleUnion { .. } => false,
            SetKind::Thickened { eps, .. } if *eps > 0.0 => true,
            _ => self.find_interior_sample().is_some(),
        }
    }

    fn find_interior_sample(&self) -> Option<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x696e_7465);
        (0..4000)
            .map(|_| linalg::random_in_box(&mut rng, &self.ref_box.lo, &self.ref_box.hi))
            .find(|x| self.rep.value(x) < -boundary_tol(x))
    }

    /// Errors unless K has interior, naming the operation that needs it.
    pub fn require_interior(&self, what: &str) -> Result<()> {
        if self.has_interior() {
            Ok(())
        } else {
            Err(Error::Prerequisite(format!(
                "{what} needs a constraint set with nonempty interior; this set has none under its representation"
            )))
        }
    }

    /// A point of K near `x`, pulling toward the zero level when needed.
    pub fn pull_into(&self, x: &[f64], level: f64) -> Option<Vec<f64>> {
        if self.rep.value(x) <= level {
            return Some(x.to_vec());
        }
        pull_to_level(&self.rep, x, level)
    }
}

fn polytope_bounding_box(normals: &[Vec<f64>], offsets: &[f64]) -> Result<BoxDomain> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = normals.first().map_or(0, |a| a.len());
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        for (dir, slot) in [(OptimizationDirection::Minimize, 0), (OptimizationDirection::Maximize, 1)] {
            let mut p = Problem::new(dir);
            let vars: Vec<_> =
                (0..n).map(|j| p.add_var(if i == j { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY))).collect();
            for (a, b) in normals.iter().zip(offsets) {
                let terms: Vec<_> = vars.iter().zip(a).map(|(v, c)| (*v, *c)).collect();
                p.add_constraint(&terms[..], ComparisonOp::Le, *b);
            }
            let sol = p
                .solve()
                .map_err(|e| Error::Argument(format!("polytope is empty or unbounded ({e}); supply ref_box")))?;
            if slot == 0 {
                lo[i] = sol[vars[i]];
            } else {
                hi[i] = sol[vars[i]];
            }
        }
    }
    let pad = 0.5 * lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max).max(1e-6);
    Ok(BoxDomain { lo: lo.iter().map(|v| v - pad).collect(), hi: hi.iter().map(|v| v + pad).collect() })
}

/// Newton-type correction along the minimum-norm gradient until
/// `|f(y) − level|` is within the boundary tolerance.
pub(crate) fn pull_to_level(f: &LipschitzFunction, y: &[f64], level: f64) -> Option<Vec<f64>> {
    let mut z = y.to_vec();
    for _ in 0..BISECTION_BUDGET {
        let gap = f.value(&z) - level;
        if gap.abs() < boundary_tol(&z) {
            return Some(z);
        }
        let g = f.rule_min_norm_gradient(&z);
        let g2 = dot(&g, &g);
        if g2 < 1e-24 {
            return None;
        }
        z = linalg::axpy(&z, -gap / g2, &g);
        if z.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

/// Classify `x` against K with tolerance `tol`.
pub fn membership(k: &ConstraintSet, x: &[f64], tol: f64) -> Result<Membership> {
    let v = k.rep.eval(x)?;
    Ok(if v <= -tol {
        Membership::Inside
    } else if v.abs() < tol {
        Membership::Boundary
    } else {
        Membership::Outside
    })
}

/// `n` points on `{f = 0}`: bisection between inside and outside samples
/// when both exist, otherwise a root-find from outside points along the
/// gradient.
pub fn sample_boundary(k: &ConstraintSet, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let f = &k.rep;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for _ in 0..4000 {
        let x = linalg::random_in_box(&mut rng, &k.ref_box.lo, &k.ref_box.hi);
        if !f.in_domain(&x) {
            continue;
        }
        let v = f.value(&x);
        if v < -boundary_tol(&x) {
            inside.push(x);
        } else if v > boundary_tol(&x) {
            outside.push(x);
        }
    }
    let mut out = Vec::with_capacity(n);
    if !inside.is_empty() && !outside.is_empty() {
        for _ in 0..50 * n {
            if out.len() == n {
                break;
            }
            let a = &inside[rng.random_range(0..inside.len())];
            let b = &outside[rng.random_range(0..outside.len())];
            if let Some(z) = bisect(f, a, b) {
                out.push(z);
            }
        }
    } else if !outside.is_empty() {
        for _ in 0..50 * n {
            if out.len() == n {
                break;
            }
            let a = &outside[rng.random_range(0..outside.len())];
            if let Some(z) = pull_to_level(f, a, 0.0) {
                if k.ref_box.contains(&z) {
                    out.push(z);
                }
            }
        }
    }
    if out.len() < n {
        return Err(Error::Sampling(format!(
            "found {} of {n} boundary points (inside samples: {}, outside samples: {})",
            out.len(),
            inside.len(),
            outside.len()
        )));
    }
    Ok(out)
}

fn bisect(f: &LipschitzFunction, inside: &[f64], outside: &[f64]) -> Option<Vec<f64>> {
    // Bisect until the bracket stops shrinking rather than stopping at the
    // acceptance tolerance; downstream margins are read off these points.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..BISECTION_BUDGET {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let z: Vec<f64> = inside.iter().zip(outside).map(|(a, b)| a + mid * (b - a)).collect();
        let v = f.value(&z);
        if best.as_ref().is_none_or(|(b, _)| v.abs() < *b) {
            best = Some((v.abs(), z.clone()));
        }
        if v == 0.0 {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.filter(|(v, z)| *v < boundary_tol(z)).map(|(_, z)| z)
}

/// Thickening cap M: the minimum of f over seeded samples of the
/// reference-box boundary.
pub fn thickening_cap(k: &ConstraintSet) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7468_6963);
    let n = k.dim();
    let mut m = f64::INFINITY;
    // Face centers first: for a ball they attain the minimum exactly.
    let c = k.ref_box.center();
    for axis in 0..n {
        for end in [k.ref_box.lo[axis], k.ref_box.hi[axis]] {
            let mut x = c.clone();
            x[axis] = end;
            if k.rep.in_domain(&x) {
                m = m.min(k.rep.value(&x));
            }
        }
    }
    for _ in 0..1000 {
        let mut x = linalg::random_in_box(&mut rng, &k.ref_box.lo, &k.ref_box.hi);
        let axis = rng.random_range(0..n);
        x[axis] = if rng.random::<bool>() { k.ref_box.hi[axis] } else { k.ref_box.lo[axis] };
        if k.rep.in_domain(&x) {
            m = m.min(k.rep.value(&x));
        }
    }
    m
}

/// `K_ε = {f ≤ ε}`, represented by `f − ε` over the same reference box.
pub fn sublevel_thicken(k: &ConstraintSet, eps: f64) -> Result<ConstraintSet> {
    if !(eps > 0.0) {
        return Err(Error::Argument("thickening eps must be positive".into()));
    }
    let cap = thickening_cap(k);
    if eps >= cap {
        return Err(Error::ThickeningCap { eps, cap });
    }
    Ok(ConstraintSet {
        rep: k.rep.offset(-eps),
        ref_box: k.ref_box.clone(),
        symmetry: k.symmetry,
        kind: SetKind::Thickened { base: Box::new(k.kind.clone()), eps },
        rep_kind: RepKind::Custom,
        euler_characteristic: None,
    })
}

/// Signed distance `Δ_K = d_K − d_{K^c}` for balls, half-spaces and convex
/// polytopes.
pub fn delta_function(kind: &SetKind) -> Result<LipschitzFunction> {
    match kind {
        SetKind::Ball { center, radius } => {
            Ok(LipschitzFunction::new(Expr::norm_at(center.clone()).plus(-radius)?, center.len())?.with_lipschitz(1.0))
        }
        SetKind::Halfspace { normal, offset } => {
            let a = norm(normal);
            if a == 0.0 {
                return Err(Error::Argument("half-space normal is zero".into()));
            }
            Ok(LipschitzFunction::new(Expr::affine(linalg::scale(normal, 1.0 / a), -offset / a), normal.len())?
                .with_lipschitz(1.0))
        }
        SetKind::Polytope { normals, offsets } => {
            let n = normals.first().map_or(0, |a| a.len());
            let faces: Vec<Expr> = normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| {
                    let k = norm(a);
                    Expr::affine(linalg::scale(a, 1.0 / k), -b / k)
                })
                .collect();
            let inner = Expr::min(vec![Expr::max(faces), Expr::constant(n, 0.0)]);
            let expr =
                Expr::sum(vec![Expr::DistPolytope { normals: normals.clone(), offsets: offsets.clone() }, inner]);
            Ok(LipschitzFunction::new(expr, n)?.with_lipschitz(1.0))
        }
        other => Err(Error::Unsupported(format!("signed distance for set kind {other:?}"))),
    }
}

/// Test `v ∈ C_K(x)` for a distance representation. Directions are compared
/// on the unit sphere so the zero generator of `∂d_K` at boundary points does
/// not swallow the margin: inside when every nonzero generator p has
/// `⟨p̂, v̂⟩ ≤ −tol`, outside when `d_K°(x; v) ≥ tol`.
pub fn clarke_tangent_test(
    k: &ConstraintSet,
    x: &[f64],
    v: &[f64],
    tol: f64,
    cfg: &ClarkeConfig,
) -> Result<PolarStatus> {
    if k.rep_kind != RepKind::Distance {
        return Err(Error::Prerequisite("tangent-cone test needs a distance representation".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("tol must be positive".into()));
    }
    let bundle = nonsmooth::clarke_gradient(&k.rep, x, cfg)?;
    let upper = bundle.support(v);
    if upper >= tol {
        return Ok(PolarStatus::Outside);
    }
    let Some(vhat) = linalg::normalized(v) else {
        return Ok(PolarStatus::Uncertain);
    };
    if bundle.ball_radius > 0.0 {
        return Ok(PolarStatus::Uncertain);
    }
    let worst = bundle
        .vectors
        .iter()
        .filter_map(|p| linalg::normalized(p))
        .map(|p| dot(&p, &vhat))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if worst <= -tol { PolarStatus::Inside } else { PolarStatus::Uncertain })
}

/// Largest sampled ratio `⟨v̂, y − x⟩ / |y − x|` over `y ∈ K ∩ B(x, delta)`.
pub fn regular_normal_ratio(
    k: &ConstraintSet,
    x: &[f64],
    v: &[f64],
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(k.dim(), x.len())?;
    let vhat = linalg::normalized(v).ok_or_else(|| Error::Argument("normal vector must be nonzero".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut found = 0usize;
    for _ in 0..samples {
        let y = linalg::random_in_ball(&mut rng, x, delta);
        if !k.rep.in_domain(&y) {
            continue;
        }
        let candidate = if k.rep.value(&y) <= boundary_tol(&y) {
            Some(y)
        } else {
            pull_to_level(&k.rep, &y, 0.0).filter(|z| linalg::dist(z, x) <= delta)
        };
        if let Some(z) = candidate {
            let d = sub(&z, x);
            let r = norm(&d);
            if r > 1e-14 * (1.0 + norm(x)) {
                found += 1;
                worst = worst.max(dot(&vhat, &d) / r);
            }
        }
    }
    if found == 0 {
        return Err(Error::Inconclusive(format!("no points of K found in B({x:?}, {delta})")));
    }
    Ok(worst)
}

/// Approximate regular normal test `⟨v̂, y − x⟩ ≤ eps·|y − x|` on sampled
/// `y ∈ K ∩ B(x, delta)`; `eps` is relative to `|v|`.
pub fn regular_normal_test(
    k: &ConstraintSet,
    x: &[f64],
    v: &[f64],
    eps: f64,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    Ok(regular_normal_ratio(k, x, v, delta, samples, seed)? <= eps)
}

/// Search for a point with `f < 0` within `radius` of `x`: random draws, then
/// descent along the minimum-norm gradient.
pub fn interior_witness(k: &ConstraintSet, x: &[f64], radius: f64, seed: u64) -> Option<Vec<f64>> {
    let f = &k.rep;
    let g = f.rule_min_norm_gradient(x);
    if let Some(ghat) = linalg::normalized(&g) {
        let mut t = radius;
        for _ in 0..40 {
            let y = linalg::axpy(x, -t, &ghat);
            if f.in_domain(&y) && f.value(&y) < 0.0 {
                return Some(y);
            }
            t *= 0.5;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2000).map(|_| linalg::random_in_ball(&mut rng, x, radius)).find(|y| f.in_domain(y) && f.value(y) < 0.0)
}
