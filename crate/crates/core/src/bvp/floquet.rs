//! Floquet certifiers: bounding functions at boundary points, invariance of
//! bd K under the cyclic action of C, and the kernel conditions.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checks::{
    boundary_points, bundle_value, depth_function, extreme_points, min_inner_sign, signed_transversality,
    BoundingSource, NormalFn,
};
use super::report::{CheckConfig, ConditionEntry, ConditionReport, SampleOutcome, Status, Witness};
use crate::degree::{self, Region};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, ConstraintSet, SetKind};
use crate::linalg::{self, dot, norm};
use crate::multimap::{self, ConvexValue, MultiMap};
use crate::nonsmooth::{self, Expr, LipschitzFunction};

/// Orbit cap for the cyclic action of C.
pub const ORBIT_CAP: usize = 64;

/// Default radius of the neighbourhood where local containment is checked.
const LOCAL_RADIUS: f64 = 0.1;

/// A bounding function at one boundary point.
#[derive(Clone, Debug)]
pub struct Bounding {
    pub function: LipschitzFunction,
    /// `ε` of the normal construction.
    pub eps: Option<f64>,
    /// Radius where the normal inequality `⟨v, y − x⟩ ≤ ε|y − x|` was certified.
    pub delta: Option<f64>,
}

/// `f_x(y) = ⟨v, y − x⟩ − ε|y − x|`, whose generalized gradient at `x` is
/// the ball `D(v, ε)`.
pub fn normal_bounding_function(x: &[f64], v: &[f64], eps: f64) -> Result<LipschitzFunction> {
    check_dim(x.len(), v.len())?;
    let expr = Expr::sum(vec![Expr::affine(v.to_vec(), -dot(v, x)), Expr::norm_at(x.to_vec()).scaled(-eps)]);
    Ok(LipschitzFunction::new(expr, x.len())?.with_lipschitz(norm(v) + eps))
}

/// Smallest `|⟨v̂, y⟩| / |y|` over the extreme points of `F(t, x)` on the
/// grid, or 0 when the sign is not uniform.
fn normalized_transversality(v: &[f64], f: &MultiMap, x: &[f64], times: &[f64]) -> f64 {
    let Some(vh) = linalg::normalized(v) else { return 0.0 };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in times {
        for y in extreme_points(&f.value(t, x)) {
            let r = norm(&y);
            let q = if r > 0.0 { dot(&vh, &y) / r } else { 0.0 };
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        -hi
    } else {
        0.0
    }
}

pub(crate) fn resolve_bounding(
    k: &ConstraintSet,
    source: &BoundingSource,
    x: &[f64],
    f: &MultiMap,
    cfg: &CheckConfig,
) -> Result<Bounding> {
    match source {
        BoundingSource::Representation => Ok(Bounding { function: k.rep.clone(), eps: None, delta: None }),
        BoundingSource::Functions(map) => {
            let function =
                map(x).ok_or_else(|| Error::Argument(format!("no bounding function supplied for the point {x:?}")))?;
            check_dim(k.dim(), function.dim)?;
            Ok(Bounding { function, eps: None, delta: None })
        }
        BoundingSource::Normals(normals) => {
            let v = normals(x);
            check_dim(k.dim(), v.len())?;
            let m = normalized_transversality(&v, f, x, &cfg.closed_grid(f.horizon));
            let eps = 0.5 * m * norm(&v);
            let mut delta = None;
            let mut d = LOCAL_RADIUS;
            while d >= 1e-4 {
                if geometry::regular_normal_ratio(k, x, &v, d, 400, cfg.seed).is_ok_and(|r| r <= 0.5 * m) {
                    delta = Some(d);
                    break;
                }
                d *= 0.5;
            }
            Ok(Bounding { function: normal_bounding_function(x, &v, eps)?, eps: Some(eps), delta })
        }
    }
}

/// Points of K within `radius` of `x`, drawn uniformly and pulled onto K.
fn local_points(k: &ConstraintSet, x: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .filter_map(|_| {
            let y = linalg::random_in_ball(&mut rng, x, radius);
            let z = k.pull_into(&y, 0.0)?;
            (linalg::dist(&z, x) <= radius).then_some(z)
        })
        .collect()
}

fn invertible(c: &[Vec<f64>], n: usize) -> Result<()> {
    check_dim(n, c.len())?;
    for row in c {
        check_dim(n, row.len())?;
    }
    let s = linalg::to_dmatrix(c).singular_values();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if !(smin > 1e-12 * smax.max(1e-300)) {
        return Err(Error::Argument("C must be invertible".into()));
    }
    Ok(())
}

/// Whether `C^j x` stays on bd K for `j = 1..ORBIT_CAP`, stopping early when
/// the orbit closes.
fn invariance_entry(k: &ConstraintSet, c: &[Vec<f64>], samples: &[Vec<f64>], tol: f64) -> ConditionEntry {
    let depth = depth_function(k);
    let mut outs = Vec::new();
    let mut open_orbits = 0;
    for x in samples {
        let mut y = x.clone();
        let mut worst: f64 = 0.0;
        let mut status = Status::Uncertain;
        for _ in 0..ORBIT_CAP {
            y = linalg::mat_vec(c, &y);
            let gap = if depth.in_domain(&y) { depth.value(&y).abs() } else { f64::INFINITY };
            worst = worst.max(gap);
            if gap > tol.max(geometry::boundary_tol(&y)) {
                status = Status::Fail;
                break;
            }
            if linalg::dist(&y, x) <= tol {
                status = Status::Pass;
                break;
            }
        }
        if status == Status::Uncertain {
            open_orbits += 1;
        }
        outs.push(SampleOutcome { point: x.clone(), status, value: worst });
    }
    let worst = outs.iter().map(|s| s.value).fold(0.0, f64::max);
    let mut e = ConditionEntry::graded("boundary_invariance", worst, tol - worst, true)
        .with_note("largest distance of C^j x from bd K along sampled orbits");
    e.witness = outs.iter().find(|s| s.status == Status::Fail).map(|s| Witness {
        point: s.point.clone(),
        t: None,
        value: s.value,
    });
    if outs.iter().any(|s| s.status == Status::Fail) {
        e.status = Status::Fail;
    } else if open_orbits > 0 {
        e.status = Status::Uncertain;
        e.note = Some(format!(
            "{open_orbits} sampled orbits did not close within {ORBIT_CAP} iterates; invariance holds on those orbit segments only"
        ));
    }
    e.with_samples(outs)
}

/// Section `ker(id − C) ∩ K` in kernel coordinates, when K is a ball.
fn kernel_region(k: &ConstraintSet, basis: &[Vec<f64>]) -> Option<Region> {
    let (center, radius) = match &k.kind {
        SetKind::Ball { center, radius } => (center.clone(), *radius),
        SetKind::Thickened { base, eps } => match base.as_ref() {
            SetKind::Ball { center, radius } => (center.clone(), radius + eps),
            _ => return None,
        },
        _ => return None,
    };
    let zc: Vec<f64> = basis.iter().map(|q| dot(q, &center)).collect();
    let mut back = vec![0.0; center.len()];
    for (z, q) in zc.iter().zip(basis) {
        back = linalg::axpy(&back, *z, q);
    }
    let off = linalg::dist(&back, &center);
    let r2 = radius * radius - off * off;
    (r2 > 0.0).then(|| Region::Ball { center: zc, radius: r2.sqrt() })
}

fn lift(z: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut x = vec![0.0; basis[0].len()];
    for (zi, q) in z.iter().zip(basis) {
        x = linalg::axpy(&x, *zi, q);
    }
    x
}

/// Trapezoid rule for `∫₀ᵀ centroid F(t, x) dt`.
pub fn aumann_centroid(f: &MultiMap, x: &[f64], nodes: usize) -> Vec<f64> {
    let m = nodes.max(2);
    let h = f.horizon / (m - 1) as f64;
    let mut acc = vec![0.0; f.dim];
    for i in 0..m {
        let w = if i == 0 || i == m - 1 { 0.5 * h } else { h };
        acc = linalg::axpy(&acc, w, &f.value(i as f64 * h, x).centroid());
    }
    acc
}

/// Trivial kernel with `0 ∈ K`, or separation of the Aumann integral from
/// `im(id − C)` on `ker(id − C) ∩ bd K` plus a nonzero reduced degree.
fn kernel_entries(
    k: &ConstraintSet,
    c: &[Vec<f64>],
    f: &MultiMap,
    cfg: &CheckConfig,
    report: &mut ConditionReport,
) -> Result<()> {
    let n = k.dim();
    let split = degree::floquet_split(c)?;
    let m = linalg::to_dmatrix(&linalg::identity(n)) - linalg::to_dmatrix(c);
    let s = m.singular_values();
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let depth = depth_function(k);
    let zero = vec![0.0; n];
    let zero_inside = depth.in_domain(&zero) && depth.value(&zero) < 0.0;
    let trivial = split.kernel_basis.is_empty();
    let v_margin = if trivial && zero_inside { smin } else { -1.0 };
    report.push(ConditionEntry::graded("trivial_kernel", smin, v_margin, false).with_note(format!(
        "σ_min(id − C) = {smin:e}; kernel dimension {}; 0 in K: {zero_inside}",
        split.kernel_basis.len()
    )));
    let mut vi = None;
    if !trivial {
        let basis = &split.kernel_basis;
        match kernel_region(k, basis) {
            None => report.push(ConditionEntry::structural(
                "kernel_separation",
                Status::Uncertain,
                false,
                "the section ker(id − C) ∩ K is only available for balls",
            )),
            Some(region) => {
                let count = if basis.len() == 1 { 2 } else { cfg.boundary_samples.max(8) };
                let mut outs = Vec::new();
                let mut witness = None;
                for z in region.boundary_samples(count) {
                    let x0 = lift(&z, basis);
                    let sep = multimap::aumann_separated(f, &x0, &split.image_basis, 64)?;
                    if witness.is_none() {
                        witness = sep.witness.clone().map(|p| Witness { point: p, t: None, value: sep.margin });
                    }
                    outs.push(SampleOutcome {
                        point: x0,
                        status: if sep.separated { Status::Pass } else { Status::Fail },
                        value: sep.margin,
                    });
                }
                let worst = outs.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
                let sep_ok = outs.iter().all(|s| s.status == Status::Pass);
                let mut e = ConditionEntry::graded("kernel_separation", worst, worst, false)
                    .with_note("Aumann integral of F at kernel boundary points versus im(id − C)")
                    .with_samples(outs);
                e.witness = witness;
                report.push(e);
                let fm = f.clone();
                let map: Arc<degree::MapFn> = Arc::new(move |x: &[f64]| aumann_centroid(&fm, x, 129));
                let d = degree::kernel_degree(map, basis, &region, cfg.degree_resolution);
                let deg_ok = match &d {
                    Ok(d) => {
                        report.push(
                            ConditionEntry::graded(
                                "reduced_degree",
                                d.degree as f64,
                                d.degree.unsigned_abs() as f64,
                                false,
                            )
                            .with_note(format!("degree of the projected Aumann centroid map by {:?}", d.method)),
                        );
                        d.degree != 0
                    }
                    Err(e) => {
                        report.push(ConditionEntry::structural("reduced_degree", Status::Fail, false, &e.to_string()));
                        false
                    }
                };
                vi = Some(sep_ok && deg_ok);
            }
        }
    }
    let v_ok = trivial && zero_inside;
    let status = match (v_ok, vi) {
        (true, _) | (_, Some(true)) => Status::Pass,
        (false, Some(false)) => Status::Fail,
        (false, None) if trivial => Status::Fail,
        (false, None) => Status::Uncertain,
    };
    report.push(ConditionEntry::structural(
        "kernel_or_separation",
        status,
        true,
        "trivial kernel with 0 in K, or separation plus nonzero reduced degree",
    ));
    Ok(())
}

/// Floquet certifier for open K with bounding functions from `source`.
pub fn check_floquet(
    k: &ConstraintSet,
    c: &[Vec<f64>],
    f: &MultiMap,
    source: &BoundingSource,
    cfg: &CheckConfig,
) -> Result<ConditionReport> {
    let n = k.dim();
    check_dim(n, f.dim)?;
    k.require_interior("the Floquet certifier")?;
    invertible(c, n)?;
    let samples = boundary_points(k, cfg)?;
    let times = cfg.closed_grid(f.horizon);
    let tol = cfg.tol;
    let mut report = ConditionReport::new("floquet");
    report.push(invariance_entry(k, c, &samples, tol));

    let (mut cont, mut zero_at, mut trans, mut prod, mut dini) = (vec![], vec![], vec![], vec![], vec![]);
    let dini_grid: Vec<f64> = (3..=7).map(|e| 10f64.powi(-e)).collect();
    for (i, x) in samples.iter().enumerate() {
        let bx = resolve_bounding(k, source, x, f, cfg)?;
        let fx = &bx.function;
        let radius = bx.delta.unwrap_or(LOCAL_RADIUS);
        let near = local_points(k, x, radius, 200, cfg.seed ^ i as u64);
        let top = near.iter().map(|y| fx.value(y)).fold(f64::NEG_INFINITY, f64::max).max(fx.value(x));
        cont.push(SampleOutcome { point: x.clone(), status: status_of(top <= tol), value: top });
        let v0 = fx.eval(x)?.abs();
        zero_at.push(SampleOutcome { point: x.clone(), status: status_of(v0 <= tol), value: v0 });

        let bundle = nonsmooth::clarke_gradient(fx, x, &cfg.clarke)?;
        let values: Vec<ConvexValue> = times.iter().map(|&t| f.value(t, x)).collect();
        let (lo, hi) = min_inner_sign(&bundle_value(&bundle), &values);
        let st = signed_transversality(lo, hi);
        trans.push(SampleOutcome { point: x.clone(), status: status_of(st.abs() > tol), value: st });

        let m1 = extreme_points(&f.value(0.0, x)).iter().map(|y| bundle.support(y)).fold(f64::NEG_INFINITY, f64::max);
        let cx = linalg::mat_vec(c, x);
        let bcx = resolve_bounding(k, source, &cx, f, cfg)?;
        let bundle_cx = nonsmooth::clarke_gradient(&bcx.function, &cx, &cfg.clarke)?;
        let m2 = extreme_points(&f.value(f.horizon, &cx))
            .iter()
            .map(|z| bundle_cx.support(&linalg::scale(z, -1.0)))
            .fold(f64::NEG_INFINITY, f64::max);
        let p = m1 * m2;
        prod.push(SampleOutcome { point: x.clone(), status: status_of(p < -tol), value: p });
        let mut d1 = f64::NEG_INFINITY;
        for y in extreme_points(&f.value(0.0, x)) {
            d1 = d1.max(nonsmooth::dini_upper(fx, x, &y, &dini_grid)?);
        }
        let pd = d1 * m2;
        dini.push(SampleOutcome { point: x.clone(), status: status_of(pd < -tol), value: pd });
    }
    let max_of = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let witness_max = |o: &[SampleOutcome]| {
        o.iter().max_by(|a, b| a.value.total_cmp(&b.value)).map(|s| Witness {
            point: s.point.clone(),
            t: None,
            value: s.value,
        })
    };
    let c_top = max_of(&cont);
    report.push(
        ConditionEntry::graded("local_containment", c_top, tol - c_top, true)
            .with_witness(witness_max(&cont))
            .with_note("max f_x over sampled points of K near x")
            .with_samples(cont),
    );
    let z_top = max_of(&zero_at);
    report.push(
        ConditionEntry::graded("vanishes_at_point", z_top, tol - z_top, true)
            .with_witness(witness_max(&zero_at))
            .with_samples(zero_at),
    );
    let t_min = trans.iter().map(|s| s.value.abs()).fold(f64::INFINITY, f64::min);
    let t_wit = trans.iter().min_by(|a, b| a.value.abs().total_cmp(&b.value.abs())).map(|s| Witness {
        point: s.point.clone(),
        t: None,
        value: s.value,
    });
    report.push(
        ConditionEntry::graded("transversality", t_min, t_min - tol, true)
            .with_witness(t_wit)
            .with_note("per sample: the extreme of ⟨∂f_x(x), F(t, x)⟩ nearest zero when its sign is uniform, else 0")
            .with_samples(trans),
    );
    let p_top = max_of(&prod);
    report.push(
        ConditionEntry::graded("endpoint_sign", p_top, -p_top - tol, true)
            .with_witness(witness_max(&prod))
            .with_note("max f_x°(x; F(0, x)) · max f_Cx°(Cx; −F(T, Cx))")
            .with_samples(prod),
    );
    let d_top = max_of(&dini);
    report.push(
        ConditionEntry::graded("endpoint_sign_dini", d_top, -d_top - tol, false)
            .with_note("same product with the upper Dini derivative in the first factor")
            .with_samples(dini),
    );
    kernel_entries(k, c, f, cfg, &mut report)?;
    Ok(report.finish())
}

fn status_of(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Conditions phrased through regular normals `v(x)`.
pub fn check_normal_conditions(
    k: &ConstraintSet,
    c: &[Vec<f64>],
    f: &MultiMap,
    normals: Arc<NormalFn>,
    cfg: &CheckConfig,
) -> Result<ConditionReport> {
    let n = k.dim();
    check_dim(n, f.dim)?;
    k.require_interior("the normal-vector certifier")?;
    invertible(c, n)?;
    let samples = boundary_points(k, cfg)?;
    for (i, x) in samples.iter().enumerate() {
        let v = normals(x);
        check_dim(n, v.len())?;
        if !geometry::regular_normal_test(k, x, &v, 0.1, 0.05, 400, cfg.seed ^ i as u64)? {
            return Err(Error::Prerequisite(format!("v({x:?}) = {v:?} is not certified as a regular normal")));
        }
    }
    let times = cfg.closed_grid(f.horizon);
    let tol = cfg.tol;
    let mut report = ConditionReport::new("normal");
    report.push(invariance_entry(k, c, &samples, tol));
    let (mut trans, mut prod, mut polar) = (vec![], vec![], vec![]);
    for x in &samples {
        let v = ConvexValue::point(normals(x));
        let values: Vec<ConvexValue> = times.iter().map(|&t| f.value(t, x)).collect();
        let (lo, hi) = min_inner_sign(&v, &values);
        let st = signed_transversality(lo, hi);
        trans.push(SampleOutcome { point: x.clone(), status: status_of(st.abs() > tol), value: st });
        polar.push(SampleOutcome { point: x.clone(), status: status_of(lo > tol), value: lo });
        let (lo0, _) = multimap::inner_product_bounds(&v, &f.value(0.0, x));
        let cx = linalg::mat_vec(c, x);
        let (lo1, _) = multimap::inner_product_bounds(&ConvexValue::point(normals(&cx)), &f.value(f.horizon, &cx));
        let p = lo0 * lo1;
        prod.push(SampleOutcome { point: x.clone(), status: status_of(p > tol), value: p });
    }
    let t_min = trans.iter().map(|s| s.value.abs()).fold(f64::INFINITY, f64::min);
    report.push(
        ConditionEntry::graded("normal_transversality", t_min, t_min - tol, true)
            .with_note("⟨v(x), F(t, x)⟩ keeps one sign over the time grid")
            .with_samples(trans),
    );
    let p_min = prod.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    report.push(
        ConditionEntry::graded("endpoint_product", p_min, p_min - tol, true)
            .with_note("min⟨v(x), F(0, x)⟩ · min⟨v(Cx), F(T, Cx)⟩")
            .with_samples(prod),
    );
    let l_min = polar.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    report.push(
        ConditionEntry::graded("polar_exclusion", l_min, l_min - tol, false)
            .with_note("F(t, x) misses the half-space {v(x)}°")
            .with_samples(polar),
    );
    kernel_entries(k, c, f, cfg, &mut report)?;
    Ok(report.finish())
}
