//! Certifiers for the endpoint, Borsuk-type, thin-set antiperiodic and ball
//! theorems, and the bound-set verifier.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::boundary::{apply_boundary, constant_trajectory, BoundaryOperator};
use super::report::{CheckConfig, ConditionEntry, ConditionReport, SampleOutcome, Status, Witness};
use crate::degree::{self, ContinuousMap, Region};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, ConstraintSet, ProbeOptions, RegularityClass, RepKind, SetKind};
use crate::integrate::{self, IntegratorConfig, SelectionMode};
use crate::linalg::{self, norm};
use crate::multimap::{self, ConvexValue, MultiMap, MultiMapKind, TimePoly};
use crate::nonsmooth::{self, GradientBundle, LipschitzFunction};

pub type BoundingFn = dyn Fn(&[f64]) -> Option<LipschitzFunction> + Send + Sync;
pub type NormalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Where the bounding function `f_x` of a boundary point comes from.
#[derive(Clone)]
pub enum BoundingSource {
    /// The representing function of K, for every point.
    Representation,
    /// A user map `x ↦ f_x`; `None` means no function is known for `x`.
    Functions(Arc<BoundingFn>),
    /// `f_x(y) = ⟨v(x), y − x⟩ − ε|y − x|` built from regular normals `v`.
    Normals(Arc<NormalFn>),
}

impl std::fmt::Debug for BoundingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundingSource::Representation => "Representation",
            BoundingSource::Functions(_) => "Functions",
            BoundingSource::Normals(_) => "Normals",
        })
    }
}

pub(crate) fn boundary_points(k: &ConstraintSet, cfg: &CheckConfig) -> Result<Vec<Vec<f64>>> {
    let pts = match &cfg.points {
        Some(p) => p.clone(),
        None => geometry::sample_boundary(k, cfg.boundary_samples, cfg.seed)?,
    };
    if pts.is_empty() {
        return Err(Error::Argument("no boundary samples".into()));
    }
    for p in &pts {
        check_dim(k.dim(), p.len())?;
    }
    Ok(pts)
}

/// Signed depth used to decide how far a point is from bd K. A distance
/// representation vanishes on all of K, so canonical kinds use `Δ_K`.
pub(crate) fn depth_function(k: &ConstraintSet) -> LipschitzFunction {
    match (k.rep_kind, geometry::delta_function(&k.kind)) {
        (RepKind::Distance, Ok(d)) => d,
        _ => k.rep.clone(),
    }
}

pub(crate) fn extreme_points(v: &ConvexValue) -> Vec<Vec<f64>> {
    let n = v.dim();
    v.expanded(if n == 2 { 64 } else { 16 * n + 32 })
}

pub(crate) fn bundle_value(b: &GradientBundle) -> ConvexValue {
    ConvexValue { vertices: b.vectors.clone(), ball_radius: b.ball_radius }
}

/// Worst sample first, as a witness.
fn worst_witness(outcomes: &[SampleOutcome], lower_is_worse: bool) -> Option<Witness> {
    let pick = outcomes.iter().min_by(|a, b| {
        if lower_is_worse {
            a.value.total_cmp(&b.value)
        } else {
            b.value.total_cmp(&a.value)
        }
    })?;
    Some(Witness { point: pick.point.clone(), t: None, value: pick.value })
}

fn sample_status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// The ball `{x : |x − c| ≤ r}` that K is, if it is one.
fn ball_of(k: &ConstraintSet) -> Option<(Vec<f64>, f64)> {
    match &k.kind {
        SetKind::Ball { center, radius } => Some((center.clone(), *radius)),
        SetKind::Thickened { base, eps } => match (base.as_ref(), k.rep_kind) {
            (SetKind::Ball { center, radius }, RepKind::Distance | RepKind::Signed) => {
                Some((center.clone(), radius + eps))
            }
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn degree_region(k: &ConstraintSet) -> Option<Region> {
    if let Some((center, radius)) = ball_of(k) {
        return Some(Region::Ball { center, radius });
    }
    if let SetKind::Polytope { normals, offsets } = &k.kind {
        // Axis-aligned boxes only.
        let n = k.dim();
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for (a, b) in normals.iter().zip(offsets) {
            let nz: Vec<usize> = (0..n).filter(|&i| a[i] != 0.0).collect();
            if nz.len() != 1 {
                return None;
            }
            let i = nz[0];
            if a[i] > 0.0 {
                hi[i] = hi[i].min(b / a[i]);
            } else {
                lo[i] = lo[i].max(b / a[i]);
            }
        }
        if lo.iter().chain(&hi).all(|v| v.is_finite()) {
            return Some(Region::Box { lo, hi });
        }
    }
    None
}

/// Endpoint theorem: tangency for `f` or `−f`, degree of `x ↦ g(x, x)` on
/// Int K, and the boundary equivalence `x(0) ∈ bd K ⇔ x(T) ∈ bd K`.
pub fn check_th1(k: &ConstraintSet, f: &MultiMap, g: &BoundaryOperator, cfg: &CheckConfig) -> Result<ConditionReport> {
    check_dim(k.dim(), f.dim)?;
    k.require_interior("the endpoint certifier")?;
    let n = k.dim();
    let samples = boundary_points(k, cfg)?;
    for x in &samples {
        let b = nonsmooth::clarke_gradient(&k.rep, x, &cfg.clarke)?;
        if b.min_norm() <= cfg.tol {
            return Err(Error::Prerequisite(format!(
                "K is not certified strongly regular: 0 lies within {:e} of the generalized gradient at {x:?}",
                b.min_norm()
            )));
        }
    }
    let times = cfg.closed_grid(f.horizon);
    let neg = k.rep.negated();
    let per: Vec<Result<(f64, f64)>> = samples
        .par_iter()
        .map(|x| {
            let mut mf = f64::INFINITY;
            let mut mn = f64::INFINITY;
            for &t in &times {
                mf = mf.min(-multimap::least_violating(f, &k.rep, t, x, &cfg.clarke)?.objective);
                mn = mn.min(-multimap::least_violating(f, &neg, t, x, &cfg.clarke)?.objective);
            }
            Ok((mf, mn))
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = ConditionReport::new("th1");
    let outcome =
        |i: usize, v: f64| SampleOutcome { point: samples[i].clone(), status: sample_status(v >= cfg.tol), value: v };
    let f_side: Vec<SampleOutcome> = per.iter().enumerate().map(|(i, p)| outcome(i, p.0)).collect();
    let n_side: Vec<SampleOutcome> = per.iter().enumerate().map(|(i, p)| outcome(i, p.1)).collect();
    let both: Vec<SampleOutcome> = per.iter().enumerate().map(|(i, p)| outcome(i, p.0.max(p.1))).collect();
    let worst = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let (wf, wn, wb) = (worst(&f_side), worst(&n_side), worst(&both));
    report.push(
        ConditionEntry::graded("tangency_f", wf, wf - cfg.tol, false)
            .with_witness(worst_witness(&f_side, true))
            .with_note("min over samples and times of −f°(x; v) at the least violating v ∈ F(t, x)"),
    );
    report.push(
        ConditionEntry::graded("tangency_neg_f", wn, wn - cfg.tol, false)
            .with_witness(worst_witness(&n_side, true))
            .with_note("same for −f"),
    );
    report.push(
        ConditionEntry::graded("tangency", wb, wb - cfg.tol, true)
            .with_witness(worst_witness(&both, true))
            .with_samples(both),
    );

    match (g.endpoint_form(n), degree_region(k)) {
        (Some((a, b, c)), Some(region)) => {
            let m: Vec<Vec<f64>> = a.iter().zip(&b).map(|(ra, rb)| linalg::add(ra, rb)).collect();
            let map = ContinuousMap::Linear { matrix: m.clone(), offset: Some(c.clone()) };
            let gap = samples
                .iter()
                .map(|x| (norm(&map.apply(x)), x.clone()))
                .min_by(|p, q| p.0.total_cmp(&q.0))
                .expect("samples are nonempty");
            report.push(
                ConditionEntry::graded("zero_free_boundary", gap.0, gap.0 - cfg.tol, true)
                    .with_witness(Some(Witness { point: gap.1, t: None, value: gap.0 })),
            );
            match degree::brouwer_degree(&map, &region, &vec![0.0; n], cfg.degree_resolution) {
                Ok(d) => report.push(
                    ConditionEntry::graded("degree", d.degree as f64, d.degree.unsigned_abs() as f64, true)
                        .with_note(format!("deg(x ↦ g(x, x), Int K, 0) by {:?}", d.method)),
                ),
                Err(e) => report.push(ConditionEntry::structural("degree", Status::Fail, true, &e.to_string())),
            }
            let id = |x: &[f64]| x.to_vec();
            let gm = |x: &[f64]| map.apply(x);
            if let Ok(pb) = degree::poincare_bohl_check(&gm, &id, &samples, cfg.tol) {
                report.push(
                    ConditionEntry::graded("homotopy_to_identity", pb.worst_slack, pb.worst_slack - cfg.tol, false)
                        .with_witness(Some(Witness { point: pb.worst_point, t: None, value: pb.worst_slack }))
                        .with_note("Poincaré–Bohl slack of x ↦ g(x, x) against the identity on bd K"),
                );
            }
        }
        (None, _) => report.push(ConditionEntry::structural(
            "degree",
            Status::Uncertain,
            true,
            "boundary operator has no endpoint form g(x(0), x(T))",
        )),
        (_, None) => report.push(ConditionEntry::structural(
            "degree",
            Status::Uncertain,
            true,
            "degree region for this set kind is not available",
        )),
    }

    let equiv = match g {
        BoundaryOperator::Antiperiodic if k.symmetry.superlevels_symmetric => ConditionEntry::structural(
            "boundary_equivalence",
            Status::Pass,
            true,
            "antiperiodic with symmetric superlevel sets",
        ),
        BoundaryOperator::Periodic => ConditionEntry::structural(
            "boundary_equivalence",
            Status::Pass,
            true,
            "x(0) = x(T) makes the equivalence trivial",
        ),
        _ => ConditionEntry::structural(
            "boundary_equivalence",
            Status::Uncertain,
            true,
            "not decidable by sampling without a structural symmetry",
        ),
    };
    report.push(equiv);
    Ok(report.finish())
}

/// Borsuk-type certifier on symmetric K with an even representation.
pub fn check_borsuk(k: &ConstraintSet, f: &MultiMap, cfg: &CheckConfig) -> Result<ConditionReport> {
    check_dim(k.dim(), f.dim)?;
    if !(k.symmetry.set_symmetric && k.symmetry.rep_even) {
        return Err(Error::Prerequisite("Borsuk certifier needs a symmetric set with an even representation".into()));
    }
    let samples = boundary_points(k, cfg)?;
    let times = cfg.closed_grid(f.horizon);
    let per: Vec<Result<[f64; 4]>> = samples.par_iter().map(|x| borsuk_point(k, f, x, &times, cfg)).collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let tol = cfg.tol;
    let gap = |a: f64, b: f64| (-a).min(b) - tol;
    let mut direct = Vec::new();
    let mut mirrored = Vec::new();
    let mut either = Vec::new();
    for (x, q) in samples.iter().zip(&per) {
        let (d, m) = (gap(q[0], q[1]), gap(q[2], q[3]));
        direct.push(SampleOutcome { point: x.clone(), status: sample_status(d > 0.0), value: d + tol });
        mirrored.push(SampleOutcome { point: x.clone(), status: sample_status(m > 0.0), value: m + tol });
        either.push(SampleOutcome { point: x.clone(), status: sample_status(d.max(m) > 0.0), value: d.max(m) + tol });
    }
    let worst = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let mut report = ConditionReport::new("borsuk");
    let range = |i: usize, j: usize| {
        let lo = per.iter().map(|q| q[i]).fold(f64::NEG_INFINITY, f64::max);
        let hi = per.iter().map(|q| q[j]).fold(f64::INFINITY, f64::min);
        format!("worst A = {lo}, worst B = {hi}")
    };
    let (wd, wm, we) = (worst(&direct), worst(&mirrored), worst(&either));
    report.push(
        ConditionEntry::graded("gap_direct", wd, wd - tol, false)
            .with_witness(worst_witness(&direct, true))
            .with_note(format!("A = max f°(x; F(t,x)) < 0 < B = min f_○(x; F(t,−x)); {}", range(0, 1)))
            .with_samples(direct),
    );
    report.push(
        ConditionEntry::graded("gap_mirrored", wm, wm - tol, false)
            .with_witness(worst_witness(&mirrored, true))
            .with_note(format!("roles of x and −x swapped; {}", range(2, 3)))
            .with_samples(mirrored),
    );
    report.push(
        ConditionEntry::graded("borsuk", we, we - tol, true)
            .with_witness(worst_witness(&either, true))
            .with_note("each sample satisfies the direct or the mirrored gap")
            .with_samples(either),
    );
    Ok(report.finish())
}

/// `[A, B, A′, B′]` at `x`: `A = max f°(x; F(t, x))`, `B = min f_○(x; F(t, −x))`
/// over the time grid, and the mirrored pair with `x` and `−x` swapped.
fn borsuk_point(k: &ConstraintSet, f: &MultiMap, x: &[f64], times: &[f64], cfg: &CheckConfig) -> Result<[f64; 4]> {
    let b = nonsmooth::clarke_gradient(&k.rep, x, &cfg.clarke)?;
    let mx = linalg::scale(x, -1.0);
    let (mut a, mut bl, mut a2, mut b2) = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for &t in times {
        for z in extreme_points(&f.value(t, x)) {
            a = a.max(b.support(&z));
            b2 = b2.min(b.min_support(&z));
        }
        for u in extreme_points(&f.value(t, &mx)) {
            bl = bl.min(b.min_support(&u));
            a2 = a2.max(b.support(&u));
        }
    }
    Ok([a, bl, a2, b2])
}

/// The Borsuk quantities `(A, B)` at a single point.
pub fn borsuk_quantities(k: &ConstraintSet, f: &MultiMap, x: &[f64], cfg: &CheckConfig) -> Result<(f64, f64)> {
    check_dim(k.dim(), x.len())?;
    let q = borsuk_point(k, f, x, &cfg.closed_grid(f.horizon), cfg)?;
    Ok((q[0], q[1]))
}

/// Per-sample Liminf certificate: the smallest, over candidates
/// `v ∈ F(t, x)`, of the worst excess `dist(v, ∂f(y)°) − 10·r·|v|` over
/// outer probes at each radius, then the worst over the time grid.
fn liminf_excess(
    k: &ConstraintSet,
    f: &MultiMap,
    x: &[f64],
    times: &[f64],
    radii: &[f64],
    negate: bool,
    opts: &ProbeOptions,
) -> Result<f64> {
    let mut worst_t = f64::NEG_INFINITY;
    for &t in times {
        let mut best_v = f64::INFINITY;
        for v in extreme_points(&f.value(t, x)) {
            let mut worst_r = f64::NEG_INFINITY;
            for &r in radii {
                let (d, _) = geometry::liminf_polar_distance(&k.rep, x, &v, r, negate, opts)?;
                worst_r = worst_r.max(d - 10.0 * r * norm(&v));
            }
            best_v = best_v.min(worst_r);
        }
        worst_t = worst_t.max(best_v);
    }
    Ok(worst_t)
}

/// Antiperiodic certifier for compact regular sets, possibly without
/// interior: Liminf tangency for `f` or `−f`, symmetry of the thickened
/// superlevels, and `0 ∈ K`.
pub fn check_ant(k: &ConstraintSet, f: &MultiMap, cfg: &CheckConfig) -> Result<ConditionReport> {
    check_dim(k.dim(), f.dim)?;
    let samples = boundary_points(k, cfg)?;
    let radii = [1e-2, 1e-3];
    let times = cfg.closed_grid(f.horizon);
    let mut report = ConditionReport::new("ant");

    let reg = geometry::classify_regularity(k, &samples, &radii, 0.5)?;
    let regular = reg.overall >= RegularityClass::Regular;
    report.push(
        ConditionEntry::structural(
            "regularity",
            sample_status(regular),
            true,
            &format!("overall class {:?}", reg.overall),
        )
        .with_samples(
            reg.points
                .iter()
                .map(|p| SampleOutcome {
                    point: p.point.clone(),
                    status: sample_status(p.class >= RegularityClass::Regular),
                    value: p.collar_infimum,
                })
                .collect(),
        ),
    );
    let origin = vec![0.0; k.dim()];
    let f0 = k.value(&origin)?;
    report.push(ConditionEntry::graded("contains_origin", f0, cfg.tol - f0, true));
    let sym = k.symmetry.superlevels_symmetric || k.symmetry.rep_even;
    report.push(ConditionEntry::structural(
        "symmetric_superlevels",
        if sym { Status::Pass } else { Status::Uncertain },
        true,
        if sym { "declared by the set's symmetry flags" } else { "no structural symmetry declared" },
    ));

    let opts = ProbeOptions { seed: cfg.seed, ..ProbeOptions::default() };
    let per: Vec<(Option<f64>, Option<f64>)> = samples
        .par_iter()
        .map(|x| {
            (
                liminf_excess(k, f, x, &times, &radii, false, &opts).ok(),
                liminf_excess(k, f, x, &times, &radii, true, &opts).ok(),
            )
        })
        .collect();
    let build = |idx: usize| -> Vec<SampleOutcome> {
        samples
            .iter()
            .zip(&per)
            .map(|(x, p)| {
                let v = if idx == 0 { p.0 } else { p.1 };
                match v {
                    Some(e) => SampleOutcome { point: x.clone(), status: sample_status(e <= cfg.tol), value: e },
                    None => SampleOutcome { point: x.clone(), status: Status::Uncertain, value: f64::NAN },
                }
            })
            .collect()
    };
    let mut sides = Vec::new();
    for (idx, name) in [(0, "liminf_tangency"), (1, "liminf_tangency_neg_f")] {
        let outs = build(idx);
        let worst = outs.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
        let status = if outs.iter().any(|s| s.status == Status::Fail) {
            Status::Fail
        } else if outs.iter().all(|s| s.status == Status::Pass) {
            Status::Pass
        } else {
            Status::Uncertain
        };
        let mut e = ConditionEntry::graded(name, worst, cfg.tol - worst, false)
            .with_witness(worst_witness(&outs, false))
            .with_note("worst excess of dist(v, ∂f(y)°) over 10·r·|v| at r ∈ {1e-2, 1e-3}");
        if status == Status::Uncertain {
            e.status = Status::Uncertain;
            e.margin = None;
        }
        sides.push((status, worst));
        report.push(e.with_samples(outs));
    }
    let best = if sides[0].1 <= sides[1].1 { sides[0] } else { sides[1] };
    let combined = if sides.iter().any(|s| s.0 == Status::Pass) {
        Status::Pass
    } else if sides.iter().all(|s| s.0 == Status::Fail) {
        Status::Fail
    } else {
        Status::Uncertain
    };
    let mut e = ConditionEntry::graded("tangency", best.1, cfg.tol - best.1, true);
    if combined != Status::Fail {
        e.status = combined;
    }
    if combined == Status::Pass {
        e.margin =
            Some(cfg.tol - sides.iter().filter(|s| s.0 == Status::Pass).map(|s| s.1).fold(f64::INFINITY, f64::min));
    }
    let (pos, neg) = (build(0), build(1));
    let per_sample = pos
        .into_iter()
        .zip(neg)
        .map(|(a, b)| {
            let status = if a.status == Status::Pass || b.status == Status::Pass {
                Status::Pass
            } else if a.status == Status::Fail && b.status == Status::Fail {
                Status::Fail
            } else {
                Status::Uncertain
            };
            SampleOutcome { point: a.point, status, value: a.value.min(b.value) }
        })
        .collect();
    report.push(e.with_note("the certificate for f or the one for −f holds at every sample").with_samples(per_sample));
    Ok(report.finish())
}

/// `|g(x)|` bound behind the first ball condition, decided per operator.
fn ball_growth_condition(g: &BoundaryOperator, radius: f64, eps0: f64, tol: f64) -> ConditionEntry {
    let name = "norm_bound_along_solutions";
    match g {
        BoundaryOperator::Antiperiodic | BoundaryOperator::Periodic => {
            ConditionEntry::structural(name, Status::Pass, true, "|g(x)| = |x(T)|")
        }
        BoundaryOperator::Multipoint { .. } => {
            let s = g.multipoint_summary().expect("multipoint");
            if s.within_unit {
                ConditionEntry::structural(name, Status::Pass, true, "Σ|αᵢ| ≤ 1 bounds |g(x)| by some |x(tᵢ)|")
            } else {
                ConditionEntry::structural(name, Status::Uncertain, true, "Σ|αᵢ| > 1")
            }
        }
        BoundaryOperator::MeanValue { map } => {
            let n = map.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_616e);
            let center = vec![0.0; n];
            let worst = (0..2000)
                .map(|_| {
                    let y = linalg::random_in_ball(&mut rng, &center, radius + eps0);
                    norm(&map.apply(&y)) - norm(&y)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if worst <= tol {
                ConditionEntry::graded(name, worst, tol - worst, true).with_note("sampled |h(y)| ≤ |y| bounds the mean")
            } else {
                ConditionEntry::structural(name, Status::Uncertain, true, &format!("|h(y)| exceeds |y| by {worst:e}"))
            }
        }
        BoundaryOperator::Floquet { matrix } => {
            let inv = linalg::to_dmatrix(matrix).try_inverse();
            match inv.map(|m| m.singular_values().iter().cloned().fold(0.0, f64::max)) {
                Some(s) if s <= 1.0 + tol => {
                    ConditionEntry::structural(name, Status::Pass, true, &format!("‖C⁻¹‖ = {s} ≤ 1"))
                }
                _ => ConditionEntry::structural(name, Status::Uncertain, true, "‖C⁻¹‖ > 1"),
            }
        }
        _ => ConditionEntry::structural(name, Status::Uncertain, true, "no structural bound for this operator"),
    }
}

/// Ball certifier on `K = D(0, r)`: half-space tangency `F ∩ {x}°` (or
/// `{−x}°`) on the sphere, and conditions on the operator over the annulus
/// `B(0, r + ε₀) \ D(0, r)`, with `ε₀ = 0.1·r`.
pub fn check_ball(k: &ConstraintSet, f: &MultiMap, g: &BoundaryOperator, cfg: &CheckConfig) -> Result<ConditionReport> {
    check_dim(k.dim(), f.dim)?;
    let (center, radius) = ball_of(k).ok_or_else(|| Error::Prerequisite("ball certifier needs K = D(0, r)".into()))?;
    if norm(&center) > 1e-12 {
        return Err(Error::Prerequisite("ball certifier needs a ball centered at the origin".into()));
    }
    let n = k.dim();
    g.validate(n, f.horizon)?;
    let samples = boundary_points(k, cfg)?;
    let times = cfg.closed_grid(f.horizon);
    let mut inward = Vec::new();
    let mut outward = Vec::new();
    for x in &samples {
        let xh = linalg::normalized(x).ok_or_else(|| Error::Argument("boundary sample at the origin".into()))?;
        let mxh = linalg::scale(&xh, -1.0);
        let (mut a, mut b) = (f64::INFINITY, f64::INFINITY);
        for &t in &times {
            a = a.min(f.support(t, x, &mxh).value);
            b = b.min(f.support(t, x, &xh).value);
        }
        inward.push(SampleOutcome { point: x.clone(), status: sample_status(a + cfg.tol > 0.0), value: a });
        outward.push(SampleOutcome { point: x.clone(), status: sample_status(b + cfg.tol > 0.0), value: b });
    }
    let worst = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let (wa, wb) = (worst(&inward), worst(&outward));
    let mut report = ConditionReport::new("ball");
    report.push(
        ConditionEntry::graded("tangency_inward", wa, wa + cfg.tol, false)
            .with_witness(worst_witness(&inward, true))
            .with_note("min over the sphere and time grid of −min⟨x̂, F(t, x)⟩")
            .with_samples(inward),
    );
    report.push(
        ConditionEntry::graded("tangency_outward", wb, wb + cfg.tol, false)
            .with_witness(worst_witness(&outward, true))
            .with_note("min over the sphere and time grid of max⟨x̂, F(t, x)⟩")
            .with_samples(outward),
    );
    let wt = wa.max(wb);
    report.push(ConditionEntry::graded("tangency", wt, wt + cfg.tol, true));

    let eps0 = 0.1 * radius;
    report.push(ball_growth_condition(g, radius, eps0, cfg.tol));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa22);
    let mut shrink = (f64::INFINITY, Vec::new());
    let mut fixed = (f64::INFINITY, Vec::new());
    for _ in 0..(16 * cfg.boundary_samples.max(8)) {
        let u = linalg::random_unit(&mut rng, n);
        let s = radius + eps0 * (1e-3 + (1.0 - 1e-3) * rand::Rng::random::<f64>(&mut rng));
        let y = linalg::scale(&u, s);
        let gy = apply_boundary(g, &constant_trajectory(&y, f.horizon))?;
        let a = norm(&y) - norm(&gy);
        if a < shrink.0 {
            shrink = (a, y.clone());
        }
        let d = linalg::dist(&gy, &y);
        if d < fixed.0 {
            fixed = (d, y);
        }
    }
    report.push(
        ConditionEntry::graded("annulus_norm_bound", shrink.0, shrink.0 + cfg.tol, true)
            .with_witness(Some(Witness { point: shrink.1, t: None, value: shrink.0 }))
            .with_note("min over the annulus of |x| − |g(i(x))| for constant functions i(x)"),
    );
    report.push(
        ConditionEntry::graded("annulus_fixed_point_free", fixed.0, fixed.0 - cfg.tol, true)
            .with_witness(Some(Witness { point: fixed.1, t: None, value: fixed.0 }))
            .with_note("min over the annulus of |g(i(x)) − x|"),
    );
    if let Some(s) = g.multipoint_summary() {
        report.push(ConditionEntry::structural(
            "multipoint_weights",
            Status::Pass,
            false,
            &format!("Σ|αᵢ| = {}, Σαᵢ = {}, mean case: {}", s.abs_sum, s.sum, s.convex),
        ));
    }
    Ok(report.finish())
}

/// Bound-set verifier for a single-valued field `h` on open K.
pub fn verify_bound_set(
    k: &ConstraintSet,
    bounding: &BoundingSource,
    h: &MultiMap,
    cfg: &CheckConfig,
    lambda_check: bool,
) -> Result<ConditionReport> {
    check_dim(k.dim(), h.dim)?;
    k.require_interior("the bound-set verifier")?;
    let samples = boundary_points(k, cfg)?;
    let times = cfg.open_grid(h.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb0);
    let mut closure: Vec<Vec<f64>> = (0..4000)
        .map(|_| linalg::random_in_box(&mut rng, &k.ref_box.lo, &k.ref_box.hi))
        .filter(|y| k.contains(y, 0.0))
        .take(400)
        .collect();
    closure.extend(samples.iter().cloned());

    let mut at_point = Vec::new();
    let mut containment = Vec::new();
    let mut transverse = Vec::new();
    for x in &samples {
        let fx = super::floquet::resolve_bounding(k, bounding, x, h, cfg)?.function;
        let v0 = fx.eval(x)?.abs();
        at_point.push(SampleOutcome { point: x.clone(), status: sample_status(v0 <= cfg.tol), value: v0 });
        let top = closure.iter().filter(|y| fx.in_domain(y)).map(|y| fx.value(y)).fold(f64::NEG_INFINITY, f64::max);
        containment.push(SampleOutcome { point: x.clone(), status: sample_status(top <= cfg.tol), value: top });
        let b = bundle_value(&nonsmooth::clarke_gradient(&fx, x, &cfg.clarke)?);
        let mut lowest = f64::INFINITY;
        for &t in &times {
            let (lo, hi) = multimap::inner_product_bounds(&b, &h.value(t, x));
            lowest = lowest.min(if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            });
        }
        transverse.push(SampleOutcome { point: x.clone(), status: sample_status(lowest >= cfg.tol), value: lowest });
    }
    let max_of = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let min_of = |o: &[SampleOutcome]| o.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let mut report = ConditionReport::new("bound_set");
    report.push(ConditionEntry::structural(
        "bounding_functions",
        Status::Pass,
        true,
        "a bounding function is available at every sample",
    ));
    let a = max_of(&at_point);
    report.push(
        ConditionEntry::graded("vanishes_on_boundary", a, cfg.tol - a, true)
            .with_witness(worst_witness(&at_point, false))
            .with_samples(at_point),
    );
    let c = max_of(&containment);
    report.push(
        ConditionEntry::graded("closure_in_sublevel", c, cfg.tol - c, true)
            .with_witness(worst_witness(&containment, false))
            .with_note(format!("max f over {} sampled points of the closure", closure.len())),
    );
    let t = min_of(&transverse);
    report.push(
        ConditionEntry::graded("transversality", t, t - cfg.tol, true)
            .with_witness(worst_witness(&transverse, true))
            .with_note("min over samples, interior times and gradients of |⟨p, h(t, x)⟩|")
            .with_samples(transverse),
    );
    if lambda_check {
        let (hits, runs) = interior_boundary_hits(k, h, cfg)?;
        report.push(
            ConditionEntry::graded(
                "interior_boundary_hits",
                hits as f64,
                if hits == 0 { 1.0 } else { -(hits as f64) },
                true,
            )
            .with_note(format!("{runs} trajectories of ẋ = λh for λ ∈ {{0.25, 0.5, 0.75}}")),
        );
    }
    Ok(report.finish())
}

/// Integrate `λh` from eight interior starts for each `λ ∈ {0.25, 0.5, 0.75}`
/// and count states at interior times inside the boundary collar.
pub fn interior_boundary_hits(k: &ConstraintSet, h: &MultiMap, cfg: &CheckConfig) -> Result<(usize, usize)> {
    let depth = depth_function(k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1a3b);
    let pool: Vec<Vec<f64>> = (0..20000)
        .map(|_| linalg::random_in_box(&mut rng, &k.ref_box.lo, &k.ref_box.hi))
        .filter(|y| depth.in_domain(y) && depth.value(y) < 0.0)
        .take(400)
        .collect();
    let mut starts: Vec<Vec<f64>> = pool.iter().filter(|y| depth.value(y) <= -0.1).take(8).cloned().collect();
    if starts.len() < 8 {
        starts.extend(pool.iter().filter(|y| depth.value(y) > -0.1).take(8 - starts.len()).cloned());
    }
    if starts.is_empty() {
        return Err(Error::Inconclusive("no interior starting points found".into()));
    }
    let step = (h.horizon / 200.0).min(1e-3);
    let mut hits = 0;
    let mut runs = 0;
    for lambda in [0.25, 0.5, 0.75] {
        let map = MultiMapKind::Scaled { factor: TimePoly::constant(lambda), inner: Box::new(h.map.clone()) };
        let fl = MultiMap::new(h.dim, map, h.horizon, lambda * h.bound_c)?;
        let icfg = IntegratorConfig { selection: SelectionMode::ChebyshevCenter, ..IntegratorConfig::with_step(step) };
        let collar = 2.0 * fl.bound_c * step;
        let counts: Vec<usize> = starts
            .par_iter()
            .map(|x0| match integrate::solve_ivp(&fl, k, x0, h.horizon, &icfg) {
                Ok(tr) => {
                    let last = tr.states.len() - 1;
                    tr.states[1..last].iter().filter(|x| depth.value(x) >= -collar).count()
                }
                Err(_) => 1,
            })
            .collect();
        hits += counts.iter().sum::<usize>();
        runs += starts.len();
    }
    Ok((hits, runs))
}

pub(crate) fn min_inner_sign(b: &ConvexValue, values: &[ConvexValue]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        let (l, h) = multimap::inner_product_bounds(b, v);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    (lo, hi)
}

pub(crate) fn signed_transversality(lo: f64, hi: f64) -> f64 {
    if hi < 0.0 {
        hi
    } else if lo > 0.0 {
        lo
    } else {
        0.0
    }
}
