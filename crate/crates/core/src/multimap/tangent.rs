//! Tangent selections: elements of `F(t, x)` minimizing the surrogate
//! `f°(x; v) = max_{p ∈ ∂f(x)} ⟨p, v⟩`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{ConvexValue, MultiMap};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot};
use crate::nonsmooth::{self, ClarkeConfig, GradientBundle, LipschitzFunction};

const BEST_RESPONSE_TOL: f64 = 1e-10;
const BEST_RESPONSE_CAP: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentChoice {
    pub v: Vec<f64>,
    /// `f°(x; v)` for the chosen `v`.
    pub objective: f64,
}

fn ball_dirs(n: usize) -> usize {
    if n == 2 {
        128
    } else {
        16 * n + 32
    }
}

fn combine(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; points[0].len()];
    for (w, p) in weights.iter().zip(points) {
        v = linalg::axpy(&v, *w, p);
    }
    v
}

/// Weights over `points` minimizing `max_g ⟨g, Σ λ_i w_i⟩`, or maximizing
/// `⟨prefer, ·⟩` below `level` when a preference is given.
fn hull_lp(points: &[Vec<f64>], gens: &[Vec<f64>], prefer: Option<(&[f64], f64)>) -> Result<Vec<f64>> {
    let dir = if prefer.is_some() { OptimizationDirection::Maximize } else { OptimizationDirection::Minimize };
    let mut lp = Problem::new(dir);
    let lam: Vec<_> =
        points.iter().map(|w| lp.add_var(prefer.map_or(0.0, |(d, _)| dot(d, w)), (0.0, f64::INFINITY))).collect();
    let ones: Vec<_> = lam.iter().map(|v| (*v, 1.0)).collect();
    lp.add_constraint(&ones[..], ComparisonOp::Eq, 1.0);
    match prefer {
        None => {
            let s = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
            for g in gens {
                let mut row: Vec<_> = lam.iter().zip(points).map(|(v, w)| (*v, dot(g, w))).collect();
                row.push((s, -1.0));
                lp.add_constraint(&row[..], ComparisonOp::Le, 0.0);
            }
        }
        Some((_, level)) => {
            for g in gens {
                let row: Vec<_> = lam.iter().zip(points).map(|(v, w)| (*v, dot(g, w))).collect();
                lp.add_constraint(&row[..], ComparisonOp::Le, level);
            }
        }
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    Ok(lam.iter().map(|v| sol[*v].max(0.0)).collect())
}

/// Best response for a ball value `B(c, ρ)`: against the current `v` take
/// the active bundle element `p`, then move to `c − ρ p̂`.
fn refine_ball(c: &[f64], rho: f64, bundle: &GradientBundle, start: Vec<f64>) -> Vec<f64> {
    let mut v = start;
    let mut best = (bundle.support(&v), v.clone());
    for _ in 0..BEST_RESPONSE_CAP {
        let mut p =
            bundle.vectors.iter().max_by(|a, b| dot(a, &v).total_cmp(&dot(b, &v))).expect("bundle nonempty").clone();
        if bundle.ball_radius > 0.0 {
            if let Some(u) = linalg::normalized(&v) {
                p = linalg::axpy(&p, bundle.ball_radius, &u);
            }
        }
        let Some(ph) = linalg::normalized(&p) else { break };
        let next = linalg::axpy(c, -rho, &ph);
        let step = linalg::dist(&next, &v);
        v = next;
        let obj = bundle.support(&v);
        if obj < best.0 {
            best = (obj, v.clone());
        }
        if step <= BEST_RESPONSE_TOL {
            break;
        }
    }
    best.1
}

fn minimize(value: &ConvexValue, bundle: &GradientBundle) -> Result<TangentChoice> {
    let n = value.dim();
    let points = value.expanded(ball_dirs(n));
    let mut v = if points.len() == 1 {
        points[0].clone()
    } else {
        let w = hull_lp(&points, &bundle.generators(), None)?;
        combine(&points, &w)
    };
    if value.ball_radius > 0.0 && value.vertices.len() == 1 {
        v = refine_ball(&value.vertices[0], value.ball_radius, bundle, v);
    }
    Ok(TangentChoice { objective: bundle.support(&v), v })
}

fn bundle_at(f: &MultiMap, k: &LipschitzFunction, x: &[f64], cfg: &ClarkeConfig) -> Result<GradientBundle> {
    check_dim(f.dim, x.len())?;
    check_dim(f.dim, k.dim)?;
    nonsmooth::clarke_gradient(k, x, cfg)
}

/// The element of `F(t, x)` with the smallest `f°(x; ·)`, even if positive.
pub fn least_violating(
    f: &MultiMap,
    k: &LipschitzFunction,
    t: f64,
    x: &[f64],
    cfg: &ClarkeConfig,
) -> Result<TangentChoice> {
    let bundle = bundle_at(f, k, x, cfg)?;
    minimize(&f.value(t, x), &bundle)
}

/// A `v ∈ F(t, x)` with `f°(x; v) ≤ −tol`, or `None` when the minimum of the
/// surrogate exceeds `−tol`.
pub fn select_tangent(
    f: &MultiMap,
    k: &LipschitzFunction,
    t: f64,
    x: &[f64],
    tol: f64,
    cfg: &ClarkeConfig,
) -> Result<Option<Vec<f64>>> {
    let c = least_violating(f, k, t, x, cfg)?;
    Ok((c.objective <= -tol).then_some(c.v))
}

/// Like [`select_tangent`], but among the certified tangent elements pick
/// the one extreme in direction `prefer`. Falls back to the least violating
/// element (returned with `certified = false`) when none exists.
pub fn select_tangent_toward(
    f: &MultiMap,
    k: &LipschitzFunction,
    t: f64,
    x: &[f64],
    tol: f64,
    prefer: &[f64],
    cfg: &ClarkeConfig,
) -> Result<(TangentChoice, bool)> {
    check_dim(f.dim, prefer.len())?;
    let bundle = bundle_at(f, k, x, cfg)?;
    let value = f.value(t, x);
    let best = minimize(&value, &bundle)?;
    if best.objective > -tol {
        return Ok((best, false));
    }
    let points = value.expanded(ball_dirs(value.dim()));
    if points.len() == 1 {
        return Ok((best, true));
    }
    let choice = match hull_lp(&points, &bundle.generators(), Some((prefer, -tol))) {
        Ok(w) => {
            let v = combine(&points, &w);
            let objective = bundle.support(&v);
            if objective <= -tol * (1.0 - 1e-9) && dot(prefer, &v) >= dot(prefer, &best.v) {
                TangentChoice { v, objective }
            } else {
                best
            }
        }
        Err(_) => best,
    };
    Ok((choice, true))
}
