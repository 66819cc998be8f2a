//! Regularity classification of boundary points and the outer-probe
//! machinery shared with the Liminf tangency certificate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::{self, norm};
use crate::nonsmooth::{self, ClarkeConfig, GradientBundle, LipschitzFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityClass {
    Unclassified,
    Regular,
    Strictly,
    Strongly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnulusInfimum {
    pub radius: f64,
    /// Smallest min-norm of the sampled gradients on `B(x, r) \ K`.
    pub infimum: f64,
    pub probes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRegularity {
    pub point: Vec<f64>,
    pub class: RegularityClass,
    /// Min-norm of the gradient bundle at the point itself.
    pub strong_margin: f64,
    pub annuli: Vec<AnnulusInfimum>,
    /// Smallest min-norm over the collar probes (regularity test).
    pub collar_infimum: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub points: Vec<PointRegularity>,
    pub radii: Vec<f64>,
    pub tol: f64,
    pub collar: f64,
    pub overall: RegularityClass,
}

impl RegularityReport {
    /// The entry whose point is nearest to `z`.
    pub fn nearest(&self, z: &[f64]) -> Option<&PointRegularity> {
        self.points.iter().min_by(|a, b| linalg::dist(&a.point, z).total_cmp(&linalg::dist(&b.point, z)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Random probes per radius; defaults to `50·N`.
    #[serde(default)]
    pub probes_per_radius: Option<usize>,
    /// Width of the collar `U = {0 < f < collar}` used for the regular test.
    pub collar: f64,
    /// Gradient norms at or below this count as `0 ∈ ∂f(y)`.
    pub zero_tol: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { probes_per_radius: None, collar: 0.25, zero_tol: 1e-9, seed: 0 }
    }
}

impl ProbeOptions {
    fn count(&self, n: usize) -> usize {
        self.probes_per_radius.unwrap_or(50 * n)
    }
}

fn seed_for(base: u64, index: usize, salt: u64) -> u64 {
    base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Points of `B(x, r) \ K`: uniform draws plus points where a max/min/abs
/// node switches branches, found by bisection along a random line through
/// each draw. Kinks of the representation are where the gradient degenerates,
/// and uniform sampling would almost never hit them.
pub(crate) fn outer_probes(
    f: &LipschitzFunction,
    x: &[f64],
    r: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = x.len();
    let min_gap = 1e-12 * (1.0 + norm(x));
    let outside = |z: &[f64]| f.in_domain_interior(z) && f.value(z) > min_gap;
    let mut out = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let y = linalg::random_in_ball(rng, x, r);
        if !f.in_domain_interior(&y) {
            continue;
        }
        let u = linalg::random_unit(rng, n);
        // Chord of B(x, r) through y along u: y + s u with s in [s0, s1].
        let d = linalg::sub(&y, x);
        let b = linalg::dot(&d, &u);
        let c = linalg::dot(&d, &d) - r * r;
        let disc = (b * b - c).max(0.0).sqrt();
        let (s0, s1) = (-b - disc, -b + disc);
        for sw in f.switches(&y) {
            let phi = |s: f64| f.switch_value(&sw, &linalg::axpy(&y, s, &u));
            let pieces = 8;
            let mut prev_s = s0;
            let mut prev = phi(s0);
            for k in 1..=pieces {
                let s = s0 + (s1 - s0) * k as f64 / pieces as f64;
                let cur = phi(s);
                if prev.is_finite() && cur.is_finite() && prev * cur < 0.0 {
                    let (mut lo, mut hi, mut flo) = (prev_s, s, prev);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        let fm = phi(mid);
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if (fm < 0.0) == (flo < 0.0) {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    let z = linalg::axpy(&y, 0.5 * (lo + hi), &u);
                    if outside(&z) && linalg::dist(&z, x) <= r {
                        out.push(z);
                    }
                }
                prev_s = s;
                prev = cur;
            }
        }
        if outside(&y) {
            out.push(y);
        }
    }
    out
}

/// Gradient bundle at an outer probe, with the sampling radius shrunk so the
/// sampling ball stays off K.
pub(crate) fn probe_bundle(f: &LipschitzFunction, y: &[f64], seed: u64) -> Result<GradientBundle> {
    let lip = f.lipschitz_or(1.0);
    let gap = f.value(y);
    let radius = (1e-4 * (1.0 + norm(y))).min(gap / (2.0 * lip));
    let cfg = ClarkeConfig { sample_count: None, radius: Some(radius.max(1e-300)), seed };
    nonsmooth::clarke_gradient(f, y, &cfg)
}

fn probe_min_norm(f: &LipschitzFunction, probes: &[Vec<f64>], seed: u64) -> (f64, Option<Vec<f64>>) {
    let mut best = (f64::INFINITY, None);
    for (i, y) in probes.iter().enumerate() {
        if let Ok(b) = probe_bundle(f, y, seed ^ i as u64) {
            let m = b.min_norm();
            if m < best.0 {
                best = (m, Some(y.clone()));
            }
        }
    }
    best
}

/// Classify each boundary sample with the default probe options.
pub fn classify_regularity(
    k: &ConstraintSet,
    samples: &[Vec<f64>],
    radii: &[f64],
    tol: f64,
) -> Result<RegularityReport> {
    classify_regularity_with(k, samples, radii, tol, &ProbeOptions::default())
}

pub fn classify_regularity_with(
    k: &ConstraintSet,
    samples: &[Vec<f64>],
    radii: &[f64],
    tol: f64,
    opts: &ProbeOptions,
) -> Result<RegularityReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("radii must be nonempty and positive".into()));
    }
    let f = &k.rep;
    let n = k.dim();
    let count = opts.count(n);
    let points: Vec<Result<PointRegularity>> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            crate::error::check_dim(n, x.len())?;
            let bundle = nonsmooth::clarke_gradient(f, x, &ClarkeConfig { seed: opts.seed, ..Default::default() })?;
            let strong_margin = bundle.min_norm();
            let mut annuli = Vec::with_capacity(radii.len());
            for (ri, &r) in radii.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, idx, ri as u64 + 1));
                let probes = outer_probes(f, x, r, count, &mut rng);
                let (inf, witness) = probe_min_norm(f, &probes, seed_for(opts.seed, idx, 1000 + ri as u64));
                annuli.push(AnnulusInfimum { radius: r, infimum: inf, probes: probes.len(), witness });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, idx, 0xc011a));
            let collar_probes: Vec<Vec<f64>> = outer_probes(f, x, opts.collar, count, &mut rng)
                .into_iter()
                .filter(|y| f.value(y) < opts.collar)
                .collect();
            let (collar_infimum, _) = probe_min_norm(f, &collar_probes, seed_for(opts.seed, idx, 0xc0));
            let strictly = annuli.iter().all(|a| a.infimum >= tol);
            let regular = collar_infimum > opts.zero_tol;
            let class = if strong_margin > tol {
                RegularityClass::Strongly
            } else if strictly {
                RegularityClass::Strictly
            } else if regular {
                RegularityClass::Regular
            } else {
                RegularityClass::Unclassified
            };
            Ok(PointRegularity { point: x.clone(), class, strong_margin, annuli, collar_infimum })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let overall = points.iter().map(|p| p.class).min().unwrap_or(RegularityClass::Unclassified);
    Ok(RegularityReport { points, radii: radii.to_vec(), tol, collar: opts.collar, overall })
}

/// Largest distance from `v` to the polar cones `∂f(y)°` (or `∂(−f)(y)°`
/// when `negate`) over outer probes `y ∈ B(x, r) \ K`, with the probe that
/// attains it. A Liminf of polar cones contains `v` exactly when this
/// distance tends to zero as `r` shrinks.
pub fn liminf_polar_distance(
    f: &LipschitzFunction,
    x: &[f64],
    v: &[f64],
    r: f64,
    negate: bool,
    opts: &ProbeOptions,
) -> Result<(f64, Option<Vec<f64>>)> {
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, 0, r.to_bits()));
    let probes = outer_probes(f, x, r, opts.count(n), &mut rng);
    if probes.is_empty() {
        return Err(Error::Inconclusive(format!("no points outside K found in B({x:?}, {r})")));
    }
    let g = if negate { f.negated() } else { f.clone() };
    let mut worst: (f64, Option<Vec<f64>>) = (f64::NEG_INFINITY, None);
    for (i, y) in probes.iter().enumerate() {
        let lip = g.lipschitz_or(1.0);
        let radius = (1e-4 * (1.0 + norm(y))).min(f.value(y) / (2.0 * lip));
        let cfg = ClarkeConfig { sample_count: None, radius: Some(radius.max(1e-300)), seed: opts.seed ^ i as u64 };
        // Probes hugging a kink can leave a sampling ball in which every
        // point ties. The calculus rules then give a superset of the
        // gradient, which only enlarges the distance.
        let b = match nonsmooth::clarke_gradient(&g, y, &cfg) {
            Err(Error::Sampling(_)) => {
                let l = g.local(y);
                GradientBundle { vectors: l.grads, ball_radius: l.ball, exact: false, radius: 0.0 }
            }
            other => other?,
        };
        let d = b.polar_distance(v);
        if d > worst.0 {
            worst = (d, Some(y.clone()));
        }
    }
    Ok(worst)
}
