//! Scenario files: one JSON document describing a whole problem.

use std::path::Path;

use serde::{Deserialize, Serialize};
use viability_kit::bvp::{BoundaryOperator, CheckConfig, SolverConfig};
use viability_kit::degree::{ContinuousMap, Region};
use viability_kit::geometry::{ConstraintSet, SetDescriptor};
use viability_kit::multimap::{MultiMap, MultiMapKind};

use crate::CliError;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bvp: Option<f64>,
    pub viability: Option<f64>,
    /// Certifier tolerance.
    pub check: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySettings {
    pub radii: Vec<f64>,
    /// Annulus infimum a strictly regular point must exceed.
    pub tol: f64,
    /// Classified ahead of the boundary samples.
    pub extra_points: Vec<Vec<f64>>,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings { radii: vec![1e-2, 1e-3, 1e-4], tol: 0.5, extra_points: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeTask {
    pub map: ContinuousMap,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    /// 0 picks the method default.
    #[serde(default)]
    pub resolution: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    pub constraint_set: SetDescriptor,
    pub multimap: MultiMapKind,
    /// Uniform bound on `|F|`; estimated over the reference box if absent.
    #[serde(default)]
    pub bound: Option<f64>,
    pub boundary: BoundaryOperator,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: CheckConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub classify: ClassifySettings,
    #[serde(default)]
    pub degree: Option<DegreeTask>,
}

/// Flag overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub bvp_tol: Option<f64>,
}

/// A parsed scenario with its objects built and cross-checked.
pub struct Loaded {
    pub scenario: Scenario,
    pub k: ConstraintSet,
    pub f: MultiMap,
}

impl Loaded {
    pub fn name(&self) -> String {
        self.scenario.name.clone().unwrap_or_else(|| "unnamed".into())
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::new(2, msg)
}

fn positive(what: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(schema(format!("{what} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

pub fn load(path: &Path, over: &Overrides) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(2, format!("cannot read scenario {}: {e}", path.display())))?;
    let mut s: Scenario =
        serde_json::from_str(&text).map_err(|e| schema(format!("scenario {}: {e}", path.display())))?;
    if s.version != SCENARIO_VERSION {
        return Err(schema(format!("unsupported scenario version {} (expected {SCENARIO_VERSION})", s.version)));
    }
    if !(s.horizon > 0.0 && s.horizon.is_finite()) {
        return Err(schema(format!("horizon must be positive, got {}", s.horizon)));
    }
    if s.dimension == 0 {
        return Err(schema("dimension must be at least 1"));
    }
    for (what, v) in [
        ("tolerances.bvp", s.tolerances.bvp),
        ("tolerances.viability", s.tolerances.viability),
        ("tolerances.check", s.tolerances.check),
        ("bound", s.bound),
        ("--tol", over.tol),
        ("--bvp-tol", over.bvp_tol),
    ] {
        positive(what, v)?;
    }

    if let Some(seed) = over.seed {
        s.seed = seed;
    }
    s.solver.seed = s.seed;
    s.checks.seed = s.seed;
    if let Some(t) = over.bvp_tol.or(s.tolerances.bvp) {
        s.solver.bvp_tol = t;
    }
    if let Some(t) = s.tolerances.viability {
        s.solver.viability_tol = t;
    }
    if let Some(t) = over.tol.or(s.tolerances.check) {
        s.checks.tol = t;
    }

    let n = s.dimension;
    let k = ConstraintSet::from_descriptor(&s.constraint_set).map_err(|e| schema(format!("constraint_set: {e}")))?;
    if k.dim() != n {
        return Err(schema(format!("constraint_set has dimension {}, scenario declares {n}", k.dim())));
    }
    let f = match s.bound {
        Some(c) => MultiMap::new(n, s.multimap.clone(), s.horizon, c),
        None => MultiMap::with_estimated_bound(n, s.multimap.clone(), s.horizon, &k.ref_box),
    }
    .map_err(|e| schema(format!("multimap: {e}")))?;
    s.boundary.validate(n, s.horizon).map_err(|e| schema(format!("boundary: {e}")))?;

    let point_lists = [
        ("solver.starts", s.solver.starts.clone().unwrap_or_default()),
        ("checks.points", s.checks.points.clone().unwrap_or_default()),
        ("classify.extra_points", s.classify.extra_points.clone()),
    ];
    for (what, pts) in point_lists {
        if let Some(p) = pts.iter().find(|p| p.len() != n) {
            return Err(schema(format!("{what}: point {p:?} is not in dimension {n}")));
        }
    }
    if s.classify.radii.is_empty() || s.classify.radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(schema("classify.radii must be a nonempty list of positive radii"));
    }
    if let Some(d) = &s.degree {
        let m = d.map.dim();
        let r = d.region.as_ref().map_or(n, Region::dim);
        let y = d.target.as_ref().map_or(m, Vec::len);
        if m != r || m != y {
            return Err(schema(format!("degree: map dimension {m}, region dimension {r}, target dimension {y}")));
        }
    }
    Ok(Loaded { scenario: s, k, f })
}
