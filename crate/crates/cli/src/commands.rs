use std::sync::Arc;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use viability_kit::bvp::{
    check_ant, check_ball, check_borsuk, check_floquet, check_normal_conditions, check_th1, solve_floquet,
    solve_nonlocal, BoundaryOperator, BoundingSource, ConditionReport, EpsStage, SolveOutcome, Status, Strategy,
};
use viability_kit::degree::{brouwer_degree, Region};
use viability_kit::geometry::{classify_regularity, sample_boundary};
use viability_kit::integrate::residual_report;
use viability_kit::linalg;
use viability_kit::nonsmooth::{clarke_gradient, LipschitzFunction};

use crate::output::Writer;
use crate::scenario::Loaded;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    /// Endpoint operator: tangency, degree and boundary equivalence.
    Th1,
    /// Borsuk-type conditions on an even representation.
    Borsuk,
    /// Antiperiodic problem on a regular set, possibly without interior.
    Ant,
    /// Ball constraints with half-space tangency.
    Ball,
    /// Floquet operator with the representation as bounding function.
    Floquet,
    /// Floquet operator with bounding functions built from normals.
    Normal,
}

impl Theorem {
    pub fn slug(self) -> &'static str {
        match self {
            Theorem::Th1 => "th1",
            Theorem::Borsuk => "borsuk",
            Theorem::Ant => "ant",
            Theorem::Ball => "ball",
            Theorem::Floquet => "floquet",
            Theorem::Normal => "normal",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionRef {
    pub file: String,
    pub trajectory_csv: String,
    pub initial: Vec<f64>,
    pub boundary_residual: f64,
    pub viability_residual: f64,
    pub solver: Strategy,
    pub start_index: usize,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub found: bool,
    pub attempts: usize,
    pub best_residual: f64,
    pub eps_family: Vec<EpsStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolated_start: Option<Vec<f64>>,
    pub solutions: Vec<SolutionRef>,
}

/// Exit code for a finished certifier run.
fn verdict(report: &ConditionReport) -> Result<(), CliError> {
    match report.overall {
        Status::Pass => Ok(()),
        other => Err(CliError::new(4, format!("{} conditions: overall {other:?}", report.theorem))),
    }
}

fn floquet_matrix(l: &Loaded, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    match &l.scenario.boundary {
        BoundaryOperator::Floquet { matrix } => Ok(matrix.clone()),
        other => {
            Err(CliError::new(2, format!("{what} needs a floquet boundary operator, scenario has {}", other.name())))
        }
    }
}

/// Unit normal from the min-norm element of the representation's gradient,
/// falling back to the radial direction.
fn gradient_normals(
    rep: LipschitzFunction,
    clarke: viability_kit::nonsmooth::ClarkeConfig,
) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| {
        clarke_gradient(&rep, x, &clarke)
            .ok()
            .and_then(|b| linalg::normalized(&linalg::min_norm_point(&b.generators()).0))
            .or_else(|| linalg::normalized(x))
            .unwrap_or_else(|| {
                let mut e = vec![0.0; x.len()];
                e[0] = 1.0;
                e
            })
    }
}

pub fn classify(l: &Loaded, w: &Writer) -> Result<(), CliError> {
    let s = &l.scenario;
    let mut points = s.classify.extra_points.clone();
    match &s.checks.points {
        Some(p) => points.extend(p.iter().cloned()),
        None => points.extend(sample_boundary(&l.k, s.checks.boundary_samples, s.seed)?),
    }
    let report = classify_regularity(&l.k, &points, &s.classify.radii, s.classify.tol)?;
    let path = w.write("classify.json", "regularity-report", &report)?;
    println!("overall class {:?} over {} points -> {}", report.overall, report.points.len(), path.display());
    Ok(())
}

pub fn verify(l: &Loaded, theorem: Theorem, w: &Writer) -> Result<(), CliError> {
    let (k, f, cfg, g) = (&l.k, &l.f, &l.scenario.checks, &l.scenario.boundary);
    let report = match theorem {
        Theorem::Th1 => check_th1(k, f, g, cfg)?,
        Theorem::Borsuk => check_borsuk(k, f, cfg)?,
        Theorem::Ant => check_ant(k, f, cfg)?,
        Theorem::Ball => check_ball(k, f, g, cfg)?,
        Theorem::Floquet => {
            check_floquet(k, &floquet_matrix(l, "--theorem floquet")?, f, &BoundingSource::Representation, cfg)?
        }
        Theorem::Normal => {
            let c = floquet_matrix(l, "--theorem normal")?;
            let normals = gradient_normals(k.rep.clone(), cfg.clarke.clone());
            check_normal_conditions(k, &c, f, Arc::new(normals), cfg)?
        }
    };
    let path = w.write(&format!("verify_{}.json", theorem.slug()), "condition-report", &report)?;
    for c in &report.conditions {
        let margin = c.margin.map(|m| format!(" margin {m:e}")).unwrap_or_default();
        println!("{:<32} {:?}{margin}{}", c.name, c.status, if c.required { "" } else { " (advisory)" });
    }
    println!("overall {:?} -> {}", report.overall, path.display());
    verdict(&report)
}

pub fn solve(l: &Loaded, w: &Writer) -> Result<(), CliError> {
    let (k, f, s) = (&l.k, &l.f, &l.scenario);
    let outcome: SolveOutcome = match &s.boundary {
        BoundaryOperator::Floquet { matrix } => solve_floquet(k, f, matrix, &s.solver)?,
        g => solve_nonlocal(k, f, g, &s.solver)?,
    };
    let mut refs = Vec::new();
    for (i, sol) in outcome.solutions.iter().enumerate() {
        let stem = format!("solution_{i:02}");
        sol.trajectory.write_files(&w.dir, &stem, &residual_report(&sol.trajectory, f, k))?;
        let file = format!("{stem}.json");
        w.write(&file, "bvp-solution", sol)?;
        refs.push(SolutionRef {
            file,
            trajectory_csv: format!("{stem}.csv"),
            initial: sol.initial.clone(),
            boundary_residual: sol.boundary_residual,
            viability_residual: sol.viability_residual,
            solver: sol.solver,
            start_index: sol.start_index,
            eps: sol.eps,
        });
    }
    let summary = SolveSummary {
        found: outcome.found(),
        attempts: outcome.attempts,
        best_residual: outcome.best_residual,
        eps_family: outcome.eps_family.clone(),
        extrapolated_start: outcome.extrapolated_start.clone(),
        solutions: refs,
    };
    let path = w.write("solve.json", "solve-summary", &summary)?;
    for r in &summary.solutions {
        println!("{}: x0 = {:?}, boundary residual {:e}", r.file, r.initial, r.boundary_residual);
    }
    println!("{} solution(s) from {} attempt(s) -> {}", summary.solutions.len(), summary.attempts, path.display());
    if summary.found {
        Ok(())
    } else {
        Err(CliError::new(3, format!("no solution accepted; best boundary residual {:e}", summary.best_residual)))
    }
}

pub fn degree(l: &Loaded, w: &Writer) -> Result<(), CliError> {
    let task = l.scenario.degree.as_ref().ok_or_else(|| CliError::new(2, "scenario has no degree block"))?;
    let n = task.map.dim();
    let region = task.region.clone().unwrap_or_else(|| Region::unit_ball(n));
    let target = task.target.clone().unwrap_or_else(|| vec![0.0; n]);
    let result = brouwer_degree(&task.map, &region, &target, task.resolution)?;
    let path = w.write("degree.json", "degree-result", &result)?;
    println!(
        "degree {} via {:?} (boundary margin {:e}) -> {}",
        result.degree,
        result.method,
        result.boundary_margin,
        path.display()
    );
    Ok(())
}
