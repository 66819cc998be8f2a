//! Markdown digest over the envelopes already in an output directory.

use std::fmt::Write as _;
use std::path::Path;

use viability_kit::bvp::ConditionReport;
use viability_kit::degree::DegreeResult;
use viability_kit::geometry::RegularityReport;

use crate::commands::SolveSummary;
use crate::output::{schema_kind, Envelope};
use crate::CliError;

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

fn point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn parse<T: serde::de::DeserializeOwned>(env: &Envelope, file: &str) -> Result<T, CliError> {
    serde_json::from_value(env.payload.clone())
        .map_err(|e| CliError::new(1, format!("{file}: payload does not match {}: {e}", env.schema)))
}

fn regularity(out: &mut String, r: &RegularityReport) {
    let _ = writeln!(out, "Overall class: **{:?}** (annulus tolerance {}, radii {:?})\n", r.overall, r.tol, r.radii);
    let _ = writeln!(out, "| point | class | strong margin | collar infimum |\n|---|---|---|---|");
    for p in &r.points {
        let _ = writeln!(
            out,
            "| {} | {:?} | {} | {} |",
            point(&p.point),
            p.class,
            num(p.strong_margin),
            num(p.collar_infimum)
        );
    }
}

fn conditions(out: &mut String, r: &ConditionReport) {
    let _ = writeln!(out, "Overall: **{:?}**\n", r.overall);
    let _ = writeln!(out, "| condition | status | required | value | margin | note |\n|---|---|---|---|---|---|");
    for c in &r.conditions {
        let _ = writeln!(
            out,
            "| {} | {:?} | {} | {} | {} | {} |",
            c.name,
            c.status,
            if c.required { "yes" } else { "no" },
            opt(c.value),
            opt(c.margin),
            c.note.as_deref().unwrap_or("").replace('|', "\\|"),
        );
    }
}

fn solve(out: &mut String, s: &SolveSummary) {
    let _ = writeln!(
        out,
        "{} solution(s) from {} attempt(s); best boundary residual {}.\n",
        s.solutions.len(),
        s.attempts,
        num(s.best_residual)
    );
    if s.eps_family.len() > 1 {
        let _ = writeln!(out, "| ε | accepted | best residual |\n|---|---|---|");
        for e in &s.eps_family {
            let _ = writeln!(out, "| {} | {} | {} |", e.eps, e.accepted, num(e.best_residual));
        }
        let _ = writeln!(out);
    }
    if !s.solutions.is_empty() {
        let _ = writeln!(
            out,
            "| file | start | boundary residual | viability residual | trajectory |\n|---|---|---|---|---|"
        );
        for r in &s.solutions {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                r.file,
                point(&r.initial),
                num(r.boundary_residual),
                num(r.viability_residual),
                r.trajectory_csv
            );
        }
    }
}

fn degree(out: &mut String, d: &DegreeResult) {
    let _ = writeln!(
        out,
        "Degree **{}** by {:?} at resolution {}; boundary margin {}.",
        d.degree,
        d.method,
        d.resolution,
        num(d.boundary_margin)
    );
}

/// Render every recognized envelope in `dir`, in file-name order.
pub fn render(dir: &Path, scenario: &str) -> Result<String, CliError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::new(2, format!("cannot read output directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = format!("# viability-kit digest: {scenario}\n");
    let mut sections = 0;
    for path in files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let Ok(env) = serde_json::from_str::<Envelope>(&text) else { continue };
        let Some(kind) = schema_kind(&env.schema) else { continue };
        let title = match kind {
            "regularity-report" => "Regularity classification",
            "condition-report" => "Condition report",
            "solve-summary" => "Boundary value solve",
            "degree-result" => "Brouwer degree",
            _ => continue,
        };
        let _ = writeln!(out, "\n## {title} (`{name}`)\n");
        match kind {
            "regularity-report" => regularity(&mut out, &parse(&env, &name)?),
            "condition-report" => {
                let r: ConditionReport = parse(&env, &name)?;
                let _ = writeln!(out, "Certifier `{}`.\n", r.theorem);
                conditions(&mut out, &r);
            }
            "solve-summary" => solve(&mut out, &parse(&env, &name)?),
            _ => degree(&mut out, &parse(&env, &name)?),
        }
        sections += 1;
    }
    if sections == 0 {
        return Err(CliError::new(2, format!("no prior outputs found in {}", dir.display())));
    }
    Ok(out)
}
