//! Nonlocal boundary value problems: boundary operators, certifiers for the
//! existence hypotheses, and multistart solvers.

mod boundary;
mod checks;
mod floquet;
mod report;
mod solve;

pub use boundary::{
    apply_boundary, boundary_defect, boundary_residual, BoundaryFn, BoundaryFnType, BoundaryOperator, MultipointSummary,
};
pub use checks::{
    borsuk_quantities, check_ant, check_ball, check_borsuk, check_th1, interior_boundary_hits, verify_bound_set,
    BoundingFn, BoundingSource, NormalFn,
};
pub use floquet::{
    aumann_centroid, check_floquet, check_normal_conditions, normal_bounding_function, Bounding, ORBIT_CAP,
};
pub use report::{CheckConfig, ConditionEntry, ConditionReport, SampleOutcome, Status, Witness};
pub use solve::{
    solve_floquet, solve_nonlocal, BVPSolution, EpsStage, SolveOutcome, SolverConfig, Strategy, DEFAULT_EPS_SCHEDULE,
};

#[cfg(test)]
mod tests;
