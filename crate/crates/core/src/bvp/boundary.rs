//! Nonlocal boundary operators `x(0) = g(x)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::degree::ContinuousMap;
use crate::error::{check_dim, Error, Result};
use crate::integrate::Trajectory;
use crate::linalg::{self, norm};

pub type BoundaryFnType = dyn Fn(&Trajectory) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct BoundaryFn(pub Arc<BoundaryFnType>);

impl fmt::Debug for BoundaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryFn")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryOperator {
    /// `x(0) = −x(T)`
    Antiperiodic,
    /// `x(0) = x(T)`
    Periodic,
    /// `x(T) = C x(0)`
    Floquet { matrix: Vec<Vec<f64>> },
    /// `x(0) = Σ αᵢ x(tᵢ)`
    Multipoint { alphas: Vec<f64>, times: Vec<f64> },
    /// `x(0) = (1/T) ∫ h(x(t)) dt`
    MeanValue { map: ContinuousMap },
    /// `A x(0) + B x(T) + c = 0`
    Endpoint {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    /// `x(0) = g(x)` for an arbitrary functional of the trajectory.
    #[serde(skip)]
    Functional(BoundaryFn),
}

/// Weights of a multipoint operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipointSummary {
    pub abs_sum: f64,
    pub sum: f64,
    /// `Σ|αᵢ| ≤ 1`
    pub within_unit: bool,
    /// `Σαᵢ = 1`: the discrete mean case.
    pub convex: bool,
}

fn matrix_dim(m: &[Vec<f64>], n: usize) -> Result<()> {
    check_dim(n, m.len())?;
    for row in m {
        check_dim(n, row.len())?;
    }
    Ok(())
}

impl BoundaryOperator {
    pub fn functional(g: impl Fn(&Trajectory) -> Vec<f64> + Send + Sync + 'static) -> Self {
        BoundaryOperator::Functional(BoundaryFn(Arc::new(g)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryOperator::Antiperiodic => "antiperiodic",
            BoundaryOperator::Periodic => "periodic",
            BoundaryOperator::Floquet { .. } => "floquet",
            BoundaryOperator::Multipoint { .. } => "multipoint",
            BoundaryOperator::MeanValue { .. } => "meanvalue",
            BoundaryOperator::Endpoint { .. } => "endpoint",
            BoundaryOperator::Functional(_) => "functional",
        }
    }

    /// Structural checks against the state dimension and horizon.
    pub fn validate(&self, n: usize, horizon: f64) -> Result<()> {
        match self {
            BoundaryOperator::Floquet { matrix } => {
                matrix_dim(matrix, n)?;
                let c = self.floquet_condition_number().unwrap_or(f64::INFINITY);
                if !c.is_finite() || c > 1e12 {
                    return Err(Error::Argument(format!("Floquet matrix is singular (condition number {c:e})")));
                }
            }
            BoundaryOperator::Multipoint { alphas, times } => {
                if alphas.is_empty() || alphas.len() != times.len() {
                    return Err(Error::Argument("multipoint needs one weight per time".into()));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Argument("multipoint times must be strictly increasing".into()));
                }
                let slack = 1e-12 * horizon.max(1.0);
                if times.iter().any(|t| !(*t > 0.0 && *t <= horizon + slack)) {
                    return Err(Error::Argument(format!("multipoint times must lie in (0, {horizon}]")));
                }
            }
            BoundaryOperator::MeanValue { map } => check_dim(n, map.dim())?,
            BoundaryOperator::Endpoint { a, b, c } => {
                matrix_dim(a, n)?;
                matrix_dim(b, n)?;
                if let Some(c) = c {
                    check_dim(n, c.len())?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `σ_max / σ_min` of the Floquet matrix.
    pub fn floquet_condition_number(&self) -> Option<f64> {
        let BoundaryOperator::Floquet { matrix } = self else { return None };
        let s = linalg::to_dmatrix(matrix).singular_values();
        let max = s.iter().cloned().fold(0.0, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(if min > 0.0 { max / min } else { f64::INFINITY })
    }

    pub fn multipoint_summary(&self) -> Option<MultipointSummary> {
        let BoundaryOperator::Multipoint { alphas, .. } = self else { return None };
        let abs_sum: f64 = alphas.iter().map(|a| a.abs()).sum();
        let sum: f64 = alphas.iter().sum();
        Some(MultipointSummary {
            abs_sum,
            sum,
            within_unit: abs_sum <= 1.0 + 1e-12,
            convex: (sum - 1.0).abs() <= 1e-12,
        })
    }

    /// `(A, B, c)` with the condition written as `A x(0) + B x(T) + c = 0`,
    /// for the operators that only see the endpoints linearly.
    pub fn endpoint_form(&self, n: usize) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let id = linalg::identity(n);
        let neg_id: Vec<Vec<f64>> = id.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let zero = vec![0.0; n];
        match self {
            BoundaryOperator::Antiperiodic => Some((id.clone(), id, zero)),
            BoundaryOperator::Periodic => Some((id, neg_id, zero)),
            BoundaryOperator::Floquet { matrix } => Some((matrix.clone(), neg_id, zero)),
            BoundaryOperator::Endpoint { a, b, c } => Some((a.clone(), b.clone(), c.clone().unwrap_or(zero))),
            _ => None,
        }
    }
}

/// The constant trajectory `x(t) ≡ x` on `[0, T]`.
pub(crate) fn constant_trajectory(x: &[f64], horizon: f64) -> Trajectory {
    let n = x.len();
    Trajectory {
        h: horizon,
        times: vec![0.0, horizon],
        states: vec![x.to_vec(), x.to_vec()],
        selections: vec![vec![0.0; n]; 2],
        f_values: vec![0.0; 2],
        viability_residual: 0.0,
        inclusion_residual: 0.0,
        violations: Vec::new(),
    }
}

fn solve_linear(m: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = linalg::to_dmatrix(m).lu();
    let b = nalgebra::DVector::from_column_slice(rhs);
    let x = lu.solve(&b).ok_or_else(|| Error::Argument("boundary matrix is singular".into()))?;
    Ok(x.iter().cloned().collect())
}

/// The value `x(0)` must equal for `traj` to satisfy the condition.
pub fn apply_boundary(g: &BoundaryOperator, traj: &Trajectory) -> Result<Vec<f64>> {
    let n = traj.dim();
    let horizon = traj.horizon();
    let x0 = traj.initial();
    let xt = traj.terminal();
    match g {
        BoundaryOperator::Antiperiodic => Ok(xt.iter().map(|v| -v).collect()),
        BoundaryOperator::Periodic => Ok(xt.to_vec()),
        BoundaryOperator::Floquet { matrix } => {
            matrix_dim(matrix, n)?;
            solve_linear(matrix, xt)
        }
        BoundaryOperator::Multipoint { alphas, times } => {
            if alphas.len() != times.len() {
                return Err(Error::Argument("multipoint needs one weight per time".into()));
            }
            let slack = 1e-12 * horizon.abs().max(1.0);
            let mut out = vec![0.0; n];
            for (a, t) in alphas.iter().zip(times) {
                if *t < traj.times[0] - slack || *t > horizon + slack {
                    return Err(Error::Argument(format!(
                        "multipoint time {t} lies outside the trajectory grid [{}, {horizon}]",
                        traj.times[0]
                    )));
                }
                out = linalg::axpy(&out, *a, &traj.state_at(*t));
            }
            Ok(out)
        }
        BoundaryOperator::MeanValue { map } => {
            check_dim(n, map.dim())?;
            let vals: Vec<Vec<f64>> = traj.states.iter().map(|x| map.apply(x)).collect();
            let mut acc = vec![0.0; n];
            for i in 1..traj.times.len() {
                let dt = traj.times[i] - traj.times[i - 1];
                let mid = linalg::scale(&linalg::add(&vals[i - 1], &vals[i]), 0.5 * dt);
                acc = linalg::add(&acc, &mid);
            }
            let span = horizon - traj.times[0];
            if !(span > 0.0) {
                return Err(Error::Argument("mean value needs a trajectory of positive length".into()));
            }
            Ok(linalg::scale(&acc, 1.0 / span))
        }
        BoundaryOperator::Endpoint { a, b, c } => {
            matrix_dim(a, n)?;
            matrix_dim(b, n)?;
            let mut gval = linalg::add(&linalg::mat_vec(a, x0), &linalg::mat_vec(b, xt));
            if let Some(c) = c {
                gval = linalg::add(&gval, c);
            }
            Ok(linalg::sub(x0, &gval))
        }
        BoundaryOperator::Functional(BoundaryFn(g)) => {
            let v = g(traj);
            check_dim(n, v.len())?;
            Ok(v)
        }
    }
}

/// The defect vector whose norm is [`boundary_residual`].
pub fn boundary_defect(g: &BoundaryOperator, traj: &Trajectory) -> Result<Vec<f64>> {
    if let BoundaryOperator::Floquet { matrix } = g {
        matrix_dim(matrix, traj.dim())?;
        return Ok(linalg::sub(traj.terminal(), &linalg::mat_vec(matrix, traj.initial())));
    }
    let target = apply_boundary(g, traj)?;
    Ok(linalg::sub(traj.initial(), &target))
}

/// `|x(0) − g(x)|`, or `|x(T) − C x(0)|` for Floquet operators.
pub fn boundary_residual(g: &BoundaryOperator, traj: &Trajectory) -> Result<f64> {
    Ok(norm(&boundary_defect(g, traj)?))
}
