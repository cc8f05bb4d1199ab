//! Variable-step minimum-time planner.
//!
//! Equality mode keeps every input on the thrust sphere `‖u‖ = ū` through an
//! angle parameterization; relaxed mode uses Cartesian inputs with
//! `‖u‖ ≤ ū`. Both are solved by the augmented Lagrangian in [`augmented`]
//! from a conic warm start.

pub mod augmented;
pub mod model;
pub mod residuals;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::camera::SurveyPlan;
use crate::error::{PlanError, Result};
use crate::math::Vec3;
use crate::params::{Layout, PlannerParams};
use crate::socp::{line_search_dt_auto, ConicSolution, ConicStatus};
use augmented::{AlResult, AlSettings, ConstrainedProblem};
use model::MinTimeProblem;
pub use residuals::{evaluate_residuals, ResidualReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum InputMode {
    /// `‖u_k‖ = ū` on every interval.
    Sphere,
    /// `‖u_k‖ ≤ ū`.
    Relaxed,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Worst constraint violation of the returned point.
    pub violation: f64,
    /// Lagrangian gradient max-norm at the returned point.
    pub stationarity: f64,
    pub penalty: f64,
    pub converged: bool,
    pub merit_monotone: bool,
    /// Relaxed retries performed after the equality-mode attempt.
    pub fallback_attempts: usize,
}

/// Durations, inputs and node states of a solved plan.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeSolution {
    pub layout: Layout,
    pub mode: InputMode,
    pub dt: Vec<f64>,
    pub u: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub r: Vec<Vec3>,
    pub total_time: f64,
    pub report: SolveReport,
}

impl NodeSolution {
    /// Start time of every node.
    pub fn node_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.dt.len() + 1);
        let mut acc = 0.0;
        t.push(0.0);
        for d in &self.dt {
            acc += d;
            t.push(acc);
        }
        t
    }

    pub fn waypoint_times(&self) -> Vec<f64> {
        let t = self.node_times();
        (0..self.layout.waypoints)
            .map(|n| t[self.layout.waypoint_node(n)])
            .collect()
    }
}

/// Settings for the nonlinear solve.
#[derive(Clone, Debug)]
pub struct NlpSettings {
    pub al: AlSettings,
    /// Inequalities within this margin are projected onto in the final polish.
    pub active_tol: f64,
    /// Relative bisection tolerance of the conic re-warm on fallback retries.
    pub warm_tol_rel: f64,
}

impl NlpSettings {
    pub fn from_params(params: &PlannerParams) -> Self {
        NlpSettings {
            al: AlSettings {
                feas_tol: params.eps_feas,
                opt_tol: params.eps_opt,
                ..AlSettings::default()
            },
            active_tol: 1e-5,
            warm_tol_rel: 1e-4,
        }
    }
}

fn check_warm(plan: &SurveyPlan, warm: &ConicSolution, s: usize) -> Result<()> {
    let expected = Layout::new(plan.len(), s);
    if warm.layout != expected || warm.u.len() != expected.intervals() || warm.v.len() != expected.nodes() {
        return Err(PlanError::InvalidWarmStart(format!(
            "expected {} waypoints with {} switching points, got {:?}",
            plan.len(),
            s,
            warm.layout
        )));
    }
    if warm.status != ConicStatus::Optimal {
        return Err(PlanError::InvalidWarmStart(format!(
            "warm start status is {:?}",
            warm.status
        )));
    }
    Ok(())
}

fn attempt(
    plan: &SurveyPlan,
    params: &PlannerParams,
    warm: &ConicSolution,
    mode: InputMode,
    settings: &NlpSettings,
) -> (MinTimeProblem, AlResult) {
    let s = warm.layout.switching_points;
    let problem = MinTimeProblem::new(plan, params, s, mode);
    let k = warm.layout.intervals();
    let v_wp: Vec<Vec3> = (0..plan.len())
        .map(|n| warm.v[warm.layout.waypoint_node(n)])
        .collect();
    let x0 = problem.encode(&warm.u, &alloc::vec![warm.dt; k], &v_wp);
    let al = AlSettings {
        initial_penalty: initial_penalty(plan, warm, settings.al.initial_penalty),
        ..settings.al.clone()
    };
    let mut result = augmented::solve(&problem, &x0, &al);
    augmented::polish(&problem, &mut result, settings.active_tol);
    (problem, result)
}

/// Durations enter as `dt = s²`, so `s = 0` is stationary for every
/// constraint and a segment can collapse whenever `½ρd²` undercuts the time it
/// saves. Start the penalty above `2·T_n/d_n²` on every segment, with margin.
fn initial_penalty(plan: &SurveyPlan, warm: &ConicSolution, floor: f64) -> f64 {
    let per_segment = warm.dt * (warm.layout.per_segment() as f64);
    let worst = plan
        .waypoints
        .windows(2)
        .map(|w| w[0].distance(&w[1]))
        .filter(|d| *d > 1e-9)
        .map(|d| 10.0 * per_segment / (d * d))
        .fold(0.0, f64::max);
    floor.max(worst.min(1e4))
}

fn extract(problem: &MinTimeProblem, result: &AlResult, fallback_attempts: usize) -> NodeSolution {
    let x = &result.x;
    let k = problem.layout.intervals();
    let (r, v) = problem.node_states(x);
    let dt: Vec<f64> = (0..k).map(|i| problem.duration(x, i)).collect();
    NodeSolution {
        layout: problem.layout,
        mode: problem.mode,
        total_time: dt.iter().sum(),
        u: (0..k).map(|i| problem.input(x, i)).collect(),
        dt,
        v,
        r,
        report: SolveReport {
            outer_iterations: result.outer_iterations,
            inner_iterations: result.inner_iterations,
            violation: result.violation,
            stationarity: result.stationarity,
            penalty: result.penalty,
            converged: result.converged,
            merit_monotone: result.merit_monotone(),
            fallback_attempts,
        },
    }
}

fn describe_violations(problem: &MinTimeProblem, result: &AlResult) -> String {
    let (mut c, mut g) = (Vec::new(), Vec::new());
    problem.evaluate(&result.x, &mut c, &mut g);
    let worst_c = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst_g = g.iter().fold(0.0f64, |m, v| m.max(*v));
    let n_g = g.iter().filter(|v| **v > 1e-6).count();
    format!(
        "{:?} mode: max equality residual {worst_c:.3e}, max inequality excess {worst_g:.3e} ({n_g} violated)",
        problem.mode
    )
}

/// Equality-mode solve from a conic warm start with the same layout.
///
/// Fails with [`PlanError::PlannerInfeasible`] when no point within the
/// feasibility tolerance is found, which is the cue for
/// [`solve_relaxed_fallback`].
pub fn solve_min_time(plan: &SurveyPlan, params: &PlannerParams, warm: &ConicSolution) -> Result<NodeSolution> {
    solve_min_time_with(plan, params, warm, &NlpSettings::from_params(params))
}

pub fn solve_min_time_with(
    plan: &SurveyPlan,
    params: &PlannerParams,
    warm: &ConicSolution,
    settings: &NlpSettings,
) -> Result<NodeSolution> {
    plan.validate()?;
    params.validate()?;
    check_warm(plan, warm, params.switching_points)?;
    let (problem, result) = attempt(plan, params, warm, InputMode::Sphere, settings);
    if result.violation <= params.eps_feas {
        Ok(extract(&problem, &result, 0))
    } else {
        Err(PlanError::PlannerInfeasible {
            switching_points: params.switching_points,
            violations: describe_violations(&problem, &result),
        })
    }
}

/// Relaxed-input retries with one more switching point per segment each time,
/// up to `params.max_switching_points`. Every retry is warm-started from a
/// fresh conic line search at its own layout; `warm` seeds the step bracket.
pub fn solve_relaxed_fallback(
    plan: &SurveyPlan,
    params: &PlannerParams,
    warm: &ConicSolution,
) -> Result<NodeSolution> {
    solve_relaxed_fallback_with(plan, params, warm, &NlpSettings::from_params(params)).map(|(s, _)| s)
}

/// As [`solve_relaxed_fallback`], also returning the warm start used by the
/// accepted attempt.
pub fn solve_relaxed_fallback_with(
    plan: &SurveyPlan,
    params: &PlannerParams,
    warm: &ConicSolution,
    settings: &NlpSettings,
) -> Result<(NodeSolution, ConicSolution)> {
    plan.validate()?;
    params.validate()?;
    let mut last = String::new();
    let mut attempts = 0;
    let mut s = params.switching_points;
    while s < params.max_switching_points {
        s += 1;
        attempts += 1;
        let p = PlannerParams {
            switching_points: s,
            ..params.clone()
        };
        let per_interval = warm.total_time() / (plan.len() - 1) as f64 / (s + 1) as f64;
        let dt_start = (2.0 * per_interval).max(1e-3);
        let (_, warm_s) = line_search_dt_auto(plan, &p, dt_start, settings.warm_tol_rel, 40)?;
        let (problem, result) = attempt(plan, &p, &warm_s, InputMode::Relaxed, settings);
        if result.violation <= params.eps_feas {
            return Ok((extract(&problem, &result, attempts), warm_s));
        }
        last = describe_violations(&problem, &result);
    }
    Err(PlanError::PlannerInfeasible {
        switching_points: s,
        violations: last,
    })
}

/// One relaxed-mode solve at the warm start's own layout.
pub fn solve_relaxed_at(
    plan: &SurveyPlan,
    params: &PlannerParams,
    warm: &ConicSolution,
    settings: &NlpSettings,
) -> Result<NodeSolution> {
    plan.validate()?;
    params.validate()?;
    check_warm(plan, warm, warm.layout.switching_points)?;
    let (problem, result) = attempt(plan, params, warm, InputMode::Relaxed, settings);
    if result.violation <= params.eps_feas {
        Ok(extract(&problem, &result, 0))
    } else {
        Err(PlanError::PlannerInfeasible {
            switching_points: warm.layout.switching_points,
            violations: describe_violations(&problem, &result),
        })
    }
}
