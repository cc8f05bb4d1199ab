//! Conic warm start, equality-mode solve and relaxed fallback in sequence.

use crate::camera::SurveyPlan;
use crate::error::{PlanError, Result};
use crate::math::sqrt;
use crate::nlp::{self, NlpSettings, NodeSolution};
use crate::params::PlannerParams;
use crate::socp::{line_search_dt_auto, ConicSolution};

#[derive(Clone, Debug)]
pub struct PlannerConfig {
    /// Initial upper bracket of the step search; `None` picks one from the
    /// longest segment.
    pub dt_start: Option<f64>,
    /// Bisection tolerance relative to the bracket.
    pub tol_rel: f64,
    pub nlp: NlpSettings,
}

impl PlannerConfig {
    pub fn from_params(params: &PlannerParams) -> Self {
        PlannerConfig {
            dt_start: None,
            tol_rel: 1e-4,
            nlp: NlpSettings::from_params(params),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub solution: NodeSolution,
    /// Warm start of the accepted attempt.
    pub warm: ConicSolution,
    /// Why equality mode was abandoned, if it was.
    pub equality_failure: Option<PlanError>,
}

impl PlanOutcome {
    /// Total time of the fixed-step warm start.
    pub fn warm_time(&self) -> f64 {
        self.warm.total_time()
    }
}

fn initial_step(plan: &SurveyPlan, params: &PlannerParams) -> f64 {
    let longest = plan
        .waypoints
        .windows(2)
        .map(|w| w[0].distance(&w[1]))
        .fold(0.0, f64::max);
    let u = params.u_max;
    let cap = params.v_axis_max;
    let t = if sqrt(longest * u) <= cap {
        2.0 * sqrt(longest / u)
    } else {
        2.0 * cap / u + (longest - cap * cap / u) / cap
    };
    (1.5 * t / (params.switching_points + 1) as f64).max(1e-2)
}

pub fn plan_min_time(plan: &SurveyPlan, params: &PlannerParams) -> Result<PlanOutcome> {
    plan_min_time_with(plan, params, &PlannerConfig::from_params(params))
}

pub fn plan_min_time_with(
    plan: &SurveyPlan,
    params: &PlannerParams,
    config: &PlannerConfig,
) -> Result<PlanOutcome> {
    plan.validate()?;
    params.validate()?;
    let dt_start = config.dt_start.unwrap_or_else(|| initial_step(plan, params));
    let (_, warm) = line_search_dt_auto(plan, params, dt_start, config.tol_rel, 40)?;
    match nlp::solve_min_time_with(plan, params, &warm, &config.nlp) {
        Ok(solution) => Ok(PlanOutcome {
            solution,
            warm,
            equality_failure: None,
        }),
        Err(err @ PlanError::PlannerInfeasible { .. }) => {
            let (solution, warm) = nlp::solve_relaxed_fallback_with(plan, params, &warm, &config.nlp)?;
            Ok(PlanOutcome {
                solution,
                warm,
                equality_failure: Some(err),
            })
        }
        Err(e) => Err(e),
    }
}
