use alloc::string::String;

use thiserror::Error;

/// Errors raised across the planning pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid survey plan: {0}")]
    InvalidPlan(String),

    #[error("warm start does not match the problem layout: {0}")]
    InvalidWarmStart(String),

    #[error(
        "no feasible constant step up to dt = {dt_hi} s (constraint scaling {scaling:.3e}); \
         raise the upper bracket or add switching points"
    )]
    NoFeasibleStep { dt_hi: f64, scaling: f64 },

    #[error("conic solver failed: {0}")]
    ConicFailure(String),

    #[error("planner infeasible with {switching_points} switching points: {violations}")]
    PlannerInfeasible {
        switching_points: usize,
        violations: String,
    },

    #[error("solution residuals exceed tolerance ({residual:.3e} > {tolerance:.3e})")]
    StaleSolution { residual: f64, tolerance: f64 },

    #[error("time {t} s outside trajectory span [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },

    #[error("axis boundary condition unreachable: {0}")]
    InfeasibleAxis(String),

    #[error("no feasible point on the search grid at resolution {resolution}")]
    GridInfeasible { resolution: usize },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PlanError {
    PlanError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub type Result<T> = core::result::Result<T, PlanError>;
