//! Vehicle limits, discretization layout and solver tolerances.

use alloc::format;

use crate::error::{invalid, Result};
use crate::math::{sqrt, Vec3};

/// Vehicle limits and planner settings.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PlannerParams {
    /// Specific thrust bound ū, m/s². Radius of the admissible input sphere.
    pub u_max: f64,
    /// Per-axis speed bound v̄, m/s. `f64::INFINITY` disables the box.
    pub v_axis_max: f64,
    /// Speed bound at capture waypoints, m/s. `f64::INFINITY` disables it.
    pub v_blur: f64,
    /// Switching points per waypoint segment (S ≥ 1).
    pub switching_points: usize,
    /// Largest S tried by the relaxed fallback.
    pub max_switching_points: usize,
    /// Optional lower bound on the vertical input, m/s².
    pub u_z_min: Option<f64>,
    pub v_start: Vec3,
    pub v_end: Vec3,
    pub eps_feas: f64,
    pub eps_opt: f64,
    /// Intervals shorter than this (s) are treated as degenerate.
    pub eps_time: f64,
    /// Gravity magnitude, m/s². Recorded only: inputs are net accelerations.
    pub gravity: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            u_max: 12.0,
            v_axis_max: f64::INFINITY,
            v_blur: f64::INFINITY,
            switching_points: 1,
            max_switching_points: 5,
            u_z_min: None,
            v_start: Vec3::ZERO,
            v_end: Vec3::ZERO,
            eps_feas: 1e-6,
            eps_opt: 1e-6,
            eps_time: 1e-9,
            gravity: 9.81,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(invalid("u_max", format!("must be positive and finite, got {}", self.u_max)));
        }
        if !(self.v_axis_max > 0.0) {
            return Err(invalid("v_axis_max", format!("must be positive, got {}", self.v_axis_max)));
        }
        if !(self.v_blur > 0.0) {
            return Err(invalid("v_blur", format!("must be positive, got {}", self.v_blur)));
        }
        if self.switching_points < 1 {
            return Err(invalid("switching_points", "must be at least 1"));
        }
        if self.max_switching_points < self.switching_points {
            return Err(invalid(
                "max_switching_points",
                "must not be below switching_points",
            ));
        }
        if let Some(uz) = self.u_z_min {
            if !(uz.is_finite() && uz < self.u_max) {
                return Err(invalid("u_z_min", format!("must be finite and below u_max, got {uz}")));
            }
        }
        for (name, v) in [("v_start", self.v_start), ("v_end", self.v_end)] {
            if !v.is_finite() || v.max_abs() > self.v_axis_max || v.norm() > self.v_blur {
                return Err(invalid(name, "must respect the axis and blur speed bounds"));
            }
        }
        for (name, v) in [
            ("eps_feas", self.eps_feas),
            ("eps_opt", self.eps_opt),
            ("eps_time", self.eps_time),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// True when the blur bound can never bind because the axis box is tighter.
    pub fn blur_redundant(&self) -> bool {
        self.v_blur > sqrt(3.0) * self.v_axis_max
    }

    /// Speed radius applied at waypoint nodes of the conic relaxation. Also
    /// caps the magnitude by `v̄`, which keeps its solutions feasible for the
    /// nonlinear program.
    pub fn conic_waypoint_radius(&self) -> f64 {
        self.v_blur.min(self.v_axis_max)
    }
}

/// Index bookkeeping for `N` waypoints with `S` switching points per segment.
///
/// Each segment holds `S + 1` intervals; waypoint `n` sits at node `(S + 1)·n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layout {
    pub waypoints: usize,
    pub switching_points: usize,
}

impl Layout {
    pub fn new(waypoints: usize, switching_points: usize) -> Self {
        Layout {
            waypoints,
            switching_points,
        }
    }

    pub fn per_segment(&self) -> usize {
        self.switching_points + 1
    }

    pub fn segments(&self) -> usize {
        self.waypoints.saturating_sub(1)
    }

    pub fn intervals(&self) -> usize {
        self.per_segment() * self.segments()
    }

    pub fn nodes(&self) -> usize {
        self.intervals() + 1
    }

    pub fn waypoint_node(&self, n: usize) -> usize {
        self.per_segment() * n
    }

    /// Waypoint index if node `j` is a waypoint node.
    pub fn waypoint_at(&self, j: usize) -> Option<usize> {
        (j % self.per_segment() == 0).then(|| j / self.per_segment())
    }

    pub fn segment_of(&self, k: usize) -> usize {
        k / self.per_segment()
    }
}
