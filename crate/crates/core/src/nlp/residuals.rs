//! Constraint check of a [`NodeSolution`] from its raw node states.

use alloc::vec::Vec;

use super::{InputMode, NodeSolution};
use crate::camera::SurveyPlan;
use crate::math::abs;
use crate::params::PlannerParams;

/// Worst violation per constraint family. Zero means satisfied.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    pub dynamics: f64,
    /// Max-norm state defect of every interval.
    pub dynamics_per_interval: Vec<f64>,
    /// Largest Euclidean distance from a waypoint node to its waypoint.
    pub waypoint: f64,
    /// Largest waypoint speed excess over `v_blur`.
    pub blur: f64,
    /// `max |‖u_k‖ − ū|` over non-degenerate intervals in sphere mode,
    /// `max (‖u_k‖ − ū)⁺` in relaxed mode.
    pub sphere: f64,
    pub axis_box: f64,
    pub u_z: f64,
    pub boundary_velocity: f64,
    /// Most negative duration, as a positive number.
    pub negative_dt: f64,
    /// Mismatch in layout sizes (nonzero means the other fields are unreliable).
    pub shape: usize,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        [
            self.dynamics,
            self.waypoint,
            self.blur,
            self.sphere,
            self.axis_box,
            self.u_z,
            self.boundary_velocity,
            self.negative_dt,
        ]
        .into_iter()
        .fold(if self.shape > 0 { f64::INFINITY } else { 0.0 }, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn evaluate_residuals(sol: &NodeSolution, plan: &SurveyPlan, params: &PlannerParams) -> ResidualReport {
    let l = sol.layout;
    let mut rep = ResidualReport::default();
    let k_total = l.intervals();
    let shape_ok = l.waypoints == plan.len()
        && sol.dt.len() == k_total
        && sol.u.len() == k_total
        && sol.v.len() == k_total + 1
        && sol.r.len() == k_total + 1;
    if !shape_ok {
        rep.shape = 1;
        return rep;
    }
    for k in 0..k_total {
        let (h, u) = (sol.dt[k], sol.u[k]);
        let r = sol.r[k] + sol.v[k] * h + u * (0.5 * h * h);
        let v = sol.v[k] + u * h;
        let d = (r - sol.r[k + 1]).max_abs().max((v - sol.v[k + 1]).max_abs());
        rep.dynamics_per_interval.push(d);
        rep.dynamics = rep.dynamics.max(d);
        rep.negative_dt = rep.negative_dt.max(-h);
        let excess = u.norm() - params.u_max;
        match sol.mode {
            InputMode::Sphere if h > params.eps_time => rep.sphere = rep.sphere.max(abs(excess)),
            _ => rep.sphere = rep.sphere.max(excess),
        }
        if let Some(uz) = params.u_z_min {
            rep.u_z = rep.u_z.max(uz - u.z());
        }
    }
    for (n, w) in plan.waypoints.iter().enumerate() {
        let j = l.waypoint_node(n);
        rep.waypoint = rep.waypoint.max(sol.r[j].distance(w));
        rep.blur = rep.blur.max(sol.v[j].norm() - params.v_blur);
    }
    // velocity is affine in time inside an interval, so node values bound it
    for v in &sol.v {
        rep.axis_box = rep.axis_box.max(v.max_abs() - params.v_axis_max);
    }
    rep.boundary_velocity = (sol.v[0] - params.v_start)
        .max_abs()
        .max((sol.v[k_total] - params.v_end).max_abs());
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::nlp::SolveReport;
    use crate::params::Layout;
    use alloc::vec;

    /// Hand-built rest-to-rest bang-bang over 10 m with ū = 10.
    fn analytic() -> (NodeSolution, SurveyPlan, PlannerParams) {
        let sol = NodeSolution {
            layout: Layout::new(2, 1),
            mode: InputMode::Sphere,
            dt: vec![1.0, 1.0],
            u: vec![Vec3::new(10.0, 0.0, 0.0), Vec3::new(-10.0, 0.0, 0.0)],
            v: vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0), Vec3::ZERO],
            r: vec![Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)],
            total_time: 2.0,
            report: SolveReport::default(),
        };
        let plan = SurveyPlan::from_waypoints(vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)]).unwrap();
        let params = PlannerParams {
            u_max: 10.0,
            ..Default::default()
        };
        (sol, plan, params)
    }

    #[test]
    fn analytic_solution_is_clean() {
        let (sol, plan, params) = analytic();
        let rep = evaluate_residuals(&sol, &plan, &params);
        assert!(rep.max() <= 1e-12, "{rep:?}");
    }

    #[test]
    fn perturbed_waypoint_reports_distance() {
        let (sol, mut plan, params) = analytic();
        plan.waypoints[1] = Vec3::new(10.1, 0.0, 0.0);
        let rep = evaluate_residuals(&sol, &plan, &params);
        assert!((rep.waypoint - 0.1).abs() < 1e-12);
        assert_eq!(rep.dynamics, 0.0);
    }

    #[test]
    fn perturbed_duration_is_local() {
        let (mut sol, plan, params) = analytic();
        sol.dt[1] += 0.01;
        let rep = evaluate_residuals(&sol, &plan, &params);
        assert_eq!(rep.dynamics_per_interval[0], 0.0);
        assert!(rep.dynamics_per_interval[1] > 0.0);
    }

    #[test]
    fn switching_node_speed_is_not_a_blur_violation() {
        let (sol, plan, mut params) = analytic();
        // middle node moves at 10 m/s, waypoints are at rest
        params.v_blur = 1.0;
        let rep = evaluate_residuals(&sol, &plan, &params);
        assert_eq!(rep.blur, 0.0);
    }
}
