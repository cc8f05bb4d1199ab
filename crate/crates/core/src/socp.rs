//! Fixed-step convex relaxation and the line search over its step.
//!
//! At a constant step `dt` the double-integrator recurrence is linear, so the
//! minimum-time problem turns into a second-order cone program in the node
//! states and per-interval inputs:
//!
//! ```text
//!   minimize  Σ σ_k
//!   s.t.      r_{k+1} = r_k + v_k dt + u_k dt²/2,   v_{k+1} = v_k + u_k dt
//!             r_j = w_n at waypoint nodes,  v_0, v_K fixed
//!             ‖u_k‖ ≤ σ_k,  ‖u_k‖ ≤ ū,  ‖v_j‖ ≤ min(v_blur, v̄) at waypoints
//!             |v_j| ≤ v̄ per axis,  u_z ≥ u_z_min (optional)
//! ```
//!
//! Feasibility of a step is decided by a phase-I program that minimizes a
//! common inflation `τ` of every bound; `dt` is feasible iff `τ* ≤ 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::SurveyPlan;
use crate::cone::{self, Cone, ConeProgram, ConeSettings, ConeStatus, SparseRow};
use crate::error::{invalid, PlanError, Result};
use crate::math::{abs, Vec3};
use crate::params::{Layout, PlannerParams};

/// Phase-I optimum at or below this counts as feasible.
const FEASIBLE_TAU: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Column indices of the decision variables.
#[derive(Clone, Copy, Debug)]
struct Columns {
    nodes: usize,
    intervals: usize,
    phase_one: bool,
}

impl Columns {
    fn r(&self, j: usize) -> usize {
        6 * j
    }
    fn v(&self, j: usize) -> usize {
        6 * j + 3
    }
    fn per_interval(&self) -> usize {
        if self.phase_one {
            3
        } else {
            4
        }
    }
    fn u(&self, k: usize) -> usize {
        6 * self.nodes + self.per_interval() * k
    }
    fn sigma(&self, k: usize) -> usize {
        debug_assert!(!self.phase_one);
        self.u(k) + 3
    }
    fn tau(&self) -> usize {
        debug_assert!(self.phase_one);
        6 * self.nodes + 3 * self.intervals
    }
    fn count(&self) -> usize {
        6 * self.nodes + self.per_interval() * self.intervals + usize::from(self.phase_one)
    }
}

/// Fixed-step relaxation ready to hand to the cone solver.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub layout: Layout,
    pub dt: f64,
    /// Minimum aggregate thrust at this step.
    pub program: ConeProgram,
    /// Smallest common inflation of the bounds that makes the step feasible.
    pub feasibility: ConeProgram,
    cols: Columns,
}

impl ConicProblem {
    pub fn node_count(&self) -> usize {
        self.layout.nodes()
    }

    pub fn interval_count(&self) -> usize {
        self.layout.intervals()
    }

    /// Node indices (0-based) pinned to waypoint positions.
    pub fn waypoint_nodes(&self) -> Vec<usize> {
        (0..self.layout.waypoints)
            .map(|n| self.layout.waypoint_node(n))
            .collect()
    }

    /// Number of velocity variables not fixed by boundary conditions.
    pub fn free_velocity_count(&self) -> usize {
        3 * self.node_count().saturating_sub(2)
    }

    /// Number of input plus slack variables.
    pub fn input_variable_count(&self) -> usize {
        4 * self.interval_count()
    }
}

/// Solution of the relaxation at one step.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub layout: Layout,
    pub dt: f64,
    pub u: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub r: Vec<Vec3>,
    /// `Σ σ_k`.
    pub objective: f64,
    /// Phase-I optimum: `≤ 0` iff the step is feasible.
    pub tau: f64,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn total_time(&self) -> f64 {
        self.dt * self.layout.intervals() as f64
    }
}

fn row(entries: &[(usize, f64)]) -> SparseRow {
    entries.iter().copied().filter(|(_, v)| *v != 0.0).collect()
}

/// Builds both the minimum-thrust and the phase-I programs for step `dt`.
pub fn build_socp(plan: &SurveyPlan, params: &PlannerParams, dt: f64) -> Result<ConicProblem> {
    plan.validate()?;
    params.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let layout = Layout::new(plan.len(), params.switching_points);
    let program = assemble(plan, params, layout, dt, false);
    let feasibility = assemble(plan, params, layout, dt, true);
    Ok(ConicProblem {
        layout,
        dt,
        program,
        feasibility,
        cols: Columns {
            nodes: layout.nodes(),
            intervals: layout.intervals(),
            phase_one: false,
        },
    })
}

fn assemble(
    plan: &SurveyPlan,
    params: &PlannerParams,
    layout: Layout,
    dt: f64,
    phase_one: bool,
) -> ConeProgram {
    let nodes = layout.nodes();
    let intervals = layout.intervals();
    let cols = Columns {
        nodes,
        intervals,
        phase_one,
    };
    let mut p = ConeProgram::new(cols.count());
    let node_stage = |j: usize| 2.0 * j as f64;
    let interval_stage = |k: usize| 2.0 * k as f64 + 1.0;
    for j in 0..nodes {
        for a in 0..3 {
            p.var_stage[cols.r(j) + a] = node_stage(j);
            p.var_stage[cols.v(j) + a] = node_stage(j);
        }
    }
    for k in 0..intervals {
        for a in 0..cols.per_interval() {
            p.var_stage[cols.u(k) + a] = interval_stage(k);
        }
        if !phase_one {
            p.c[cols.sigma(k)] = 1.0;
        }
    }
    if phase_one {
        p.c[cols.tau()] = 1.0;
        p.border.push(cols.tau());
    }

    // dynamics
    let h2 = 0.5 * dt * dt;
    for k in 0..intervals {
        let stage = interval_stage(k) + 0.5;
        for a in 0..3 {
            p.add_eq(
                row(&[
                    (cols.r(k + 1) + a, 1.0),
                    (cols.r(k) + a, -1.0),
                    (cols.v(k) + a, -dt),
                    (cols.u(k) + a, -h2),
                ]),
                0.0,
                stage,
            );
            p.add_eq(
                row(&[
                    (cols.v(k + 1) + a, 1.0),
                    (cols.v(k) + a, -1.0),
                    (cols.u(k) + a, -dt),
                ]),
                0.0,
                stage,
            );
        }
    }
    // waypoint positions and boundary velocities
    for (n, w) in plan.waypoints.iter().enumerate() {
        let j = layout.waypoint_node(n);
        for a in 0..3 {
            p.add_eq(row(&[(cols.r(j) + a, 1.0)]), w[a], node_stage(j) + 0.1);
        }
    }
    for (j, v) in [(0, params.v_start), (nodes - 1, params.v_end)] {
        for a in 0..3 {
            p.add_eq(row(&[(cols.v(j) + a, 1.0)]), v[a], node_stage(j) + 0.1);
        }
    }

    // cone rows are written as s = h - G x; `slack` builds s_i = c + Σ coeff·x
    let slack = |terms: &[(usize, f64)]| -> SparseRow {
        terms
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|&(i, v)| (i, -v))
            .collect()
    };
    let tau = if phase_one { Some(cols.tau()) } else { None };
    // s_0 = limit (1 + τ)
    let radius = |limit: f64| -> (SparseRow, f64) {
        match tau {
            Some(t) => (slack(&[(t, limit)]), limit),
            None => (Vec::new(), limit),
        }
    };

    for k in 0..intervals {
        if !phase_one {
            let mut rows = vec![slack(&[(cols.sigma(k), 1.0)])];
            rows.extend((0..3).map(|a| slack(&[(cols.u(k) + a, 1.0)])));
            p.add_cone(Cone::Soc(4), rows, vec![0.0; 4]);
        }
        let (r0, h0) = radius(params.u_max);
        let mut rows = vec![r0];
        rows.extend((0..3).map(|a| slack(&[(cols.u(k) + a, 1.0)])));
        p.add_cone(Cone::Soc(4), rows, vec![h0, 0.0, 0.0, 0.0]);
        if let Some(uz) = params.u_z_min {
            // u_z - u_z_min + |u_z_min| τ ≥ 0
            let mut terms = vec![(cols.u(k) + 2, 1.0)];
            if let Some(t) = tau {
                terms.push((t, abs(uz).max(1.0)));
            }
            p.add_cone(Cone::Nonneg(1), vec![slack(&terms)], vec![-uz]);
        }
    }

    let wp_radius = params.conic_waypoint_radius();
    let v_bar = params.v_axis_max;
    for j in 1..nodes.saturating_sub(1) {
        if wp_radius.is_finite() && layout.waypoint_at(j).is_some() {
            let (r0, h0) = radius(wp_radius);
            let mut rows = vec![r0];
            rows.extend((0..3).map(|a| slack(&[(cols.v(j) + a, 1.0)])));
            p.add_cone(Cone::Soc(4), rows, vec![h0, 0.0, 0.0, 0.0]);
        }
        if v_bar.is_finite() {
            let mut rows = Vec::with_capacity(6);
            for sign in [1.0, -1.0] {
                for a in 0..3 {
                    // v̄(1 + τ) ∓ v ≥ 0
                    let mut terms = vec![(cols.v(j) + a, -sign)];
                    if let Some(t) = tau {
                        terms.push((t, v_bar));
                    }
                    rows.push(slack(&terms));
                }
            }
            p.add_cone(Cone::Nonneg(6), rows, vec![v_bar; 6]);
        }
    }
    p
}

fn cone_settings() -> ConeSettings {
    ConeSettings::default()
}

fn unpack(
    problem: &ConicProblem,
    x: &[f64],
    status: ConicStatus,
    tau: f64,
    iterations: usize,
) -> ConicSolution {
    let cols = problem.cols;
    let vec3 = |i: usize| Vec3::new(x[i], x[i + 1], x[i + 2]);
    let u: Vec<Vec3> = (0..cols.intervals).map(|k| vec3(cols.u(k))).collect();
    ConicSolution {
        status,
        layout: problem.layout,
        dt: problem.dt,
        objective: u.iter().map(Vec3::norm).sum(),
        u,
        v: (0..cols.nodes).map(|j| vec3(cols.v(j))).collect(),
        r: (0..cols.nodes).map(|j| vec3(cols.r(j))).collect(),
        tau,
        iterations,
    }
}

/// Phase-I optimum `τ*` for the problem's step.
pub fn feasibility_margin(problem: &ConicProblem) -> Result<f64> {
    let sol = cone::solve(&problem.feasibility, &cone_settings());
    match sol.status {
        ConeStatus::Optimal => Ok(sol.primal_objective),
        ConeStatus::MaxIterations if sol.primal_residual < 1e-6 => Ok(sol.primal_objective),
        status => Err(PlanError::ConicFailure(format!(
            "feasibility program ended with {status:?} at dt = {}",
            problem.dt
        ))),
    }
}

/// Solves the relaxation. Infeasible steps come back with status `Infeasible`
/// and `tau` holding the bound inflation that would be required.
pub fn solve_socp(problem: &ConicProblem) -> Result<ConicSolution> {
    let tau = feasibility_margin(problem)?;
    if tau > FEASIBLE_TAU {
        let n = problem.program.n;
        return Ok(unpack(problem, &vec![0.0; n], ConicStatus::Infeasible, tau, 0));
    }
    let sol = cone::solve(&problem.program, &cone_settings());
    let status = match sol.status {
        ConeStatus::Optimal => ConicStatus::Optimal,
        ConeStatus::MaxIterations => ConicStatus::MaxIterations,
        ConeStatus::NumericalFailure => {
            return Err(PlanError::ConicFailure(format!(
                "numerical failure at dt = {}",
                problem.dt
            )))
        }
    };
    Ok(unpack(problem, &sol.x, status, tau, sol.iterations))
}

fn is_feasible(plan: &SurveyPlan, params: &PlannerParams, dt: f64) -> Result<(bool, f64)> {
    let problem = build_socp(plan, params, dt)?;
    let tau = feasibility_margin(&problem)?;
    Ok((tau <= FEASIBLE_TAU, tau))
}

fn solve_at(plan: &SurveyPlan, params: &PlannerParams, dt: f64) -> Result<ConicSolution> {
    let sol = solve_socp(&build_socp(plan, params, dt)?)?;
    match sol.status {
        ConicStatus::Optimal => Ok(sol),
        status => Err(PlanError::ConicFailure(format!(
            "relaxation at dt = {dt} ended with {status:?}"
        ))),
    }
}

/// Smallest feasible constant step in `[dt_lo, dt_hi]` to within `tol_dt`, by
/// bisection. Returns the upper end of the final bracket, which is feasible.
pub fn line_search_dt(
    plan: &SurveyPlan,
    params: &PlannerParams,
    dt_lo: f64,
    dt_hi: f64,
    tol_dt: f64,
) -> Result<(f64, ConicSolution)> {
    if !(dt_lo > 0.0 && dt_lo < dt_hi && dt_hi.is_finite()) {
        return Err(invalid("dt_lo", format!("need 0 < dt_lo < dt_hi, got [{dt_lo}, {dt_hi}]")));
    }
    if !(tol_dt > 0.0) {
        return Err(invalid("tol_dt", "must be positive"));
    }
    let (ok_hi, tau_hi) = is_feasible(plan, params, dt_hi)?;
    if !ok_hi {
        return Err(PlanError::NoFeasibleStep {
            dt_hi,
            scaling: 1.0 + tau_hi,
        });
    }
    if is_feasible(plan, params, dt_lo)?.0 {
        return Ok((dt_lo, solve_at(plan, params, dt_lo)?));
    }
    let (mut lo, mut hi) = (dt_lo, dt_hi);
    for _ in 0..60 {
        if hi - lo <= tol_dt {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if is_feasible(plan, params, mid)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, solve_at(plan, params, hi)?))
}

/// Like [`line_search_dt`] but finds its own bracket: doubles `dt_start` until
/// feasible (at most `max_doublings` times), then halves until infeasible.
pub fn line_search_dt_auto(
    plan: &SurveyPlan,
    params: &PlannerParams,
    dt_start: f64,
    tol_rel: f64,
    max_doublings: usize,
) -> Result<(f64, ConicSolution)> {
    let mut hi = dt_start;
    let mut tau = f64::INFINITY;
    let mut found = false;
    for _ in 0..=max_doublings {
        let (ok, t) = is_feasible(plan, params, hi)?;
        tau = t;
        if ok {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Err(PlanError::NoFeasibleStep {
            dt_hi: hi / 2.0,
            scaling: 1.0 + tau,
        });
    }
    let mut lo = 0.5 * hi;
    for _ in 0..40 {
        if !is_feasible(plan, params, lo)?.0 {
            break;
        }
        hi = lo;
        lo *= 0.5;
    }
    let floor = hi * 1e-9;
    if lo < floor {
        return Ok((hi, solve_at(plan, params, hi)?));
    }
    line_search_dt(plan, params, lo, hi, tol_rel * hi)
}

/// Worst violation of each constraint family, recomputed from the solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicResiduals {
    pub dynamics: f64,
    pub waypoint: f64,
    pub boundary_velocity: f64,
    pub thrust_cap: f64,
    pub waypoint_speed: f64,
    pub axis_box: f64,
    pub u_z: f64,
}

impl ConicResiduals {
    pub fn max(&self) -> f64 {
        [
            self.dynamics,
            self.waypoint,
            self.boundary_velocity,
            self.thrust_cap,
            self.waypoint_speed,
            self.axis_box,
            self.u_z,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks a relaxation solution against its constraints directly.
pub fn conic_residuals(
    sol: &ConicSolution,
    plan: &SurveyPlan,
    params: &PlannerParams,
) -> ConicResiduals {
    let l = sol.layout;
    let dt = sol.dt;
    let mut res = ConicResiduals::default();
    for k in 0..l.intervals() {
        let r = sol.r[k] + sol.v[k] * dt + sol.u[k] * (0.5 * dt * dt);
        let v = sol.v[k] + sol.u[k] * dt;
        res.dynamics = res
            .dynamics
            .max((r - sol.r[k + 1]).max_abs())
            .max((v - sol.v[k + 1]).max_abs());
        res.thrust_cap = res.thrust_cap.max(sol.u[k].norm() - params.u_max);
        if let Some(uz) = params.u_z_min {
            res.u_z = res.u_z.max(uz - sol.u[k].z());
        }
    }
    for (n, w) in plan.waypoints.iter().enumerate() {
        let j = l.waypoint_node(n);
        res.waypoint = res.waypoint.max(sol.r[j].distance(w));
        res.waypoint_speed = res
            .waypoint_speed
            .max(sol.v[j].norm() - params.conic_waypoint_radius());
    }
    res.boundary_velocity = (sol.v[0] - params.v_start)
        .max_abs()
        .max((sol.v[l.nodes() - 1] - params.v_end).max_abs());
    for v in &sol.v {
        res.axis_box = res.axis_box.max(v.max_abs() - params.v_axis_max);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(d: f64) -> SurveyPlan {
        SurveyPlan::from_waypoints(vec![Vec3::ZERO, Vec3::new(d, 0.0, 0.0)]).unwrap()
    }

    fn params(u_max: f64, s: usize) -> PlannerParams {
        PlannerParams {
            u_max,
            switching_points: s,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_waypoint_nodes() {
        let p = build_socp(&line(10.0), &params(10.0, 1), 1.0).unwrap();
        assert_eq!((p.node_count(), p.interval_count()), (3, 2));
        assert_eq!(p.free_velocity_count(), 3);
        assert_eq!(p.input_variable_count(), 8);
        let plan3 = SurveyPlan::from_waypoints(vec![
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ])
        .unwrap();
        let p = build_socp(&plan3, &params(10.0, 1), 1.0).unwrap();
        assert_eq!(p.waypoint_nodes(), vec![0, 2, 4]);
        let p = build_socp(&line(10.0), &params(10.0, 3), 1.0).unwrap();
        assert_eq!((p.node_count(), p.interval_count()), (5, 4));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_socp(&line(10.0), &params(10.0, 1), 0.0).is_err());
        let mut single = line(10.0);
        single.waypoints.pop();
        assert!(matches!(
            build_socp(&single, &params(10.0, 1), 1.0),
            Err(PlanError::InvalidPlan(_))
        ));
    }

    #[test]
    fn bang_bang_step_is_feasible_at_the_limit() {
        let pr = build_socp(&line(10.0), &params(10.0, 1), 1.0).unwrap();
        let sol = solve_socp(&pr).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        for u in &sol.u {
            assert!(abs(u.norm() - 10.0) < 1e-5, "{:?}", u);
        }
        let res = conic_residuals(&sol, &line(10.0), &params(10.0, 1));
        assert!(res.max() < 1e-7, "{res:?}");
    }

    #[test]
    fn half_step_is_infeasible() {
        let pr = build_socp(&line(10.0), &params(10.0, 1), 0.5).unwrap();
        let sol = solve_socp(&pr).unwrap();
        assert_eq!(sol.status, ConicStatus::Infeasible);
        // needs 4x the thrust: τ = 3
        assert!(abs(sol.tau - 3.0) < 1e-6, "{}", sol.tau);
    }

    #[test]
    fn coincident_waypoints_need_no_thrust() {
        let mut plan = line(0.0);
        plan.allow_coincident = true;
        let pr = build_socp(&plan, &params(10.0, 1), 0.7).unwrap();
        let sol = solve_socp(&pr).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!(sol.objective < 1e-7);
    }

    #[test]
    fn line_search_finds_unit_step() {
        let (dt, sol) = line_search_dt(&line(10.0), &params(10.0, 1), 0.1, 5.0, 1e-3).unwrap();
        assert!(abs(dt - 1.0) <= 1e-3, "{dt}");
        assert!(dt >= 1.0 - 1e-9);
        assert_eq!(sol.status, ConicStatus::Optimal);
    }

    #[test]
    fn line_search_degenerate_and_infeasible_bracket() {
        let mut plan = line(0.0);
        plan.allow_coincident = true;
        let (dt, _) = line_search_dt(&plan, &params(10.0, 1), 0.1, 5.0, 1e-3).unwrap();
        assert_eq!(dt, 0.1);
        let err = line_search_dt(&line(10.0), &params(10.0, 1), 0.1, 0.5, 1e-3).unwrap_err();
        assert!(matches!(err, PlanError::NoFeasibleStep { .. }));
    }

    #[test]
    fn capped_line_search_respects_cruise_time() {
        let p = PlannerParams {
            v_axis_max: 10.0,
            ..params(10.0, 3)
        };
        let (dt, sol) = line_search_dt(&line(100.0), &p, 0.1, 10.0, 1e-3).unwrap();
        assert!(4.0 * dt >= 11.0, "{dt}");
        assert!(conic_residuals(&sol, &line(100.0), &p).max() < 1e-7);
    }
}
