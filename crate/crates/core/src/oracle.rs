//! Independent checks that share no code with the solvers: RK4 replay of input
//! schedules, the closed-form 1-D minimum time, an exhaustive grid search for
//! tiny instances, and a constraint audit computed from sampled trajectories.

use alloc::format;
use alloc::vec::Vec;

use crate::baseline::BaselinePlan;
use crate::camera::SurveyPlan;
use crate::error::{invalid, PlanError, Result};
use crate::math::{abs, ceil, sqrt, Vec3};
use crate::params::PlannerParams;
use crate::trajectory::Trajectory;

/// Default integration step, 1 ms.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Classic fourth-order Runge-Kutta step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let shift = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &shift(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &shift(y, &k2, 0.5 * h));
    let k4 = f(t + h, &shift(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` with equal steps no longer
/// than `step`.
pub fn rk4_integrate<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t_end: f64, step: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let span = t_end - t0;
    if span <= 0.0 || !(step > 0.0) {
        return y0;
    }
    let n = ceil(span / step).max(1.0) as usize;
    let h = span / n as f64;
    let mut y = y0;
    for i in 0..n {
        y = rk4_step(&mut f, t0 + h * i as f64, &y, h);
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratedState {
    pub t: f64,
    pub r: Vec3,
    pub v: Vec3,
}

/// RK4 replay of `ṙ = v, v̇ = u(t)` for a schedule of `(duration, input)`
/// pairs. Steps are aligned to the schedule breakpoints so that each step
/// sees one constant input. Returns the state after every step.
pub fn forward_integrate(schedule: &[(f64, Vec3)], r0: Vec3, v0: Vec3, step: f64) -> Vec<IntegratedState> {
    let mut out = Vec::new();
    let (mut t, mut y) = (0.0, [r0.x(), r0.y(), r0.z(), v0.x(), v0.y(), v0.z()]);
    let unpack = |t: f64, y: &[f64; 6]| IntegratedState {
        t,
        r: Vec3::new(y[0], y[1], y[2]),
        v: Vec3::new(y[3], y[4], y[5]),
    };
    out.push(unpack(t, &y));
    for &(dt, u) in schedule {
        if !(dt > 0.0) {
            continue;
        }
        let n = ceil(dt / step).max(1.0) as usize;
        let h = dt / n as f64;
        let mut f = |_: f64, y: &[f64; 6]| [y[3], y[4], y[5], u.x(), u.y(), u.z()];
        for i in 0..n {
            y = rk4_step(&mut f, t, &y, h);
            // accumulate from the interval start to avoid drift in the clock
            let ti = if i + 1 == n { t + dt } else { t + h * (i + 1) as f64 };
            out.push(unpack(ti, &y));
        }
        t += dt;
        out.last_mut().unwrap().t = t;
    }
    out
}

/// Largest position gap between an RK4 replay and direct samples of `traj`.
pub fn replay_error<T: Trajectory + ?Sized>(traj: &T, schedule: &[(f64, Vec3)], step: f64) -> Result<f64> {
    let start = traj.sample(0.0)?;
    let mut worst = 0.0f64;
    for s in forward_integrate(schedule, start.r, start.v, step) {
        let t = s.t.min(traj.duration());
        worst = worst.max((traj.sample(t)?.r - s.r).max_abs());
    }
    Ok(worst)
}

/// Minimum rest-to-rest time over distance `d` with `|a| ≤ u_max` and
/// `|v| ≤ v_cap`.
pub fn analytic_min_time_1d(d: f64, u_max: f64, v_cap: f64) -> f64 {
    let d = abs(d);
    if sqrt(d * u_max) <= v_cap {
        2.0 * sqrt(d / u_max)
    } else {
        2.0 * v_cap / u_max + (d - v_cap * v_cap / u_max) / v_cap
    }
}

/// Grid search outcome.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BruteForceResult {
    pub time: f64,
    /// Largest total-time change between the best grid point and its feasible
    /// grid neighbours.
    pub cell: f64,
    /// Best interior waypoint velocity (three-waypoint plans only).
    pub interior_velocity: Option<Vec3>,
    /// Best switch fraction of every segment.
    pub fractions: Vec<f64>,
}

/// Two constant inputs over `dt1` then `dt2` taking `(0, va)` to `(d, vb)`.
/// Each axis is a 2×2 linear system.
fn two_interval_inputs(d: Vec3, va: Vec3, vb: Vec3, dt1: f64, dt2: f64) -> (Vec3, Vec3) {
    let t = dt1 + dt2;
    let det = -0.5 * dt1 * dt2 * t;
    let (a11, a12, a21, a22) = (dt1, dt2, 0.5 * dt1 * dt1 + dt1 * dt2, 0.5 * dt2 * dt2);
    let mut u1 = Vec3::ZERO;
    let mut u2 = Vec3::ZERO;
    for a in 0..3 {
        let dv = vb[a] - va[a];
        let dd = d[a] - va[a] * t;
        u1[a] = (a22 * dv - a12 * dd) / det;
        u2[a] = (a11 * dd - a21 * dv) / det;
    }
    (u1, u2)
}

struct SegmentSearch<'a> {
    params: &'a PlannerParams,
    fractions: Vec<f64>,
}

impl SegmentSearch<'_> {
    fn feasible(&self, d: Vec3, va: Vec3, vb: Vec3, f: f64, t: f64) -> bool {
        let p = self.params;
        let (dt1, dt2) = (f * t, (1.0 - f) * t);
        let (u1, u2) = two_interval_inputs(d, va, vb, dt1, dt2);
        let u_tol = p.u_max * (1.0 + 1e-12);
        if !(u1.norm() <= u_tol && u2.norm() <= u_tol) {
            return false;
        }
        if let Some(uz) = p.u_z_min {
            if u1.z() < uz || u2.z() < uz {
                return false;
            }
        }
        (va + u1 * dt1).max_abs() <= p.v_axis_max * (1.0 + 1e-12)
    }

    fn trivial(d: Vec3, va: Vec3, vb: Vec3) -> bool {
        d.max_abs() <= 1e-12 && (va - vb).max_abs() <= 1e-12
    }

    /// Smallest feasible duration at switch fraction `f`.
    fn min_time_at(&self, d: Vec3, va: Vec3, vb: Vec3, f: f64) -> Option<f64> {
        if Self::trivial(d, va, vb) {
            return Some(0.0);
        }
        let u = self.params.u_max;
        let mut hi = (va.norm() + vb.norm()) / u + 2.0 * sqrt(d.norm() / u) + 1e-3;
        let mut doublings = 0;
        while !self.feasible(d, va, vb, f, hi) {
            hi *= 2.0;
            doublings += 1;
            if doublings > 40 {
                return None;
            }
        }
        // the feasible set in T need not be an interval, so locate its first
        // entry on a scan before refining
        const SCAN: usize = 32;
        let mut lo = 0.0;
        for i in 1..=SCAN {
            let t = hi * i as f64 / SCAN as f64;
            if self.feasible(d, va, vb, f, t) {
                hi = t;
                break;
            }
            lo = t;
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.feasible(d, va, vb, f, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// `(time, fraction index)` minimized over the fraction grid.
    fn min_time(&self, d: Vec3, va: Vec3, vb: Vec3) -> Option<(f64, usize)> {
        if Self::trivial(d, va, vb) {
            return Some((0.0, self.fractions.len() / 2));
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, &f) in self.fractions.iter().enumerate() {
            if let Some(t) = self.min_time_at(d, va, vb, f) {
                if best.map_or(true, |(b, _)| t < b) {
                    best = Some((t, i));
                }
            }
        }
        best
    }
}

/// Exhaustive search over one switching point per segment for plans of two or
/// three waypoints. Free variables are the interior waypoint velocity
/// (`resolution` points per axis over `[−b, b]`) and the switch fraction of
/// each segment (`resolution` interior fractions). Every candidate is checked
/// for two-point boundary feasibility with `‖u‖ ≤ ū`, and its shortest
/// feasible duration is located by scan and bisection.
///
/// `b` is the smallest of `v̄`, `v_blur` and the speed reachable from the
/// boundary velocities over the whole path length.
pub fn brute_force_min_time(plan: &SurveyPlan, params: &PlannerParams, resolution: usize) -> Result<BruteForceResult> {
    plan.validate()?;
    params.validate()?;
    let n = plan.len();
    if n > 3 {
        return Err(invalid("plan", format!("grid search supports at most 3 waypoints, got {n}")));
    }
    if resolution < 2 {
        return Err(invalid("resolution", "needs at least 2 grid points"));
    }
    let search = SegmentSearch {
        params,
        fractions: (0..resolution).map(|i| (i as f64 + 0.5) / resolution as f64).collect(),
    };
    let w = &plan.waypoints;
    let (vs, ve) = (params.v_start, params.v_end);
    let infeasible = PlanError::GridInfeasible { resolution };

    if n == 2 {
        let d = w[1] - w[0];
        let (time, fi) = search.min_time(d, vs, ve).ok_or(infeasible)?;
        let mut cell = 0.0f64;
        for j in [fi.wrapping_sub(1), fi + 1] {
            if let Some(&f) = search.fractions.get(j) {
                if let Some(t) = search.min_time_at(d, vs, ve, f) {
                    cell = cell.max(abs(t - time));
                }
            }
        }
        return Ok(BruteForceResult {
            time,
            cell,
            interior_velocity: None,
            fractions: alloc::vec![search.fractions[fi]],
        });
    }

    let (d1, d2) = (w[1] - w[0], w[2] - w[1]);
    let reach = vs.norm().max(ve.norm()) + sqrt(2.0 * params.u_max * (d1.norm() + d2.norm()));
    let b = params.v_axis_max.min(params.v_blur).min(reach);
    let grid: Vec<f64> = (0..resolution)
        .map(|i| -b + 2.0 * b * i as f64 / (resolution - 1) as f64)
        .collect();
    let total = |v: Vec3| -> Option<(f64, usize, usize)> {
        if v.norm() > params.v_blur {
            return None;
        }
        let (t1, f1) = search.min_time(d1, vs, v)?;
        let (t2, f2) = search.min_time(d2, v, ve)?;
        Some((t1 + t2, f1, f2))
    };
    let mut best: Option<(f64, [usize; 3], usize, usize)> = None;
    for i in 0..resolution {
        for j in 0..resolution {
            for k in 0..resolution {
                let v = Vec3::new(grid[i], grid[j], grid[k]);
                if let Some((t, f1, f2)) = total(v) {
                    if best.map_or(true, |(bt, ..)| t < bt) {
                        best = Some((t, [i, j, k], f1, f2));
                    }
                }
            }
        }
    }
    let (time, idx, f1, f2) = best.ok_or(infeasible)?;
    let at = |idx: [usize; 3]| Vec3::new(grid[idx[0]], grid[idx[1]], grid[idx[2]]);
    let v_best = at(idx);
    let mut cell = 0.0f64;
    for a in 0..3 {
        for step in [-1isize, 1] {
            let j = idx[a] as isize + step;
            if j < 0 || j >= resolution as isize {
                continue;
            }
            let mut nb = idx;
            nb[a] = j as usize;
            if let Some((t, ..)) = total(at(nb)) {
                cell = cell.max(abs(t - time));
            }
        }
    }
    for (fi, d, va, vb) in [(f1, d1, vs, v_best), (f2, d2, v_best, ve)] {
        for j in [fi.wrapping_sub(1), fi + 1] {
            if let Some(&f) = search.fractions.get(j) {
                let own = search.min_time_at(d, va, vb, search.fractions[fi]);
                if let (Some(t), Some(o)) = (search.min_time_at(d, va, vb, f), own) {
                    cell = cell.max(abs(t - o));
                }
            }
        }
    }
    Ok(BruteForceResult {
        time,
        cell,
        interior_velocity: Some(v_best),
        fractions: alloc::vec![search.fractions[f1], search.fractions[f2]],
    })
}

/// Audit tolerance presets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ToleranceProfile {
    Strict,
    #[default]
    Default,
}

impl ToleranceProfile {
    pub fn tolerance(&self) -> f64 {
        match self {
            ToleranceProfile::Strict => 1e-8,
            ToleranceProfile::Default => 1e-6,
        }
    }
}

/// Constraint audit recomputed from trajectory samples only.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditReport {
    /// Distance from each waypoint to the trajectory at its scheduled time.
    pub waypoint_errors: Vec<f64>,
    pub waypoint_speeds: Vec<f64>,
    pub max_waypoint_error: f64,
    /// Largest waypoint speed excess over `v_blur`.
    pub blur_excess: f64,
    /// Waypoint with the largest blur excess, if any exceeds zero.
    pub worst_blur_waypoint: Option<usize>,
    pub worst_position_waypoint: Option<usize>,
    pub axis_excess: f64,
    /// `max (‖a‖ − ū)⁺` over dense samples.
    pub thrust_excess: f64,
    /// `max |‖a‖ − ū|` over dense samples; meaningful for sphere-mode plans.
    pub sphere_deviation: f64,
    pub u_z_excess: f64,
    pub boundary_velocity: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub total_time: f64,
    pub baseline_time: Option<f64>,
    /// `total_time − baseline_time` (negative when faster).
    pub delta_time: Option<f64>,
    pub relative_delta: Option<f64>,
    pub pass_strict: bool,
    pub pass_default: bool,
}

impl AuditReport {
    /// Worst violation over the families that decide pass or fail.
    pub fn max_violation(&self) -> f64 {
        [
            self.max_waypoint_error,
            self.blur_excess,
            self.axis_excess,
            self.thrust_excess,
            self.u_z_excess,
            self.boundary_velocity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self, profile: ToleranceProfile) -> bool {
        match profile {
            ToleranceProfile::Strict => self.pass_strict,
            ToleranceProfile::Default => self.pass_default,
        }
    }
}

/// Interior samples per polynomial piece in [`audit`].
const AUDIT_SAMPLES: usize = 8;

pub fn audit<T: Trajectory + ?Sized>(
    traj: &T,
    plan: &SurveyPlan,
    params: &PlannerParams,
    baseline: Option<&BaselinePlan>,
) -> AuditReport {
    let mut rep = AuditReport {
        total_time: traj.duration(),
        ..Default::default()
    };
    let times = traj.waypoint_times();
    let mut worst_pos = 0.0;
    let mut worst_blur = 0.0;
    for (n, w) in plan.waypoints.iter().enumerate() {
        let state = times.get(n).and_then(|&t| traj.sample(t).ok());
        let (err, speed) = match state {
            Some(s) => (s.r.distance(w), s.v.norm()),
            None => (f64::INFINITY, f64::INFINITY),
        };
        rep.waypoint_errors.push(err);
        rep.waypoint_speeds.push(speed);
        if err > worst_pos {
            worst_pos = err;
            rep.worst_position_waypoint = Some(n);
        }
        let excess = speed - params.v_blur;
        if excess > worst_blur {
            worst_blur = excess;
            rep.worst_blur_waypoint = Some(n);
        }
    }
    rep.max_waypoint_error = worst_pos;
    rep.blur_excess = worst_blur;

    let check_velocity = |v: Vec3, rep: &mut AuditReport| {
        rep.axis_excess = rep.axis_excess.max(v.max_abs() - params.v_axis_max);
        rep.max_speed = rep.max_speed.max(v.norm());
    };
    let breaks = traj.breakpoints();
    for &t in &breaks {
        if let Ok(s) = traj.sample(t.min(traj.duration())) {
            check_velocity(s.v, &mut rep);
        }
    }
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        for i in 0..AUDIT_SAMPLES {
            // strictly interior, so the piece is unambiguous
            let t = a + (b - a) * (i as f64 + 0.5) / AUDIT_SAMPLES as f64;
            let Ok(s) = traj.sample(t) else { continue };
            check_velocity(s.v, &mut rep);
            let an = s.a.norm();
            rep.max_accel = rep.max_accel.max(an);
            rep.thrust_excess = rep.thrust_excess.max(an - params.u_max);
            rep.sphere_deviation = rep.sphere_deviation.max(abs(an - params.u_max));
            if let Some(uz) = params.u_z_min {
                rep.u_z_excess = rep.u_z_excess.max(uz - s.a.z());
            }
        }
    }
    rep.boundary_velocity = match (traj.sample(0.0), traj.sample(traj.duration())) {
        (Ok(s0), Ok(s1)) => (s0.v - params.v_start)
            .max_abs()
            .max((s1.v - params.v_end).max_abs()),
        _ => f64::INFINITY,
    };
    if let Some(base) = baseline {
        let delta = rep.total_time - base.total_time;
        rep.baseline_time = Some(base.total_time);
        rep.delta_time = Some(delta);
        rep.relative_delta = Some(if base.total_time > 0.0 { delta / base.total_time } else { 0.0 });
    }
    let worst = rep.max_violation();
    rep.pass_strict = worst <= ToleranceProfile::Strict.tolerance();
    rep.pass_default = worst <= ToleranceProfile::Default.tolerance();
    rep
}
