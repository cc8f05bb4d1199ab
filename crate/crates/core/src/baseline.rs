//! Bang-singular-bang benchmark: every axis runs its own double-integrator
//! minimum-time profile inside the input hypercube, slower axes are stretched
//! to the slowest one, and the vehicle stops at every waypoint.

use alloc::format;
use alloc::vec::Vec;

use crate::camera::SurveyPlan;
use crate::error::{PlanError, Result};
use crate::math::{abs, sqrt, Vec3};
use crate::params::PlannerParams;
use crate::trajectory::PiecewiseTrajectory;

/// Per-axis acceleration bound of the hypercube.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AxisBound {
    /// `ū/√3`: the cube inscribed in the thrust sphere.
    #[default]
    Inscribed,
    /// `ū` on every axis (corners exceed the sphere).
    PerAxis,
}

impl AxisBound {
    pub fn value(&self, u_max: f64) -> f64 {
        match self {
            AxisBound::Inscribed => u_max / sqrt(3.0),
            AxisBound::PerAxis => u_max,
        }
    }
}

/// Constant-acceleration phase of one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Phase {
    pub accel: f64,
    pub duration: f64,
}

/// Phases of one axis over a segment.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisSchedule {
    pub phases: Vec<Phase>,
    pub u_axis: f64,
}

impl AxisSchedule {
    pub fn duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Sign of each phase input: −1, 0 or +1.
    pub fn signs(&self) -> Vec<i8> {
        self.phases
            .iter()
            .map(|p| if p.accel > 0.0 { 1 } else if p.accel < 0.0 { -1 } else { 0 })
            .collect()
    }

    /// Final `(displacement, velocity)` from initial velocity `v0`.
    pub fn integrate(&self, v0: f64) -> (f64, f64) {
        self.phases.iter().fold((0.0, v0), |(x, v), p| {
            (x + v * p.duration + 0.5 * p.accel * p.duration * p.duration, v + p.accel * p.duration)
        })
    }
}

fn push(phases: &mut Vec<Phase>, accel: f64, duration: f64) {
    if duration > 1e-15 {
        phases.push(Phase { accel, duration });
    }
}

/// Accelerate with sign `+1` from `v0` to a peak (or cruise at `v_cap`), then
/// decelerate to `vf`. Returns `None` if this ordering cannot reach `(d, vf)`.
fn accel_first(d: f64, v0: f64, vf: f64, u: f64, v_cap: f64) -> Option<Vec<Phase>> {
    let peak_sq = u * d + 0.5 * (v0 * v0 + vf * vf);
    if peak_sq < 0.0 {
        return None;
    }
    let peak = sqrt(peak_sq);
    let tol = 1e-12 * (1.0 + peak);
    if peak + tol < v0 || peak + tol < vf {
        return None;
    }
    let mut phases = Vec::with_capacity(3);
    if peak <= v_cap {
        push(&mut phases, u, ((peak - v0) / u).max(0.0));
        push(&mut phases, -u, ((peak - vf) / u).max(0.0));
    } else {
        let ramp = (v_cap * v_cap - v0 * v0) / (2.0 * u) + (v_cap * v_cap - vf * vf) / (2.0 * u);
        push(&mut phases, u, ((v_cap - v0) / u).max(0.0));
        push(&mut phases, 0.0, ((d - ramp) / v_cap).max(0.0));
        push(&mut phases, -u, ((v_cap - vf) / u).max(0.0));
    }
    Some(phases)
}

fn negate(phases: Vec<Phase>) -> Vec<Phase> {
    phases
        .into_iter()
        .map(|p| Phase {
            accel: -p.accel,
            duration: p.duration,
        })
        .collect()
}

/// Closed-form minimum-time profile of a double integrator from `(0, v0)` to
/// `(d, vf)` with `|a| ≤ u_axis` and `|v| ≤ v_cap`.
pub fn plan_axis_min_time(d: f64, v0: f64, vf: f64, u_axis: f64, v_cap: f64) -> Result<AxisSchedule> {
    if !(u_axis > 0.0 && u_axis.is_finite()) {
        return Err(PlanError::InvalidParameter {
            name: "u_axis",
            reason: format!("must be positive, got {u_axis}"),
        });
    }
    if abs(v0) > v_cap || abs(vf) > v_cap || !d.is_finite() {
        return Err(PlanError::InfeasibleAxis(format!(
            "boundary speeds {v0}, {vf} exceed cap {v_cap}"
        )));
    }
    let candidates = [
        accel_first(d, v0, vf, u_axis, v_cap),
        accel_first(-d, -v0, -vf, u_axis, v_cap).map(negate),
    ];
    let best = candidates
        .into_iter()
        .flatten()
        .map(|phases| AxisSchedule { phases, u_axis })
        .min_by(|a, b| a.duration().total_cmp(&b.duration()))
        .ok_or_else(|| PlanError::InfeasibleAxis(format!("cannot reach d={d}, vf={vf} from v0={v0}")))?;
    Ok(best)
}

/// Profile lasting exactly `t_total`: ramp at full effort to a reduced cruise
/// speed, hold it, ramp to `vf`. Closed form from the quadratic in the cruise
/// speed; `None` when no such cruise speed exists.
pub fn stretch_axis(d: f64, v0: f64, vf: f64, u: f64, v_cap: f64, t_total: f64) -> Option<AxisSchedule> {
    let flip = d < 0.0 || (d == 0.0 && v0 + vf < 0.0);
    let (d, v0, vf) = if flip { (-d, -v0, -vf) } else { (d, v0, vf) };
    // distance(vc) = −vc²/u + vc (T + (v0 + vf)/u) − (v0² + vf²)/(2u) for vc ≥ v0, vf
    let b = u * t_total + v0 + vf;
    let c = 0.5 * (v0 * v0 + vf * vf) + u * d;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return None;
    }
    let vc = 0.5 * (b - sqrt(disc));
    let tol = 1e-9 * (1.0 + abs(vc));
    if vc + tol < v0.max(vf) || vc > v_cap + tol {
        return None;
    }
    let vc = vc.max(v0.max(vf));
    let t1 = (vc - v0) / u;
    let t3 = (vc - vf) / u;
    let t2 = t_total - t1 - t3;
    if t2 < -1e-9 * (1.0 + t_total) {
        return None;
    }
    let mut phases = Vec::with_capacity(3);
    push(&mut phases, u, t1);
    push(&mut phases, 0.0, t2.max(0.0));
    push(&mut phases, -u, t3);
    let phases = if flip { negate(phases) } else { phases };
    Some(AxisSchedule { phases, u_axis: u })
}

/// Synchronized three-axis profile of one waypoint segment.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BangSchedule {
    pub axes: [AxisSchedule; 3],
    pub duration: f64,
    /// Set when an axis could not be stretched and was padded with a dwell.
    pub dwell_inserted: bool,
}

/// Per-axis minimum times followed by stretching to the slowest axis.
pub fn plan_segment(w_a: Vec3, w_b: Vec3, v_a: Vec3, v_b: Vec3, params: &PlannerParams, bound: AxisBound) -> Result<BangSchedule> {
    let u = bound.value(params.u_max);
    let cap = params.v_axis_max;
    let mut axes: [AxisSchedule; 3] = Default::default();
    for a in 0..3 {
        axes[a] = plan_axis_min_time(w_b[a] - w_a[a], v_a[a], v_b[a], u, cap)?;
    }
    let duration = axes.iter().map(AxisSchedule::duration).fold(0.0, f64::max);
    let mut dwell_inserted = false;
    for a in 0..3 {
        if duration - axes[a].duration() <= 1e-12 * (1.0 + duration) {
            continue;
        }
        match stretch_axis(w_b[a] - w_a[a], v_a[a], v_b[a], u, cap, duration) {
            Some(s) => axes[a] = s,
            None if v_b[a] == 0.0 => {
                let pad = duration - axes[a].duration();
                push(&mut axes[a].phases, 0.0, pad);
                dwell_inserted = true;
            }
            None => {
                return Err(PlanError::InfeasibleAxis(format!(
                    "axis {a} cannot be stretched to {duration} s"
                )))
            }
        }
    }
    Ok(BangSchedule {
        axes,
        duration,
        dwell_inserted,
    })
}

/// Baseline plan through every waypoint, at rest at each one.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselinePlan {
    pub segments: Vec<BangSchedule>,
    pub waypoints: Vec<Vec3>,
    pub total_time: f64,
    pub bound: AxisBound,
}

pub fn plan_baseline(plan: &SurveyPlan, params: &PlannerParams, bound: AxisBound) -> Result<BaselinePlan> {
    plan.validate()?;
    params.validate()?;
    let segments = plan
        .waypoints
        .windows(2)
        .map(|w| plan_segment(w[0], w[1], Vec3::ZERO, Vec3::ZERO, params, bound))
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselinePlan {
        total_time: segments.iter().map(|s| s.duration).sum(),
        segments,
        waypoints: plan.waypoints.clone(),
        bound,
    })
}

impl BaselinePlan {
    pub fn waypoint_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.segments.len() + 1);
        let mut acc = 0.0;
        t.push(acc);
        for s in &self.segments {
            acc += s.duration;
            t.push(acc);
        }
        t
    }

    /// Merges the three axis phase lists of each segment into constant-input
    /// pieces.
    pub fn schedule(&self) -> Vec<(f64, Vec3)> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let mut cuts: Vec<f64> = Vec::new();
            for ax in &seg.axes {
                let mut t = 0.0;
                for p in &ax.phases {
                    t += p.duration;
                    cuts.push(t);
                }
            }
            cuts.push(seg.duration);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| abs(*a - *b) <= 1e-12 * (1.0 + seg.duration));
            let mut prev = 0.0;
            for &c in &cuts {
                let c = c.min(seg.duration);
                if c - prev <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (prev + c);
                let mut u = Vec3::ZERO;
                for (a, ax) in seg.axes.iter().enumerate() {
                    u[a] = accel_at(ax, mid);
                }
                out.push((c - prev, u));
                prev = c;
            }
        }
        out
    }

    pub fn to_trajectory(&self) -> PiecewiseTrajectory {
        let start = self.waypoints.first().copied().unwrap_or(Vec3::ZERO);
        PiecewiseTrajectory::from_schedule(start, Vec3::ZERO, &self.schedule(), self.waypoint_times())
    }
}

fn accel_at(ax: &AxisSchedule, t: f64) -> f64 {
    let mut acc = 0.0;
    for p in &ax.phases {
        if t < acc + p.duration {
            return p.accel;
        }
        acc += p.duration;
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64) -> bool {
        abs(a - b) < 1e-12 * (1.0 + abs(b))
    }

    #[test]
    fn rest_to_rest_bang_bang() {
        let s = plan_axis_min_time(10.0, 0.0, 0.0, 10.0, f64::INFINITY).unwrap();
        assert_eq!(s.signs(), vec![1, -1]);
        assert!(close(s.phases[0].duration, 1.0) && close(s.phases[1].duration, 1.0));
        let (x, v) = s.integrate(0.0);
        assert!(close(x, 10.0) && abs(v) < 1e-12);
    }

    #[test]
    fn capped_cruise() {
        let s = plan_axis_min_time(100.0, 0.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(s.signs(), vec![1, 0, -1]);
        let d: Vec<f64> = s.phases.iter().map(|p| p.duration).collect();
        assert!(close(d[0], 1.0) && close(d[1], 9.0) && close(d[2], 1.0), "{d:?}");
    }

    #[test]
    fn degenerate_and_negative() {
        let s = plan_axis_min_time(0.0, 0.0, 0.0, 10.0, 10.0).unwrap();
        assert!(s.phases.is_empty());
        let s = plan_axis_min_time(-10.0, 0.0, 0.0, 10.0, f64::INFINITY).unwrap();
        assert_eq!(s.signs(), vec![-1, 1]);
        assert!(plan_axis_min_time(1.0, 5.0, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn moving_boundaries_reach_target() {
        for &(d, v0, vf) in &[(5.0, 2.0, -1.0), (-3.0, 1.0, 1.0), (0.5, 3.0, 3.0), (10.0, -2.0, 2.0)] {
            let s = plan_axis_min_time(d, v0, vf, 2.0, 4.0).unwrap();
            let (x, v) = s.integrate(v0);
            assert!(abs(x - d) < 1e-9 && abs(v - vf) < 1e-9, "{d} {v0} {vf}: {x} {v}");
        }
    }

    #[test]
    fn diagonal_segment_stretches_short_axis() {
        let params = PlannerParams {
            u_max: 3f64.sqrt(),
            ..Default::default()
        };
        let seg = plan_segment(Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0), Vec3::ZERO, Vec3::ZERO, &params, AxisBound::Inscribed).unwrap();
        assert!(close(seg.duration, 4.0));
        assert!(close(seg.axes[0].duration(), 4.0));
        let (x, v) = seg.axes[0].integrate(0.0);
        assert!(abs(x - 3.0) < 1e-9 && abs(v) < 1e-9);
        assert!(!seg.dwell_inserted);
        assert!(seg.axes[2].phases.is_empty() || close(seg.axes[2].duration(), 4.0));
    }

    #[test]
    fn stretch_rest_to_rest_closed_form() {
        // vc = (uT − √(u²T² − 4ud))/2
        let (d, u, t) = (3.0, 1.0, 4.0);
        let s = stretch_axis(d, 0.0, 0.0, u, f64::INFINITY, t).unwrap();
        let vc = 0.5 * (u * t - (u * u * t * t - 4.0 * u * d).sqrt());
        assert!(close(s.phases[0].duration, vc / u));
        assert!(close(s.duration(), t));
    }
}
