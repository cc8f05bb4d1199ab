//! Continuous trajectories: the exact piecewise constant-acceleration form and
//! its midpoint-constrained quartic smoothing.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{PlanError, Result};
use crate::linalg::DenseMatrix;
use crate::math::Vec3;
use crate::nlp::{evaluate_residuals, NodeSolution};
use crate::params::PlannerParams;
use crate::camera::SurveyPlan;

/// Position, velocity and acceleration at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct State {
    pub r: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

/// Anything that can be sampled over `[0, duration]`.
pub trait Trajectory {
    fn duration(&self) -> f64;
    fn sample(&self, t: f64) -> Result<State>;
    /// Scheduled waypoint passage times.
    fn waypoint_times(&self) -> &[f64];
    /// Instants bracketing every polynomial piece (for dense checks).
    fn breakpoints(&self) -> Vec<f64>;

    /// `n + 1` evenly spaced samples including both ends.
    fn sample_uniform(&self, n: usize) -> Vec<(f64, State)> {
        let t_end = self.duration();
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = if i == n { t_end } else { t_end * i as f64 / n as f64 };
                (t, self.sample(t).expect("sample inside span"))
            })
            .collect()
    }
}

/// Column names of a trajectory export row.
pub const CSV_HEADER: &str = "t,x,y,z,vx,vy,vz,ax,ay,az,speed,accel";

/// Values of one export row, in [`CSV_HEADER`] order.
pub fn csv_row(t: f64, s: &State) -> [f64; 12] {
    [
        t,
        s.r.x(),
        s.r.y(),
        s.r.z(),
        s.v.x(),
        s.v.y(),
        s.v.z(),
        s.a.x(),
        s.a.y(),
        s.a.z(),
        s.v.norm(),
        s.a.norm(),
    ]
}

/// Samples at `k / rate_hz` for every `k` inside the span, plus the final
/// instant.
pub fn sample_at_rate<T: Trajectory + ?Sized>(traj: &T, rate_hz: f64) -> Result<Vec<(f64, State)>> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(crate::error::invalid("sample_rate_hz", format!("must be positive, got {rate_hz}")));
    }
    let end = traj.duration();
    let n = libm::floor(end * rate_hz) as usize;
    let mut out = Vec::with_capacity(n + 2);
    for k in 0..=n {
        let t = k as f64 / rate_hz;
        if t < end {
            out.push((t, traj.sample(t)?));
        }
    }
    out.push((end, traj.sample(end)?));
    Ok(out)
}

fn out_of_range(t: f64, duration: f64) -> PlanError {
    PlanError::OutOfRange { t, duration }
}

fn check_time(t: f64, duration: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + duration);
    if t.is_nan() || t < -slack || t > duration + slack {
        Err(out_of_range(t, duration))
    } else {
        Ok(())
    }
}

/// One constant-acceleration piece.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub t_start: f64,
    pub t_end: f64,
    pub r_start: Vec3,
    pub v_start: Vec3,
    pub u: Vec3,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// State at local time `tau ∈ [0, duration]`.
    pub fn at(&self, tau: f64) -> State {
        State {
            r: self.r_start + self.v_start * tau + self.u * (0.5 * tau * tau),
            v: self.v_start + self.u * tau,
            a: self.u,
        }
    }

    pub fn end(&self) -> State {
        self.at(self.duration())
    }
}

/// Piecewise-constant-acceleration trajectory.
///
/// Pieces are closed on the left only for the first one: at a shared instant
/// the earlier piece is evaluated, so the acceleration reported at a switch is
/// the one in force just before it.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiecewiseTrajectory {
    pub intervals: Vec<Interval>,
    pub waypoint_times: Vec<f64>,
    pub duration: f64,
}

impl PiecewiseTrajectory {
    /// Rolls a schedule of `(duration, input)` pairs forward from `(r0, v0)`.
    pub fn from_schedule(r0: Vec3, v0: Vec3, schedule: &[(f64, Vec3)], waypoint_times: Vec<f64>) -> Self {
        let mut intervals = Vec::with_capacity(schedule.len());
        let (mut t, mut r, mut v) = (0.0, r0, v0);
        // an empty schedule still keeps its start state
        let rest = [(0.0, Vec3::ZERO)];
        let schedule = if schedule.is_empty() { &rest[..] } else { schedule };
        for &(dt, u) in schedule {
            let iv = Interval {
                t_start: t,
                t_end: t + dt,
                r_start: r,
                v_start: v,
                u,
            };
            let end = iv.end();
            r = end.r;
            v = end.v;
            t += dt;
            intervals.push(iv);
        }
        PiecewiseTrajectory {
            intervals,
            waypoint_times,
            duration: t,
        }
    }

    /// Largest position or velocity jump between consecutive pieces.
    pub fn continuity_error(&self) -> f64 {
        self.intervals
            .windows(2)
            .map(|w| {
                let e = w[0].end();
                (e.r - w[1].r_start).max_abs().max((e.v - w[1].v_start).max_abs())
            })
            .fold(0.0, f64::max)
    }

    /// `(duration, input)` of every piece.
    pub fn schedule(&self) -> Vec<(f64, Vec3)> {
        self.intervals.iter().map(|iv| (iv.duration(), iv.u)).collect()
    }

    fn locate(&self, t: f64) -> Option<&Interval> {
        // first piece with positive length whose end is at or after t
        let idx = self.intervals.partition_point(|iv| iv.t_end < t);
        self.intervals[idx.min(self.intervals.len().saturating_sub(1))..]
            .iter()
            .find(|iv| iv.t_end > iv.t_start)
    }
}

impl Trajectory for PiecewiseTrajectory {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn sample(&self, t: f64) -> Result<State> {
        check_time(t, self.duration)?;
        let t = t.clamp(0.0, self.duration);
        match self.locate(t) {
            Some(iv) => Ok(iv.at(t - iv.t_start)),
            None => {
                // every piece is degenerate: the vehicle never moves
                let first = self.intervals.first().ok_or_else(|| out_of_range(t, 0.0))?;
                Ok(State {
                    r: first.r_start,
                    v: first.v_start,
                    a: Vec3::ZERO,
                })
            }
        }
    }

    fn waypoint_times(&self) -> &[f64] {
        &self.waypoint_times
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.intervals.iter().map(|iv| iv.t_start).collect();
        b.push(self.duration);
        b
    }
}

/// Closed-form trajectory of a solved plan, using its node states directly.
/// Refuses solutions whose residuals exceed `params.eps_feas`.
pub fn interpolate(sol: &NodeSolution, plan: &SurveyPlan, params: &PlannerParams) -> Result<PiecewiseTrajectory> {
    let rep = evaluate_residuals(sol, plan, params);
    if !rep.within(params.eps_feas) {
        return Err(PlanError::StaleSolution {
            residual: rep.max(),
            tolerance: params.eps_feas,
        });
    }
    let times = sol.node_times();
    let intervals = (0..sol.dt.len())
        .map(|k| Interval {
            t_start: times[k],
            t_end: times[k + 1],
            r_start: sol.r[k],
            v_start: sol.v[k],
            u: sol.u[k],
        })
        .collect();
    Ok(PiecewiseTrajectory {
        intervals,
        waypoint_times: sol.waypoint_times(),
        duration: times[times.len() - 1],
    })
}

/// Quartic `a₀ + a₁τ + a₂τ² + a₃τ³ + a₄τ⁴` in segment-relative time `τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuarticSegment {
    pub t_start: f64,
    pub duration: f64,
    pub coeffs: [Vec3; 5],
}

impl QuarticSegment {
    pub fn at(&self, tau: f64) -> State {
        let c = &self.coeffs;
        State {
            r: c[0] + (c[1] + (c[2] + (c[3] + c[4] * tau) * tau) * tau) * tau,
            v: c[1] + (c[2] * 2.0 + (c[3] * 3.0 + c[4] * (4.0 * tau)) * tau) * tau,
            a: c[2] * 2.0 + (c[3] * 6.0 + c[4] * (12.0 * tau)) * tau,
        }
    }
}

/// One quartic per waypoint-to-waypoint segment.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuarticSpline {
    pub segments: Vec<QuarticSegment>,
    pub waypoint_times: Vec<f64>,
    pub duration: f64,
}

impl Trajectory for QuarticSpline {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn sample(&self, t: f64) -> Result<State> {
        check_time(t, self.duration)?;
        let t = t.clamp(0.0, self.duration);
        let idx = self.segments.partition_point(|s| s.t_start + s.duration < t);
        let seg = self.segments[idx.min(self.segments.len() - 1)..]
            .iter()
            .find(|s| s.duration > 0.0)
            .unwrap_or(&self.segments[0]);
        let tau = (t - seg.t_start).clamp(0.0, seg.duration);
        Ok(seg.at(tau))
    }

    fn waypoint_times(&self) -> &[f64] {
        &self.waypoint_times
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.t_start).collect();
        b.push(self.duration);
        b
    }
}

/// Solves the per-axis 5×5 interpolation system on normalized time
/// `s = τ/Δ`: endpoint positions and velocities plus the midpoint position.
fn fit_quartic(delta: f64, start: (Vec3, Vec3), end: (Vec3, Vec3), mid: Vec3) -> Result<[Vec3; 5]> {
    let rows: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 2.0, 3.0, 4.0],
        [1.0, 0.5, 0.25, 0.125, 0.0625],
    ];
    let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
    let lu = DenseMatrix::from_rows(&refs)
        .lu()
        .ok_or_else(|| PlanError::InvalidPlan("singular smoothing system".into()))?;
    let mut coeffs = [Vec3::ZERO; 5];
    for a in 0..3 {
        let rhs = [start.0[a], start.1[a] * delta, end.0[a], end.1[a] * delta, mid[a]];
        let b = lu.solve(&rhs);
        for (i, ci) in coeffs.iter_mut().enumerate() {
            ci[a] = b[i] / libm::pow(delta, i as f64);
        }
    }
    Ok(coeffs)
}

/// Quartic smoothing of `traj` between consecutive waypoints of `sol`. Each
/// piece matches the waypoint states at both ends and the unsmoothed position
/// at the segment's mid-time. Segments shorter than `eps_time` are copied as a
/// constant.
pub fn smooth(traj: &PiecewiseTrajectory, sol: &NodeSolution, eps_time: f64) -> Result<QuarticSpline> {
    let l = sol.layout;
    let times = &traj.waypoint_times;
    if times.len() != l.waypoints || l.waypoints < 2 {
        return Err(PlanError::InvalidPlan(format!(
            "trajectory lists {} waypoint times for {} waypoints",
            times.len(),
            l.waypoints
        )));
    }
    let mut segments = Vec::with_capacity(l.segments());
    for n in 0..l.segments() {
        let (ja, jb) = (l.waypoint_node(n), l.waypoint_node(n + 1));
        let (t0, t1) = (times[n], times[n + 1]);
        let delta = t1 - t0;
        let coeffs = if delta < eps_time {
            [sol.r[ja], sol.v[ja], Vec3::ZERO, Vec3::ZERO, Vec3::ZERO]
        } else {
            let mid = traj.sample(0.5 * (t0 + t1))?.r;
            fit_quartic(delta, (sol.r[ja], sol.v[ja]), (sol.r[jb], sol.v[jb]), mid)?
        };
        segments.push(QuarticSegment {
            t_start: t0,
            duration: delta.max(0.0),
            coeffs,
        });
    }
    Ok(QuarticSpline {
        segments,
        waypoint_times: times.clone(),
        duration: traj.duration,
    })
}

/// Interpolation defects of a smoothed spline against the trajectory it was
/// built from.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoothingCheck {
    /// Worst endpoint position or velocity mismatch.
    pub endpoint: f64,
    /// Worst midpoint position mismatch.
    pub midpoint: f64,
    /// Largest `‖r̄″‖` over dense samples.
    pub max_accel: f64,
    /// `max_accel > u_max`.
    pub exceeds_thrust: bool,
    /// `max_accel > fail_factor · u_max`.
    pub fails: bool,
    /// Largest position gap to the unsmoothed trajectory over dense samples.
    pub max_deviation: f64,
}

pub fn check_smoothing(
    spline: &QuarticSpline,
    traj: &PiecewiseTrajectory,
    sol: &NodeSolution,
    u_max: f64,
    fail_factor: f64,
    samples_per_segment: usize,
) -> SmoothingCheck {
    let l = sol.layout;
    let mut out = SmoothingCheck::default();
    for (n, seg) in spline.segments.iter().enumerate() {
        let (ja, jb) = (l.waypoint_node(n), l.waypoint_node(n + 1));
        let s0 = seg.at(0.0);
        let s1 = seg.at(seg.duration);
        out.endpoint = out
            .endpoint
            .max((s0.r - sol.r[ja]).max_abs())
            .max((s0.v - sol.v[ja]).max_abs())
            .max((s1.r - sol.r[jb]).max_abs())
            .max((s1.v - sol.v[jb]).max_abs());
        if seg.duration <= 0.0 {
            continue;
        }
        let mid_t = seg.t_start + 0.5 * seg.duration;
        if let Ok(m) = traj.sample(mid_t) {
            out.midpoint = out.midpoint.max((seg.at(0.5 * seg.duration).r - m.r).max_abs());
        }
        for i in 0..=samples_per_segment {
            let tau = seg.duration * i as f64 / samples_per_segment.max(1) as f64;
            let s = seg.at(tau);
            out.max_accel = out.max_accel.max(s.a.norm());
            if let Ok(p) = traj.sample((seg.t_start + tau).min(traj.duration)) {
                out.max_deviation = out.max_deviation.max((s.r - p.r).norm());
            }
        }
    }
    out.exceeds_thrust = out.max_accel > u_max;
    out.fails = out.max_accel > fail_factor * u_max;
    out
}
