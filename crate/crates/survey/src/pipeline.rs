//! geometry, conic warm start, NLP, interpolation, smoothing, baseline, audit.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use survey_core::baseline::{plan_baseline, AxisBound, BaselinePlan};
use survey_core::camera::{compute_footprint, generate_lawnmower, lawnmower_with_spacing, SurveyPlan};
use survey_core::error::PlanError;
use survey_core::nlp::InputMode;
use survey_core::oracle::{audit, AuditReport, ToleranceProfile};
use survey_core::params::PlannerParams;
use survey_core::planner::{plan_min_time, PlanOutcome};
use survey_core::trajectory::{check_smoothing, interpolate, smooth, PiecewiseTrajectory, SmoothingCheck};

use crate::export;
use crate::spec::{Format, SpecError, SurveySpec};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum RunError {
    Spec(SpecError),
    Infeasible(String),
    Internal(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Infeasible(_) => 3,
            RunError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Spec(e) => write!(f, "{e}"),
            RunError::Infeasible(m) => write!(f, "planner infeasible: {m}"),
            RunError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl From<SpecError> for RunError {
    fn from(e: SpecError) -> Self {
        RunError::Spec(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Internal(e)
    }
}

impl From<PlanError> for RunError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InvalidParameter { .. } | PlanError::InvalidPlan(_) => {
                RunError::Spec(SpecError { problems: vec![e.to_string()] })
            }
            PlanError::NoFeasibleStep { .. }
            | PlanError::PlannerInfeasible { .. }
            | PlanError::InfeasibleAxis(_)
            | PlanError::GridInfeasible { .. } => RunError::Infeasible(e.to_string()),
            other => RunError::Internal(anyhow::Error::new(other)),
        }
    }
}

/// Command-line settings that take precedence over the survey file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub sample_rate_hz: Option<f64>,
    pub no_smooth: bool,
    pub waypoints_only: bool,
    pub profile: ToleranceProfile,
}

pub fn load(path: &Path, o: &Overrides) -> Result<SurveySpec, RunError> {
    let mut spec = SurveySpec::load(path)?;
    if let Some(dir) = &o.out_dir {
        spec.output.out_dir = dir.clone();
    }
    if let Some(rate) = o.sample_rate_hz {
        spec.output.sample_rate_hz = rate;
    }
    spec.mode.smooth &= !o.no_smooth;
    spec.mode.waypoints_only |= o.waypoints_only;
    spec.validate()?;
    Ok(spec)
}

pub fn waypoints(spec: &SurveySpec) -> Result<SurveyPlan, RunError> {
    let altitude = spec.altitude()?;
    let roi = &spec.roi;
    if let (Some(line), Some(capture)) = (roi.line_spacing_m, roi.capture_spacing_m) {
        return Ok(lawnmower_with_spacing(roi.width_m, roi.height_m, altitude, line, capture)?);
    }
    let camera = spec.camera.to_camera();
    compute_footprint(altitude, &camera)?;
    Ok(generate_lawnmower(roi.width_m, roi.height_m, altitude, roi.overlap, &camera)?)
}

#[derive(Debug, Serialize)]
pub struct PlannerSummary {
    pub mode: InputMode,
    pub switching_points: usize,
    pub total_time_s: f64,
    pub warm_start_time_s: f64,
    pub converged: bool,
    pub stationarity: f64,
    pub violation: f64,
    pub merit_monotone: bool,
    pub fallback_attempts: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub equality_failure: Option<String>,
}

impl PlannerSummary {
    fn of(out: &PlanOutcome) -> Self {
        let s = &out.solution;
        PlannerSummary {
            mode: s.mode,
            switching_points: s.layout.switching_points,
            total_time_s: s.total_time,
            warm_start_time_s: out.warm_time(),
            converged: s.report.converged,
            stationarity: s.report.stationarity,
            violation: s.report.violation,
            merit_monotone: s.report.merit_monotone,
            fallback_attempts: s.report.fallback_attempts,
            outer_iterations: s.report.outer_iterations,
            inner_iterations: s.report.inner_iterations,
            equality_failure: out.equality_failure.as_ref().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BaselineSummary {
    pub axis_bound: AxisBound,
    pub total_time_s: f64,
    pub dwell_inserted: bool,
}

#[derive(Debug, Serialize)]
pub struct PlanReport {
    pub waypoints: usize,
    pub planner: PlannerSummary,
    pub params: PlannerParams,
    pub profile: ToleranceProfile,
    pub audit: AuditReport,
    pub smoothing: Option<SmoothingCheck>,
    pub baseline: Option<BaselineSummary>,
    pub pass: bool,
}

/// Outcome of `plan` when every stage ran; `report.pass` decides the exit status.
pub struct PlanRun {
    pub report: PlanReport,
    pub written: Vec<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Internal(anyhow::anyhow!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct FailureDoc<'a> {
    stage: &'a str,
    message: String,
}

fn record_failure(dir: &Path, stage: &str, err: &RunError) {
    let _ = export::write_json(
        &dir.join("failure.json"),
        &FailureDoc {
            stage,
            message: err.to_string(),
        },
    );
}

pub fn run_plan(spec: &SurveySpec, profile: ToleranceProfile) -> Result<PlanRun, RunError> {
    let dir = spec.output.out_dir.clone();
    ensure_dir(&dir)?;
    let plan = waypoints(spec)?;
    let mut written = vec![dir.join("waypoints.json")];
    export::write_waypoints(&written[0], &plan)?;
    let params = spec.planner_params()?;
    if spec.mode.waypoints_only {
        return Ok(PlanRun {
            report: PlanReport {
                waypoints: plan.len(),
                planner: PlannerSummary::skipped(),
                params,
                profile,
                audit: AuditReport::default(),
                smoothing: None,
                baseline: None,
                pass: true,
            },
            written,
        });
    }

    let outcome = plan_min_time(&plan, &params).map_err(|e| {
        let err = RunError::from(e);
        record_failure(&dir, "planner", &err);
        err
    })?;
    let traj = interpolate(&outcome.solution, &plan, &params)?;
    let baseline = if spec.baseline.enabled {
        Some(plan_baseline(&plan, &params, spec.baseline.axis_bound)?)
    } else {
        None
    };
    let report_audit = audit(&traj, &plan, &params, baseline.as_ref());
    let rate = spec.output.sample_rate_hz;
    let csv = spec.wants(Format::Csv);
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> anyhow::Result<()>| -> Result<(), RunError> {
        let path = dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    if csv {
        emit("trajectory.csv", &|p| export::write_trajectory(p, &traj, rate))?;
        emit("markers.csv", &|p| export::write_markers(p, &traj, &plan))?;
    }
    let smoothing = if spec.mode.smooth {
        let spline = smooth(&traj, &outcome.solution, params.eps_time)?;
        if csv {
            emit("trajectory_smooth.csv", &|p| export::write_trajectory(p, &spline, rate))?;
        }
        Some(check_smoothing(&spline, &traj, &outcome.solution, params.u_max, 3.0, 32))
    } else {
        None
    };
    if let (Some(b), true) = (&baseline, csv) {
        let bt = b.to_trajectory();
        emit("baseline.csv", &|p| export::write_trajectory(p, &bt, rate))?;
    }
    let pass = report_audit.passes(profile);
    let report = PlanReport {
        waypoints: plan.len(),
        planner: PlannerSummary::of(&outcome),
        params,
        profile,
        audit: report_audit,
        smoothing,
        baseline: baseline.as_ref().map(|b| BaselineSummary {
            axis_bound: b.bound,
            total_time_s: b.total_time,
            dwell_inserted: b.segments.iter().any(|s| s.dwell_inserted),
        }),
        pass,
    };
    if spec.wants(Format::Json) {
        emit("report.json", &|p| export::write_json(p, &report))?;
    }
    Ok(PlanRun { report, written })
}

impl PlannerSummary {
    fn skipped() -> Self {
        PlannerSummary {
            mode: InputMode::Sphere,
            switching_points: 0,
            total_time_s: 0.0,
            warm_start_time_s: 0.0,
            converged: false,
            stationarity: 0.0,
            violation: 0.0,
            merit_monotone: true,
            fallback_attempts: 0,
            outer_iterations: 0,
            inner_iterations: 0,
            equality_failure: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub total_time_s: Option<f64>,
    pub max_waypoint_speed_mps: Option<f64>,
    pub max_input_mps2: Option<f64>,
    pub audit_pass: Option<bool>,
    pub failure: Option<String>,
}

impl CompareRow {
    fn ok(method: &str, rep: &AuditReport, profile: ToleranceProfile) -> Self {
        CompareRow {
            method: method.into(),
            total_time_s: Some(rep.total_time),
            max_waypoint_speed_mps: Some(rep.waypoint_speeds.iter().copied().fold(0.0, f64::max)),
            max_input_mps2: Some(rep.max_accel),
            audit_pass: Some(rep.passes(profile)),
            failure: None,
        }
    }

    fn failed(method: &str, err: &RunError) -> Self {
        CompareRow {
            method: method.into(),
            total_time_s: None,
            max_waypoint_speed_mps: None,
            max_input_mps2: None,
            audit_pass: None,
            failure: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub waypoints: usize,
    pub rows: Vec<CompareRow>,
    /// `(t_nlp − t_baseline) / t_baseline`; negative when the NLP is faster.
    pub relative_delta: Option<f64>,
    pub complete: bool,
}

impl CompareReport {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>12} {:>18} {:>14} {:>6}\n",
            "method", "total time s", "max wp speed m/s", "max |u| m/s2", "audit"
        );
        let num = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        for r in &self.rows {
            let audit = match r.audit_pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "-",
            };
            s += &format!(
                "{:<10} {:>12} {:>18} {:>14} {:>6}\n",
                r.method,
                num(r.total_time_s, 3),
                num(r.max_waypoint_speed_mps, 3),
                num(r.max_input_mps2, 3),
                audit
            );
            if let Some(f) = &r.failure {
                s += &format!("  {} failed: {f}\n", r.method);
            }
        }
        if let Some(d) = self.relative_delta {
            s += &format!("relative time delta (nlp vs baseline): {:+.2}%\n", 100.0 * d);
        }
        s
    }
}

type Planned = Result<(PiecewiseTrajectory, AuditReport), RunError>;

pub fn run_compare(spec: &SurveySpec, profile: ToleranceProfile) -> Result<CompareReport, RunError> {
    let dir = spec.output.out_dir.clone();
    ensure_dir(&dir)?;
    let plan = waypoints(spec)?;
    export::write_waypoints(&dir.join("waypoints.json"), &plan)?;
    let params = spec.planner_params()?;
    let bound = spec.baseline.axis_bound;

    // both planners only read the shared plan and parameters
    let (nlp, base): (Planned, Planned) = thread::scope(|s| {
        let nlp = s.spawn(|| -> Planned {
            let out = plan_min_time(&plan, &params)?;
            let traj = interpolate(&out.solution, &plan, &params)?;
            let rep = audit(&traj, &plan, &params, None);
            Ok((traj, rep))
        });
        let base = s.spawn(|| -> Planned {
            let b: BaselinePlan = plan_baseline(&plan, &params, bound)?;
            let traj = b.to_trajectory();
            let rep = audit(&traj, &plan, &params, None);
            Ok((traj, rep))
        });
        (join(nlp), join(base))
    });

    let rate = spec.output.sample_rate_hz;
    let mut rows = Vec::new();
    for (name, file, res) in [("nlp", "trajectory.csv", &nlp), ("baseline", "baseline.csv", &base)] {
        match res {
            Ok((traj, rep)) => {
                if spec.wants(Format::Csv) {
                    export::write_trajectory(&dir.join(file), traj, rate)?;
                }
                rows.push(CompareRow::ok(name, rep, profile));
            }
            Err(e) => rows.push(CompareRow::failed(name, e)),
        }
    }
    let relative_delta = match (&nlp, &base) {
        (Ok((_, a)), Ok((_, b))) if b.total_time > 0.0 => Some((a.total_time - b.total_time) / b.total_time),
        (Ok((_, a)), Ok((_, b))) if a.total_time == b.total_time => Some(0.0),
        _ => None,
    };
    let report = CompareReport {
        waypoints: plan.len(),
        complete: nlp.is_ok() && base.is_ok(),
        rows,
        relative_delta,
    };
    if spec.wants(Format::Json) {
        export::write_json(&dir.join("compare.json"), &report)?;
    }
    Ok(report)
}

fn join(h: thread::ScopedJoinHandle<'_, Planned>) -> Planned {
    h.join()
        .unwrap_or_else(|_| Err(RunError::Internal(anyhow::anyhow!("planner thread panicked"))))
}
