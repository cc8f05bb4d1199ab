use survey_core::baseline::{plan_baseline, AxisBound};
use survey_core::camera::SurveyPlan;
use survey_core::math::Vec3;
use survey_core::nlp::{evaluate_residuals, InputMode};
use survey_core::oracle::{analytic_min_time_1d, audit};
use survey_core::params::PlannerParams;
use survey_core::planner::plan_min_time;
use survey_core::trajectory::{interpolate, smooth, Trajectory};

fn plan(points: &[(f64, f64, f64)]) -> SurveyPlan {
    SurveyPlan::from_waypoints(points.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect()).unwrap()
}

#[test]
fn rest_to_rest_line_is_bang_bang() {
    let p = plan(&[(0.0, 0.0, 0.0), (10.0, 0.0, 0.0)]);
    let params = PlannerParams {
        u_max: 10.0,
        ..Default::default()
    };
    let out = plan_min_time(&p, &params).unwrap();
    let sol = &out.solution;
    assert_eq!(sol.mode, InputMode::Sphere);
    assert!((sol.total_time - 2.0).abs() < 1e-6, "{}", sol.total_time);
    assert!((sol.node_times()[1] - 1.0).abs() < 1e-6);
    assert!((sol.u[0] - Vec3::new(10.0, 0.0, 0.0)).max_abs() < 1e-5);
    assert!((sol.u[1] - Vec3::new(-10.0, 0.0, 0.0)).max_abs() < 1e-5);
    assert!(sol.report.merit_monotone);
    assert_eq!(sol.report.fallback_attempts, 0);
}

#[test]
fn speed_cap_triggers_relaxed_fallback() {
    let p = plan(&[(0.0, 0.0, 0.0), (100.0, 0.0, 0.0)]);
    let params = PlannerParams {
        u_max: 10.0,
        v_axis_max: 10.0,
        ..Default::default()
    };
    let out = plan_min_time(&p, &params).unwrap();
    assert!(out.equality_failure.is_some());
    assert_eq!(out.solution.mode, InputMode::Relaxed);
    assert!(out.solution.report.fallback_attempts >= 1);
    assert!((out.solution.total_time - analytic_min_time_1d(100.0, 10.0, 10.0)).abs() < 1e-6);
    assert!(evaluate_residuals(&out.solution, &p, &params).within(params.eps_feas));
}

#[test]
fn coincident_waypoints_cost_no_time() {
    let p = plan(&[(0.0, 0.0, 0.0), (10.0, 0.0, 0.0), (10.0, 0.0, 0.0)]);
    let params = PlannerParams {
        u_max: 10.0,
        ..Default::default()
    };
    let out = plan_min_time(&p, &params).unwrap();
    let sol = &out.solution;
    let per = sol.layout.per_segment();
    let tail: f64 = sol.dt[per..].iter().sum();
    assert!(tail.abs() < 1e-6, "{:?}", sol.dt);
    assert!((sol.total_time - 2.0).abs() < 1e-6);
}

#[test]
fn nlp_beats_baseline_on_shared_instances() {
    let cases = [
        (vec![(0.0, 0.0, 0.0), (20.0, 0.0, 0.0), (20.0, 10.0, 0.0), (0.0, 10.0, 0.0)], 12.0, f64::INFINITY),
        (vec![(0.0, 0.0, 0.0), (15.0, 5.0, 0.0), (30.0, 0.0, 2.0)], 8.0, 6.0),
        (vec![(0.0, 0.0, 0.0), (10.0, 0.0, 0.0), (10.0, 10.0, 0.0)], 10.0, 5.0),
    ];
    for (pts, u, cap) in cases {
        let p = plan(&pts);
        let params = PlannerParams {
            u_max: u,
            v_axis_max: cap,
            switching_points: 2,
            ..Default::default()
        };
        let nlp = plan_min_time(&p, &params).unwrap().solution.total_time;
        for bound in [AxisBound::Inscribed, AxisBound::PerAxis] {
            let base = plan_baseline(&p, &params, bound).unwrap().total_time;
            assert!(nlp <= base + params.eps_opt, "{pts:?} {bound:?}: {nlp} > {base}");
        }
    }
}

#[test]
fn smoothed_plan_keeps_blur_at_waypoints() {
    let p = plan(&[(0.0, 0.0, 5.0), (12.0, 0.0, 5.0), (12.0, 8.0, 5.0), (0.0, 8.0, 5.0)]);
    let params = PlannerParams {
        u_max: 10.0,
        v_blur: 3.0,
        v_axis_max: 8.0,
        switching_points: 2,
        ..Default::default()
    };
    let out = plan_min_time(&p, &params).unwrap();
    let traj = interpolate(&out.solution, &p, &params).unwrap();
    let rep = audit(&traj, &p, &params, None);
    assert!(rep.pass_default, "{rep:?}");
    let spline = smooth(&traj, &out.solution, params.eps_time).unwrap();
    for (n, &t) in spline.waypoint_times().iter().enumerate() {
        let s = spline.sample(t).unwrap();
        assert!(s.r.distance(&p.waypoints[n]) < 1e-9);
        assert!(s.v.norm() <= params.v_blur + params.eps_feas);
    }
}

#[test]
fn audit_reports_baseline_delta() {
    let p = plan(&[(0.0, 0.0, 0.0), (20.0, 0.0, 0.0), (20.0, 10.0, 0.0)]);
    let params = PlannerParams {
        u_max: 12.0,
        switching_points: 2,
        ..Default::default()
    };
    let out = plan_min_time(&p, &params).unwrap();
    let base = plan_baseline(&p, &params, AxisBound::Inscribed).unwrap();
    let traj = interpolate(&out.solution, &p, &params).unwrap();
    let rep = audit(&traj, &p, &params, Some(&base));
    assert!(rep.delta_time.unwrap() < 0.0);
    assert_eq!(rep.baseline_time, Some(base.total_time));
}
