//! Artifact writers. Floats use shortest round-trip formatting so reruns are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use survey_core::camera::SurveyPlan;
use survey_core::trajectory::{csv_row, sample_at_rate, Trajectory, CSV_HEADER};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct WaypointDoc<'a> {
    altitude_m: f64,
    line_spacing_m: f64,
    capture_spacing_m: f64,
    count: usize,
    waypoints: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

pub fn write_waypoints(path: &Path, plan: &SurveyPlan) -> Result<()> {
    write_json(
        path,
        &WaypointDoc {
            altitude_m: plan.altitude_m,
            line_spacing_m: plan.line_spacing_m,
            capture_spacing_m: plan.capture_spacing_m,
            count: plan.len(),
            waypoints: plan.waypoints.iter().map(|w| (*w).into()).collect(),
            note: plan.allow_coincident.then_some("contains coincident consecutive waypoints"),
        },
    )
}

/// Uniform samples at `rate_hz` in the shared trajectory layout.
pub fn write_trajectory<T: Trajectory + ?Sized>(path: &Path, traj: &T, rate_hz: f64) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{CSV_HEADER}")?;
    for (t, s) in sample_at_rate(traj, rate_hz)? {
        let row = csv_row(t, &s);
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per waypoint: scheduled passage time, planned position and speed.
pub fn write_markers<T: Trajectory + ?Sized>(path: &Path, traj: &T, plan: &SurveyPlan) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "index,t,x,y,z,speed")?;
    for (n, &t) in traj.waypoint_times().iter().enumerate().take(plan.len()) {
        let s = traj.sample(t)?;
        writeln!(w, "{n},{t},{},{},{},{}", s.r.x(), s.r.y(), s.r.z(), s.v.norm())?;
    }
    w.flush()?;
    Ok(())
}
