//! Survey description file (TOML).
//!
//! ```toml
//! [roi]
//! width_m = 40.0          # along x
//! height_m = 30.0         # along y
//! overlap = 0.5           # fraction of the footprint shared by neighbours
//! altitude_m = 10.0       # or gsd_m_per_px, never both
//! # line_spacing_m = 10.0  # optional explicit grid, with capture_spacing_m
//!
//! [camera]
//! allowable_blur_px = 1.0
//! ground_resolution_px_per_m = 100.0
//! shutter_s = 0.002
//! fov_h_deg = 87.0
//! fov_v_deg = 71.0
//! focal_length_m = 0.02
//! sensor_width_m = 0.0236
//! image_width_px = 6000.0
//!
//! [planner]               # any PlannerParams field; SI units
//! u_max = 10.5            # m/s²
//! v_axis_max = 12.0       # m/s per axis
//! v_blur = 8.0            # m/s at waypoints; inf disables
//! switching_points = 1
//!
//! [baseline]
//! enabled = true
//! axis_bound = "inscribed" # or "per_axis"
//!
//! [output]
//! out_dir = "out"
//! sample_rate_hz = 50.0   # 1 to 1000
//! formats = ["csv", "json"]
//!
//! [mode]
//! smooth = true
//! waypoints_only = false
//! blur_from_camera = false # replace planner.v_blur by ρ / (G_x T_s)
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survey_core::baseline::AxisBound;
use survey_core::camera::{compute_flight_height, compute_v_blur, CameraSpec};
use survey_core::params::PlannerParams;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub width_m: f64,
    pub height_m: f64,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    pub altitude_m: Option<f64>,
    pub gsd_m_per_px: Option<f64>,
    /// Explicit grid spacings, m. Both or neither; they replace the
    /// footprint-derived spacings.
    pub line_spacing_m: Option<f64>,
    pub capture_spacing_m: Option<f64>,
}

fn default_overlap() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub allowable_blur_px: f64,
    pub ground_resolution_px_per_m: f64,
    pub shutter_s: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub focal_length_m: f64,
    pub sensor_width_m: f64,
    pub image_width_px: f64,
}

impl CameraSection {
    pub fn to_camera(&self) -> CameraSpec {
        CameraSpec {
            allowable_blur_px: self.allowable_blur_px,
            ground_resolution_px_per_m: self.ground_resolution_px_per_m,
            shutter_s: self.shutter_s,
            fov_h_rad: self.fov_h_deg.to_radians(),
            fov_v_rad: self.fov_v_deg.to_radians(),
            focal_length_m: self.focal_length_m,
            sensor_width_m: self.sensor_width_m,
            image_width_px: self.image_width_px,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub enabled: bool,
    pub axis_bound: AxisBound,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            enabled: true,
            axis_bound: AxisBound::Inscribed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub out_dir: PathBuf,
    pub sample_rate_hz: f64,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            out_dir: PathBuf::from("out"),
            sample_rate_hz: 50.0,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSection {
    pub smooth: bool,
    pub waypoints_only: bool,
    pub blur_from_camera: bool,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            smooth: true,
            waypoints_only: false,
            blur_from_camera: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySpec {
    pub roi: Roi,
    pub camera: CameraSection,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub mode: ModeSection,
}

/// Field-level problems found while reading a spec.
#[derive(Debug)]
pub struct SpecError {
    pub problems: Vec<String>,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid survey spec:")?;
        for p in &self.problems {
            writeln!(f, "  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SpecError {}

impl SpecError {
    fn one(msg: impl Into<String>) -> Self {
        SpecError { problems: vec![msg.into()] }
    }
}

impl SurveySpec {
    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpecError::one(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: SurveySpec = toml::from_str(text).map_err(|e| SpecError::one(e.to_string().trim_end().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Collects every invariant violation rather than stopping at the first.
    pub fn validate(&self) -> Result<(), SpecError> {
        let mut problems = Vec::new();
        match (self.roi.altitude_m, self.roi.gsd_m_per_px) {
            (Some(_), Some(_)) => problems.push("roi: exactly one of `altitude_m` or `gsd_m_per_px` may be given, found both".into()),
            (None, None) => problems.push("roi: exactly one of `altitude_m` or `gsd_m_per_px` must be given".into()),
            _ => {}
        }
        for (name, v) in [("roi.width_m", self.roi.width_m), ("roi.height_m", self.roi.height_m)] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name}: must be a non-negative length in meters, got {v}"));
            }
        }
        match (self.roi.line_spacing_m, self.roi.capture_spacing_m) {
            (Some(a), Some(b)) => {
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    problems.push(format!("roi: spacings must be positive lengths in meters, got {a} and {b}"));
                }
            }
            (None, None) => {}
            _ => problems.push("roi: `line_spacing_m` and `capture_spacing_m` must be given together".into()),
        }
        if !(0.0..1.0).contains(&self.roi.overlap) {
            problems.push(format!("roi.overlap: must lie in [0, 1), got {}", self.roi.overlap));
        }
        if let Err(e) = self.camera.to_camera().validate() {
            problems.push(format!("camera: {e}"));
        }
        if let Err(e) = self.planner.validate() {
            problems.push(format!("planner: {e}"));
        }
        let rate = self.output.sample_rate_hz;
        if !(1.0..=1000.0).contains(&rate) {
            problems.push(format!("output.sample_rate_hz: must lie in [1, 1000] Hz, got {rate}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SpecError { problems })
        }
    }

    /// Flight altitude, given directly or derived from the ground sample distance.
    pub fn altitude(&self) -> Result<f64, SpecError> {
        match (self.roi.altitude_m, self.roi.gsd_m_per_px) {
            (Some(h), None) => Ok(h),
            (None, Some(g)) => compute_flight_height(g, &self.camera.to_camera()).map_err(|e| SpecError::one(format!("roi.gsd_m_per_px: {e}"))),
            _ => Err(SpecError::one("roi: exactly one of `altitude_m` or `gsd_m_per_px` must be given")),
        }
    }

    /// Planner parameters with the camera blur speed applied when requested.
    pub fn planner_params(&self) -> Result<PlannerParams, SpecError> {
        let mut p = self.planner.clone();
        if self.mode.blur_from_camera {
            p.v_blur = compute_v_blur(&self.camera.to_camera()).map_err(|e| SpecError::one(format!("camera: {e}")))?;
        }
        p.validate().map_err(|e| SpecError::one(format!("planner: {e}")))?;
        Ok(p)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
