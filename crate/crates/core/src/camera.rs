//! Camera-driven survey geometry: blur speed, flight height, footprint and the
//! serpentine (lawnmower) waypoint grid.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, PlanError, Result};
use crate::math::{ceil, tan, Vec3};

/// Optics and shutter parameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraSpec {
    /// Maximum tolerated smear, pixels.
    pub allowable_blur_px: f64,
    /// Ground resolution, pixels per meter.
    pub ground_resolution_px_per_m: f64,
    /// Exposure time, seconds.
    pub shutter_s: f64,
    pub fov_h_rad: f64,
    pub fov_v_rad: f64,
    pub focal_length_m: f64,
    pub sensor_width_m: f64,
    pub image_width_px: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn field_of_view(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < core::f64::consts::PI {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, pi) rad, got {v}")))
    }
}

impl CameraSpec {
    /// Checks every field invariant.
    pub fn validate(&self) -> Result<()> {
        positive("allowable_blur_px", self.allowable_blur_px)?;
        positive("ground_resolution_px_per_m", self.ground_resolution_px_per_m)?;
        positive("shutter_s", self.shutter_s)?;
        field_of_view("fov_h_rad", self.fov_h_rad)?;
        field_of_view("fov_v_rad", self.fov_v_rad)?;
        positive("focal_length_m", self.focal_length_m)?;
        positive("sensor_width_m", self.sensor_width_m)?;
        positive("image_width_px", self.image_width_px)
    }
}

/// Highest speed at a capture point that keeps smear below the allowable blur:
/// `ρ / (G_x · T_s)`.
pub fn compute_v_blur(camera: &CameraSpec) -> Result<f64> {
    positive("allowable_blur_px", camera.allowable_blur_px)?;
    positive("ground_resolution_px_per_m", camera.ground_resolution_px_per_m)?;
    positive("shutter_s", camera.shutter_s)?;
    Ok(camera.allowable_blur_px / (camera.ground_resolution_px_per_m * camera.shutter_s))
}

/// Pinhole flight height for a target ground sample distance:
/// `H = GSD · f · image_width_px / sensor_width`.
pub fn compute_flight_height(gsd_m_per_px: f64, camera: &CameraSpec) -> Result<f64> {
    positive("gsd_m_per_px", gsd_m_per_px)?;
    positive("focal_length_m", camera.focal_length_m)?;
    positive("sensor_width_m", camera.sensor_width_m)?;
    positive("image_width_px", camera.image_width_px)?;
    Ok(gsd_m_per_px * camera.focal_length_m * camera.image_width_px / camera.sensor_width_m)
}

/// Ground footprint of one image.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Footprint {
    /// Extent along the flight line (horizontal field of view).
    pub width_m: f64,
    /// Extent across the flight line (vertical field of view).
    pub height_m: f64,
}

pub fn compute_footprint(altitude_m: f64, camera: &CameraSpec) -> Result<Footprint> {
    positive("altitude_m", altitude_m)?;
    field_of_view("fov_h_rad", camera.fov_h_rad)?;
    field_of_view("fov_v_rad", camera.fov_v_rad)?;
    Ok(Footprint {
        width_m: 2.0 * altitude_m * tan(camera.fov_h_rad / 2.0),
        height_m: 2.0 * altitude_m * tan(camera.fov_v_rad / 2.0),
    })
}

/// Ordered waypoints to visit.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurveyPlan {
    pub waypoints: Vec<Vec3>,
    pub altitude_m: f64,
    pub line_spacing_m: f64,
    pub capture_spacing_m: f64,
    /// Permits consecutive waypoints to coincide.
    pub allow_coincident: bool,
}

impl SurveyPlan {
    /// Wraps an explicit waypoint list; altitude is taken from the first waypoint.
    pub fn from_waypoints(waypoints: Vec<Vec3>) -> Result<Self> {
        let altitude_m = waypoints.first().map(|w| w.z()).unwrap_or(0.0);
        let allow_coincident = waypoints.windows(2).any(|w| w[0] == w[1]);
        let plan = SurveyPlan {
            waypoints,
            altitude_m,
            line_spacing_m: 0.0,
            capture_spacing_m: 0.0,
            allow_coincident,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(PlanError::InvalidPlan(format!(
                "need at least 2 waypoints, got {}",
                self.waypoints.len()
            )));
        }
        if let Some(w) = self.waypoints.iter().find(|w| !w.is_finite()) {
            return Err(PlanError::InvalidPlan(format!("non-finite waypoint {:?}", w.0)));
        }
        if !self.allow_coincident {
            if let Some(i) = self.waypoints.windows(2).position(|w| w[0] == w[1]) {
                return Err(PlanError::InvalidPlan(format!(
                    "waypoints {i} and {} coincide; set allow_coincident to accept this",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Same plan shifted by `offset` (all waypoints).
    pub fn translated(&self, offset: Vec3) -> Self {
        let mut p = self.clone();
        p.waypoints.iter_mut().for_each(|w| *w += offset);
        p.altitude_m += offset.z();
        p
    }
}

/// Grid positions along `[0, length]` with gaps no larger than `spacing`; the
/// last position sits on the far edge. A single centered position is used when
/// one footprint of `extent` already spans the whole length.
fn line_positions(length: f64, spacing: f64, extent: f64, min_count: usize) -> Vec<f64> {
    if min_count < 2 && length <= extent {
        return alloc::vec![length / 2.0];
    }
    let gaps = (ceil(length / spacing - 1e-9) as usize).max(min_count.saturating_sub(1)).max(1);
    let mut out: Vec<f64> = (0..gaps).map(|i| (i as f64 * spacing).min(length)).collect();
    out.push(length);
    out
}

fn serpentine(
    roi_width_m: f64,
    roi_height_m: f64,
    altitude_m: f64,
    line_spacing_m: f64,
    capture_spacing_m: f64,
    footprint: Footprint,
) -> Result<SurveyPlan> {
    for (name, v) in [("roi_width_m", roi_width_m), ("roi_height_m", roi_height_m)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("must be non-negative, got {v}")));
        }
    }
    positive("line_spacing_m", line_spacing_m)?;
    positive("capture_spacing_m", capture_spacing_m)?;
    if !altitude_m.is_finite() {
        return Err(invalid("altitude_m", "must be finite"));
    }
    // flight lines run parallel to the longer side
    let lines_along_x = roi_width_m >= roi_height_m;
    let (along_len, across_len) = if lines_along_x {
        (roi_width_m, roi_height_m)
    } else {
        (roi_height_m, roi_width_m)
    };
    let across = line_positions(across_len, line_spacing_m, footprint.height_m, 1);
    let along = line_positions(along_len, capture_spacing_m, footprint.width_m, 2);
    let mut waypoints = Vec::with_capacity(across.len() * along.len());
    for (i, &c) in across.iter().enumerate() {
        let forward = i % 2 == 0;
        for k in 0..along.len() {
            let a = if forward { along[k] } else { along[along.len() - 1 - k] };
            let (x, y) = if lines_along_x { (a, c) } else { (c, a) };
            waypoints.push(Vec3::new(x, y, altitude_m));
        }
    }
    let allow_coincident = waypoints.windows(2).any(|w| w[0] == w[1]);
    Ok(SurveyPlan {
        waypoints,
        altitude_m,
        line_spacing_m,
        capture_spacing_m,
        allow_coincident,
    })
}

/// Serpentine grid over a `roi_width_m × roi_height_m` rectangle anchored at the
/// origin, with spacings derived from the camera footprint and image overlap.
pub fn generate_lawnmower(
    roi_width_m: f64,
    roi_height_m: f64,
    altitude_m: f64,
    overlap_fraction: f64,
    camera: &CameraSpec,
) -> Result<SurveyPlan> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(invalid(
            "overlap_fraction",
            format!("must lie in [0, 1), got {overlap_fraction}"),
        ));
    }
    let footprint = compute_footprint(altitude_m, camera)?;
    let line_spacing = footprint.height_m * (1.0 - overlap_fraction);
    let capture_spacing = footprint.width_m * (1.0 - overlap_fraction);
    serpentine(
        roi_width_m,
        roi_height_m,
        altitude_m,
        line_spacing,
        capture_spacing,
        footprint,
    )
}

/// Serpentine grid with explicit spacings; each spacing doubles as the
/// footprint extent on its axis.
pub fn lawnmower_with_spacing(
    roi_width_m: f64,
    roi_height_m: f64,
    altitude_m: f64,
    line_spacing_m: f64,
    capture_spacing_m: f64,
) -> Result<SurveyPlan> {
    serpentine(
        roi_width_m,
        roi_height_m,
        altitude_m,
        line_spacing_m,
        capture_spacing_m,
        Footprint {
            width_m: capture_spacing_m,
            height_m: line_spacing_m,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::abs;

    fn table_camera() -> CameraSpec {
        CameraSpec {
            allowable_blur_px: 1.0,
            ground_resolution_px_per_m: 100.0,
            shutter_s: 0.002,
            fov_h_rad: 87f64.to_radians(),
            fov_v_rad: 71f64.to_radians(),
            focal_length_m: 0.02,
            sensor_width_m: 0.02,
            image_width_px: 1000.0,
        }
    }

    #[test]
    fn blur_speed_direct_substitution() {
        let mut cam = table_camera();
        for (rho, gx, ts, expected) in [(1.0, 1.0, 1.0, 1.0), (2.0, 50.0, 0.004, 10.0), (1.0, 100.0, 0.002, 5.0)] {
            cam.allowable_blur_px = rho;
            cam.ground_resolution_px_per_m = gx;
            cam.shutter_s = ts;
            assert!(abs(compute_v_blur(&cam).unwrap() - expected) < 1e-12);
        }
    }

    #[test]
    fn blur_speed_rejects_non_positive_fields() {
        let mut cam = table_camera();
        cam.shutter_s = 0.0;
        assert!(matches!(compute_v_blur(&cam), Err(PlanError::InvalidParameter { name: "shutter_s", .. })));
        cam.shutter_s = 0.002;
        cam.allowable_blur_px = -1.0;
        assert!(compute_v_blur(&cam).is_err());
    }

    #[test]
    fn flight_height_examples() {
        let mut cam = table_camera();
        assert!(abs(compute_flight_height(0.01, &cam).unwrap() - 10.0) < 1e-12);
        cam.focal_length_m = 1.0;
        cam.image_width_px = 1.0;
        cam.sensor_width_m = 1.0;
        assert!(abs(compute_flight_height(1.0, &cam).unwrap() - 1.0) < 1e-15);
        cam.focal_length_m = 0.02;
        cam.image_width_px = 4000.0;
        cam.sensor_width_m = 0.0133;
        // 0.05 * 0.02 * 4000 / 0.0133 = 300.7519 m
        assert!(abs(compute_flight_height(0.05, &cam).unwrap() - 300.751_879_7) < 1e-6);
        assert!(compute_flight_height(0.0, &cam).is_err());
    }

    #[test]
    fn footprint_examples() {
        let mut cam = table_camera();
        cam.fov_h_rad = core::f64::consts::FRAC_PI_2;
        assert!(abs(compute_footprint(1.0, &cam).unwrap().width_m - 2.0) < 1e-12);
        let cam = table_camera();
        let fp = compute_footprint(10.0, &cam).unwrap();
        // 20 tan(43.5°) = 18.97929, 20 tan(35.5°) = 14.26586
        assert!(abs(fp.width_m - 18.979_291) < 1e-5, "{}", fp.width_m);
        assert!(abs(fp.height_m - 14.265_861) < 1e-5, "{}", fp.height_m);
        let mut wide = table_camera();
        wide.fov_h_rad = core::f64::consts::PI;
        assert!(compute_footprint(10.0, &wide).is_err());
    }

    #[test]
    fn explicit_spacing_grid_alternates_rows() {
        let plan = lawnmower_with_spacing(40.0, 30.0, 5.0, 10.0, 10.0).unwrap();
        assert_eq!(plan.len(), 20);
        let xs: Vec<f64> = plan.waypoints[0..5].iter().map(|w| w.x()).collect();
        assert_eq!(xs, [0.0, 10.0, 20.0, 30.0, 40.0]);
        let xs: Vec<f64> = plan.waypoints[5..10].iter().map(|w| w.x()).collect();
        assert_eq!(xs, [40.0, 30.0, 20.0, 10.0, 0.0]);
        assert!(plan.waypoints[5..10].iter().all(|w| w.y() == 10.0));
        assert!(plan.waypoints.iter().all(|w| w.z() == 5.0));
    }

    #[test]
    fn small_roi_collapses_to_one_line() {
        let cam = table_camera();
        let plan = generate_lawnmower(6.0, 4.0, 10.0, 0.5, &cam).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.waypoints[0], Vec3::new(0.0, 2.0, 10.0));
        assert_eq!(plan.waypoints[1], Vec3::new(6.0, 2.0, 10.0));
    }

    #[test]
    fn table_parameters_spacing() {
        let cam = table_camera();
        let plan = generate_lawnmower(40.0, 30.0, 10.0, 0.5, &cam).unwrap();
        assert!(abs(plan.line_spacing_m - 7.1329) < 1e-3, "{}", plan.line_spacing_m);
        assert!(abs(plan.capture_spacing_m - 9.4890) < 1e-3, "{}", plan.capture_spacing_m);
        // 30 / 7.13 -> 5 gaps, 40 / 9.49 -> 5 gaps
        assert_eq!(plan.len(), 36);
    }

    #[test]
    fn invalid_overlap_and_plan() {
        let cam = table_camera();
        assert!(generate_lawnmower(40.0, 30.0, 10.0, 1.0, &cam).is_err());
        assert!(lawnmower_with_spacing(40.0, 30.0, 10.0, 0.0, 5.0).is_err());
        assert!(SurveyPlan::from_waypoints(alloc::vec![Vec3::ZERO]).is_err());
        let dup = SurveyPlan {
            waypoints: alloc::vec![Vec3::ZERO, Vec3::ZERO],
            altitude_m: 0.0,
            line_spacing_m: 1.0,
            capture_spacing_m: 1.0,
            allow_coincident: false,
        };
        assert!(dup.validate().is_err());
    }
}
