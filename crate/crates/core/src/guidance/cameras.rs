use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::GuidanceError;
use crate::scene::{Camera, InstanceLayout};

/// How guidance cameras are placed and what they render.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraPolicy {
    pub elevation_deg: f64,
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
    /// Multiplies every orbit radius. At 1.0 the radii are `¾‖e‖` for
    /// instances and the bounding-sphere radius for the scene.
    pub radius_multiplier: f64,
}

impl Default for CameraPolicy {
    fn default() -> Self {
        Self {
            elevation_deg: 15.0,
            fov_y_deg: 60.0,
            width: 128,
            height: 128,
            radius_multiplier: 2.0,
        }
    }
}

impl CameraPolicy {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        if self.width == 0 || self.height == 0 {
            return Err(GuidanceError::InvalidConfig("camera resolution must be at least 1x1".into()));
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(GuidanceError::InvalidConfig(format!("fov_y_deg must lie in (0, 180), got {}", self.fov_y_deg)));
        }
        if !(self.radius_multiplier > 0.0) || !self.radius_multiplier.is_finite() {
            return Err(GuidanceError::InvalidConfig("radius_multiplier must be > 0".into()));
        }
        if !self.elevation_deg.is_finite() || self.elevation_deg.abs() >= 90.0 {
            return Err(GuidanceError::InvalidConfig("elevation_deg must lie in (-90, 90)".into()));
        }
        Ok(())
    }

    /// Camera on the orbit of `radius` around `center` at `azimuth` (radians).
    pub fn orbit_camera(&self, center: Vector3<f64>, radius: f64, azimuth: f64) -> Camera {
        let el = self.elevation_deg.to_radians();
        let dir = Vector3::new(el.cos() * azimuth.cos(), el.cos() * azimuth.sin(), el.sin());
        let eye = center + radius * self.radius_multiplier * dir;
        Camera::look_at(eye, center, self.fov_y_deg.to_radians(), self.width, self.height)
            .expect("orbit camera with positive radius is valid")
    }
}

fn azimuth(index: usize, count: usize) -> f64 {
    std::f64::consts::TAU * (index % count.max(1)) as f64 / count.max(1) as f64
}

/// View `index` of `count` evenly spaced around the layout at radius `¾‖e‖`.
pub fn sample_instance_camera(layout: &InstanceLayout, index: usize, count: usize, policy: &CameraPolicy) -> Camera {
    policy.orbit_camera(layout.center, 0.75 * layout.extents.norm(), azimuth(index, count))
}

/// Bounding sphere of a set of layout boxes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Sphere centered on the axis-aligned hull of all box corners, with radius
/// reaching the farthest corner.
pub fn scene_bounds<'a, I>(layouts: I) -> Result<SceneBounds, GuidanceError>
where
    I: IntoIterator<Item = &'a InstanceLayout>,
{
    let corners: Vec<Vector3<f64>> = layouts.into_iter().flat_map(|l| l.world_corners()).collect();
    if corners.is_empty() {
        return Err(GuidanceError::DegenerateBounds);
    }
    let lo = corners.iter().fold(Vector3::repeat(f64::INFINITY), |a, c| a.inf(c));
    let hi = corners.iter().fold(Vector3::repeat(f64::NEG_INFINITY), |a, c| a.sup(c));
    let center = 0.5 * (lo + hi);
    let radius = corners.iter().map(|c| (c - center).norm()).fold(0.0, f64::max);
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GuidanceError::DegenerateBounds);
    }
    Ok(SceneBounds { center, radius })
}

/// View `index` of `count` evenly spaced around the scene bounding sphere.
pub fn sample_scene_camera(bounds: &SceneBounds, index: usize, count: usize, policy: &CameraPolicy) -> Result<Camera, GuidanceError> {
    if !(bounds.radius > 0.0) || !bounds.radius.is_finite() {
        return Err(GuidanceError::DegenerateBounds);
    }
    Ok(policy.orbit_camera(bounds.center, bounds.radius, azimuth(index, count)))
}
