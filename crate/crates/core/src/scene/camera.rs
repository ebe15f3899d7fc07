use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;

/// Pinhole camera with a rigid world-to-camera transform.
///
/// Camera space follows the usual vision convention: +x right, +y down,
/// +z forward. Pixel `(col, row)` has its center at `(col + 0.5, row + 0.5)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Camera {
    /// Square-pixel camera with vertical field of view `fov_y` (radians),
    /// principal point at the image center, placed at `eye` looking at `target`
    /// with world +z as up.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        fov_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, SceneError> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(SceneError::InvalidCamera("eye coincides with target".into()));
        }
        let forward = forward.normalize();
        let mut up = Vector3::z();
        if forward.cross(&up).norm() < 1e-9 {
            up = Vector3::y();
        }
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let focal = 0.5 * height as f64 / (0.5 * fov_y).tan();
        let cam = Self {
            fx: focal,
            fy: focal,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            rotation,
            translation: -(rotation * eye),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(SceneError::InvalidCamera("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidCamera("resolution must be at least 1x1".into()));
        }
        let err = (self.rotation * self.rotation.transpose() - Matrix3::identity()).amax();
        if err > 1e-6 {
            return Err(SceneError::InvalidCamera(format!("rotation not orthonormal (error {err:e})")));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// World-space direction through the center of pixel `(col, row)`.
    pub fn pixel_ray(&self, col: usize, row: usize) -> Vector3<f64> {
        let x = (col as f64 + 0.5 - self.cx) / self.fx;
        let y = (row as f64 + 0.5 - self.cy) / self.fy;
        (self.rotation.transpose() * Vector3::new(x, y, 1.0)).normalize()
    }

    /// Same pose and intrinsics scaled to a different focal length.
    pub fn with_focal(&self, fx: f64, fy: f64) -> Self {
        Self {
            fx,
            fy,
            ..self.clone()
        }
    }
}
