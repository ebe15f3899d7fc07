use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;

/// Which pose parameters of a layout may be adjusted by layout refinement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Learnable {
    pub center: bool,
    pub scale: bool,
    pub yaw: bool,
    /// Per-instance opacity offset (logit space). Off unless requested.
    #[serde(default)]
    pub opacity: bool,
}

impl Learnable {
    pub const NONE: Learnable = Learnable {
        center: false,
        scale: false,
        yaw: false,
        opacity: false,
    };

    pub const POSE: Learnable = Learnable {
        center: true,
        scale: true,
        yaw: true,
        opacity: false,
    };

    pub fn any(&self) -> bool {
        self.center || self.scale || self.yaw || self.opacity
    }
}

/// Oriented box that owns one instance: center, extents along the local
/// x/y/z axes, uniform scale factor and yaw about world +z.
///
/// Gaussians of the instance live in the layout-local frame where the box
/// is `[-extents/2, extents/2]`; the world pose is
/// `world = scale_factor * Rz(yaw) * local + center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceLayout {
    pub id: String,
    pub prompt: String,
    pub center: Vector3<f64>,
    pub extents: Vector3<f64>,
    pub scale_factor: f64,
    /// Radians in `[0, 2π)`.
    pub yaw: f64,
    pub learnable: Learnable,
    /// Logit-space offset added to every Gaussian's opacity of this
    /// instance. Zero unless `learnable.opacity` is used.
    #[serde(default)]
    pub opacity_bias: f64,
}

impl InstanceLayout {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        center: Vector3<f64>,
        extents: Vector3<f64>,
        scale_factor: f64,
        yaw: f64,
    ) -> Result<Self, SceneError> {
        let layout = Self {
            id: id.into(),
            prompt: prompt.into(),
            center,
            extents,
            scale_factor,
            yaw: normalize_yaw(yaw),
            learnable: Learnable::NONE,
            opacity_bias: 0.0,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn with_learnable(mut self, learnable: Learnable) -> Self {
        self.learnable = learnable;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.extents.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(SceneError::InvalidLayout {
                id: self.id.clone(),
                reason: format!("extents must be positive, got {:?}", self.extents.as_slice()),
            });
        }
        if !self.scale_factor.is_finite() || self.scale_factor <= 0.0 {
            return Err(SceneError::InvalidLayout {
                id: self.id.clone(),
                reason: format!("scale factor must be positive, got {}", self.scale_factor),
            });
        }
        if self.center.iter().any(|c| !c.is_finite()) || !self.yaw.is_finite() {
            return Err(SceneError::InvalidLayout {
                id: self.id.clone(),
                reason: "non-finite pose".into(),
            });
        }
        Ok(())
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        self.extents * 0.5
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.yaw)
    }

    /// The eight box corners in world coordinates.
    pub fn world_corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_extents();
        let r = self.rotation();
        let mut out = [Vector3::zeros(); 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let local = Vector3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            *corner = self.scale_factor * (r * local) + self.center;
        }
        out
    }

    /// Same box with the identity pose; used for object-centric instance views.
    pub fn canonical(&self) -> InstanceLayout {
        InstanceLayout {
            center: Vector3::zeros(),
            scale_factor: 1.0,
            yaw: 0.0,
            ..self.clone()
        }
    }
}

pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

pub fn rot_z(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Derivative of [`rot_z`] with respect to the angle.
pub fn rot_z_derivative(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}
