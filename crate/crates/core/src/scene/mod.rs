//! Layout-guided Gaussian representation: per-instance parameters, layout
//! boxes, and their assembly into one world-frame scene.

mod camera;
mod gaussians;
mod grad;
mod layout;
mod snapshot;
mod transform;

use thiserror::Error;

pub use camera::Camera;
pub use gaussians::{logit, normalize_quat, quat_mul, quat_to_matrix, sigmoid, InstanceGaussians};
pub use grad::{chain_to_parameters, GaussianGrads, InstanceGrads, LayoutGrads, WorldGrads};
pub use layout::{normalize_yaw, rot_z, rot_z_derivative, InstanceLayout, Learnable};
pub use snapshot::{assemble_scene, SceneSnapshot};
pub use transform::{
    build_covariance, compose_covariance, compose_position, compose_position_jacobian,
    inverse_compose_position,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene has no instances")]
    EmptyScene,
    #[error("invalid layout {id}: {reason}")]
    InvalidLayout { id: String, reason: String },
    #[error("quaternion norm {0} deviates from 1 by more than 1e-4")]
    NonUnitQuaternion(f64),
    #[error("scales must be strictly positive")]
    NonPositiveScale,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}
