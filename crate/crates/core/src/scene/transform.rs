//! Instance-to-scene similarity transforms.

use nalgebra::{Matrix3, SMatrix, Vector3};

use super::gaussians::{covariance_from, normalize_quat, quat_to_matrix};
use super::layout::{rot_z, rot_z_derivative, InstanceLayout};
use super::SceneError;

/// `k · Rz(φ) · p + ζ`.
pub fn compose_position(p: &Vector3<f64>, layout: &InstanceLayout) -> Vector3<f64> {
    layout.scale_factor * (rot_z(layout.yaw) * p) + layout.center
}

/// Inverse of [`compose_position`]: world point to layout-local frame.
pub fn inverse_compose_position(world: &Vector3<f64>, layout: &InstanceLayout) -> Vector3<f64> {
    rot_z(layout.yaw).transpose() * (world - layout.center) / layout.scale_factor
}

/// `k² · Rz(φ) · Σ · Rz(φ)ᵀ`.
pub fn compose_covariance(sigma: &Matrix3<f64>, layout: &InstanceLayout) -> Matrix3<f64> {
    let r = rot_z(layout.yaw);
    let k2 = layout.scale_factor * layout.scale_factor;
    let out = k2 * (r * sigma * r.transpose());
    // exact symmetry keeps downstream eigen/PSD checks clean
    (out + out.transpose()) * 0.5
}

/// Builds `R S Sᵀ Rᵀ` from a unit quaternion `(w, x, y, z)` and positive scales.
pub fn build_covariance(rotation: [f64; 4], scales: &Vector3<f64>) -> Result<Matrix3<f64>, SceneError> {
    let norm = rotation.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-4 {
        return Err(SceneError::NonUnitQuaternion(norm));
    }
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(SceneError::NonPositiveScale);
    }
    Ok(covariance_from(&quat_to_matrix(normalize_quat(rotation)), scales))
}

/// Jacobian of [`compose_position`] with respect to `(ζx, ζy, ζz, k, φ)`.
pub fn compose_position_jacobian(p: &Vector3<f64>, layout: &InstanceLayout) -> SMatrix<f64, 3, 5> {
    let rp = rot_z(layout.yaw) * p;
    let drp = layout.scale_factor * (rot_z_derivative(layout.yaw) * p);
    let mut j = SMatrix::<f64, 3, 5>::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    j.set_column(3, &rp);
    j.set_column(4, &drp);
    j
}
