use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use super::gaussians::{normalize_quat, quat_mul, sigmoid, InstanceGaussians};
use super::layout::InstanceLayout;
use super::transform::{compose_covariance, compose_position};
use super::SceneError;

/// Flattened world-frame Gaussians of a whole scene. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneSnapshot {
    pub world_positions: Vec<Vector3<f64>>,
    pub world_covariances: Vec<Matrix3<f64>>,
    /// World-frame rotation `(w, x, y, z)` and log-scale of each Gaussian;
    /// `world_covariances` is built from these.
    pub world_rotations: Vec<[f64; 4]>,
    pub world_log_scales: Vec<Vector3<f64>>,
    pub opacities: Vec<f64>,
    pub colors: Vec<Vector3<f64>>,
    /// Index into `instance_ids` for each Gaussian.
    pub owner: Vec<u32>,
    /// Index of the Gaussian within its instance.
    pub local_index: Vec<u32>,
    pub instance_ids: Vec<String>,
}

impl SceneSnapshot {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.opacities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacities.is_empty()
    }

    pub fn owner_id(&self, gaussian: usize) -> &str {
        &self.instance_ids[self.owner[gaussian] as usize]
    }

    pub fn into_shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    fn push_instance(&mut self, layout: &InstanceLayout, gaussians: &InstanceGaussians) {
        let owner = self.instance_ids.len() as u32;
        self.instance_ids.push(layout.id.clone());
        let half = 0.5 * layout.yaw;
        let yaw_quat = [half.cos(), 0.0, 0.0, half.sin()];
        let log_k = layout.scale_factor.ln();
        for i in 0..gaussians.len() {
            self.world_positions.push(compose_position(&gaussians.position(i), layout));
            self.world_covariances.push(compose_covariance(&gaussians.covariance(i), layout));
            self.world_rotations.push(quat_mul(yaw_quat, normalize_quat(gaussians.quaternion(i))));
            let raw = &gaussians.scales_raw[3 * i..3 * i + 3];
            self.world_log_scales.push(Vector3::new(raw[0] + log_k, raw[1] + log_k, raw[2] + log_k));
            self.opacities.push(sigmoid(gaussians.opacity_raw[i] + layout.opacity_bias));
            self.colors.push(gaussians.color(i));
            self.owner.push(owner);
            self.local_index.push(i as u32);
        }
    }
}

/// Transforms every instance's Gaussians into the shared world frame.
pub fn assemble_scene<'a, I>(instances: I) -> Result<SceneSnapshot, SceneError>
where
    I: IntoIterator<Item = (&'a InstanceLayout, &'a InstanceGaussians)>,
{
    let mut snapshot = SceneSnapshot::empty();
    let mut any = false;
    for (layout, gaussians) in instances {
        layout.validate()?;
        gaussians.validate()?;
        snapshot.push_instance(layout, gaussians);
        any = true;
    }
    if !any {
        return Err(SceneError::EmptyScene);
    }
    Ok(snapshot)
}
