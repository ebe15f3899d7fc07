//! Chain rule from world-frame Gaussian gradients to the raw instance
//! parameters and the layout pose.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::gaussians::{normalize_quat, quat_matrix_grad, quat_to_matrix, InstanceGaussians};
use super::layout::{rot_z, rot_z_derivative, InstanceLayout};
use super::snapshot::SceneSnapshot;

/// Gradient with respect to the activated world-frame quantities of each
/// snapshot Gaussian.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldGrads {
    pub position: Vec<Vector3<f64>>,
    pub covariance: Vec<Matrix3<f64>>,
    pub opacity: Vec<f64>,
    pub color: Vec<Vector3<f64>>,
}

impl WorldGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            position: vec![Vector3::zeros(); n],
            covariance: vec![Matrix3::zeros(); n],
            opacity: vec![0.0; n],
            color: vec![Vector3::zeros(); n],
        }
    }
}

/// Gradient with the same flat layout as [`InstanceGaussians`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianGrads {
    pub positions: Vec<f64>,
    pub rotations: Vec<f64>,
    pub scales_raw: Vec<f64>,
    pub opacity_raw: Vec<f64>,
    pub colors_raw: Vec<f64>,
}

impl GaussianGrads {
    pub fn zeros(count: usize) -> Self {
        Self {
            positions: vec![0.0; 3 * count],
            rotations: vec![0.0; 4 * count],
            scales_raw: vec![0.0; 3 * count],
            opacity_raw: vec![0.0; count],
            colors_raw: vec![0.0; 3 * count],
        }
    }

    pub fn groups(&self) -> [&[f64]; 5] {
        [&self.positions, &self.rotations, &self.scales_raw, &self.opacity_raw, &self.colors_raw]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.positions,
            &mut self.rotations,
            &mut self.scales_raw,
            &mut self.opacity_raw,
            &mut self.colors_raw,
        ]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GaussianGrads, scale: f64) {
        for (dst, src) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| *v == 0.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutGrads {
    pub center: Vector3<f64>,
    pub scale_factor: f64,
    pub yaw: f64,
    pub opacity_bias: f64,
}

impl LayoutGrads {
    pub fn add_scaled(&mut self, other: &LayoutGrads, scale: f64) {
        self.center += scale * other.center;
        self.scale_factor += scale * other.scale_factor;
        self.yaw += scale * other.yaw;
        self.opacity_bias += scale * other.opacity_bias;
    }

    pub fn is_finite(&self) -> bool {
        self.center.iter().all(|v| v.is_finite())
            && self.scale_factor.is_finite()
            && self.yaw.is_finite()
            && self.opacity_bias.is_finite()
    }
}

/// Gradients for one instance: its local Gaussians and its layout pose.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceGrads {
    pub gaussians: GaussianGrads,
    pub layout: LayoutGrads,
}

/// Pulls world-frame gradients back through the layout transform and the
/// parameter activations. `instances` must be in the order they were
/// assembled into `snapshot`.
pub fn chain_to_parameters(
    instances: &[(&InstanceLayout, &InstanceGaussians)],
    snapshot: &SceneSnapshot,
    world: &WorldGrads,
) -> Vec<InstanceGrads> {
    let mut out: Vec<InstanceGrads> = instances
        .iter()
        .map(|(_, g)| InstanceGrads {
            gaussians: GaussianGrads::zeros(g.len()),
            layout: LayoutGrads::default(),
        })
        .collect();

    let frames: Vec<(Matrix3<f64>, Matrix3<f64>)> = instances
        .iter()
        .map(|(l, _)| (rot_z(l.yaw), rot_z_derivative(l.yaw)))
        .collect();

    for n in 0..snapshot.len() {
        let owner = snapshot.owner[n] as usize;
        let i = snapshot.local_index[n] as usize;
        let (layout, gaussians) = instances[owner];
        let (rz, drz) = &frames[owner];
        let k = layout.scale_factor;
        let acc = &mut out[owner];

        // position: m = k Rz p + ζ
        let gm = world.position[n];
        let p = gaussians.position(i);
        let dp = k * (rz.transpose() * gm);
        for a in 0..3 {
            acc.gaussians.positions[3 * i + a] += dp[a];
        }
        acc.layout.center += gm;
        acc.layout.scale_factor += (rz * p).dot(&gm);
        acc.layout.yaw += k * (drz * p).dot(&gm);

        // covariance: Σw = k² Rz Σo Rzᵀ, Σo = (R S)(R S)ᵀ
        let gw = world.covariance[n];
        let q = gaussians.quaternion(i);
        let r = quat_to_matrix(normalize_quat(q));
        let s = gaussians.scale(i);
        let m = r * Matrix3::from_diagonal(&s);
        let sigma_o = m * m.transpose();
        acc.layout.scale_factor += 2.0 * k * gw.dot(&(rz * sigma_o * rz.transpose()));
        acc.layout.yaw +=
            k * k * gw.dot(&(drz * sigma_o * rz.transpose() + rz * sigma_o * drz.transpose()));
        let go = k * k * (rz.transpose() * gw * rz);
        let gm_mat = (go + go.transpose()) * m;
        let mut gr = gm_mat;
        for j in 0..3 {
            let mut col = gr.column_mut(j);
            col *= s[j];
        }
        let dq = quat_matrix_grad(q, &gr);
        acc.gaussians.rotations[4 * i..4 * i + 4]
            .iter_mut()
            .zip(dq)
            .for_each(|(d, v)| *d += v);
        let rt_gm = r.transpose() * gm_mat;
        for j in 0..3 {
            acc.gaussians.scales_raw[3 * i + j] += rt_gm[(j, j)] * s[j];
        }

        // opacity = sigmoid(raw + bias)
        let alpha = snapshot.opacities[n];
        let d_raw = world.opacity[n] * alpha * (1.0 - alpha);
        acc.gaussians.opacity_raw[i] += d_raw;
        acc.layout.opacity_bias += d_raw;

        // color = sigmoid(raw)
        let c = snapshot.colors[n];
        for a in 0..3 {
            acc.gaussians.colors_raw[3 * i + a] += world.color[n][a] * c[a] * (1.0 - c[a]);
        }
    }
    out
}
