use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SceneError;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-instance Gaussian parameters, stored as flat raw arrays in the
/// layout-local frame.
///
/// Activations: scale = `exp(scales_raw)`, opacity = `sigmoid(opacity_raw)`,
/// color = `sigmoid(colors_raw)`. Rotations are quaternions `(w, x, y, z)`
/// kept at unit norm by the optimizer; gradients treat them as raw
/// 4-vectors normalized on use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceGaussians {
    pub positions: Vec<f64>,
    pub rotations: Vec<f64>,
    pub scales_raw: Vec<f64>,
    pub opacity_raw: Vec<f64>,
    pub colors_raw: Vec<f64>,
}

impl InstanceGaussians {
    pub fn zeros(count: usize) -> Self {
        let mut rotations = vec![0.0; 4 * count];
        for q in rotations.chunks_exact_mut(4) {
            q[0] = 1.0;
        }
        Self {
            positions: vec![0.0; 3 * count],
            rotations,
            scales_raw: vec![0.0; 3 * count],
            opacity_raw: vec![0.0; count],
            colors_raw: vec![0.0; 3 * count],
        }
    }

    pub fn len(&self) -> usize {
        self.opacity_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity_raw.is_empty()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let m = self.len();
        if self.positions.len() != 3 * m
            || self.rotations.len() != 4 * m
            || self.scales_raw.len() != 3 * m
            || self.colors_raw.len() != 3 * m
        {
            return Err(SceneError::ShapeMismatch(format!(
                "gaussian arrays disagree on count {m}"
            )));
        }
        Ok(())
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        Vector3::from_column_slice(&self.positions[3 * i..3 * i + 3])
    }

    pub fn set_position(&mut self, i: usize, p: Vector3<f64>) {
        self.positions[3 * i..3 * i + 3].copy_from_slice(p.as_slice());
    }

    pub fn quaternion(&self, i: usize) -> [f64; 4] {
        let q = &self.rotations[4 * i..4 * i + 4];
        [q[0], q[1], q[2], q[3]]
    }

    pub fn scale(&self, i: usize) -> Vector3<f64> {
        Vector3::from_iterator(self.scales_raw[3 * i..3 * i + 3].iter().map(|s| s.exp()))
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.opacity_raw[i])
    }

    pub fn color(&self, i: usize) -> Vector3<f64> {
        Vector3::from_iterator(self.colors_raw[3 * i..3 * i + 3].iter().map(|c| sigmoid(*c)))
    }

    /// Local-frame covariance `R S Sᵀ Rᵀ` of Gaussian `i`.
    pub fn covariance(&self, i: usize) -> Matrix3<f64> {
        let q = normalize_quat(self.quaternion(i));
        let r = quat_to_matrix(q);
        covariance_from(&r, &self.scale(i))
    }

    /// Rescales every quaternion to unit norm.
    pub fn renormalize_rotations(&mut self) {
        for q in self.rotations.chunks_exact_mut(4) {
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if n > 0.0 && n != 1.0 {
                for c in q.iter_mut() {
                    *c /= n;
                }
            }
        }
    }
}

pub fn normalize_quat(q: [f64; 4]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Hamilton product `a * b`.
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [aw, ax, ay, az] = a;
    let [bw, bx, by, bz] = b;
    [
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ]
}

pub(crate) fn covariance_from(r: &Matrix3<f64>, s: &Vector3<f64>) -> Matrix3<f64> {
    let m = r * Matrix3::from_diagonal(s);
    m * m.transpose()
}

/// Gradient of `⟨G, R(q/|q|)⟩` with respect to the raw quaternion `q`.
pub fn quat_matrix_grad(q_raw: [f64; 4], d_r: &Matrix3<f64>) -> [f64; 4] {
    let n = (q_raw.iter().map(|c| c * c).sum::<f64>()).sqrt();
    let [w, x, y, z] = [q_raw[0] / n, q_raw[1] / n, q_raw[2] / n, q_raw[3] / n];
    let g = |r: usize, c: usize| d_r[(r, c)];

    let dw = 2.0
        * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    let dx = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2)
        + z * g(2, 0)
        + w * g(2, 1)
        - 2.0 * x * g(2, 2));
    let dy = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2)
        - w * g(2, 0)
        + z * g(2, 1)
        - 2.0 * y * g(2, 2));
    let dz = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0)
        - 2.0 * z * g(1, 1)
        + y * g(1, 2)
        + x * g(2, 0)
        + y * g(2, 1));

    let unit = [w, x, y, z];
    let grad = [dw, dx, dy, dz];
    let dot: f64 = unit.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
    [
        (grad[0] - unit[0] * dot) / n,
        (grad[1] - unit[1] * dot) / n,
        (grad[2] - unit[2] * dot) / n,
        (grad[3] - unit[3] * dot) / n,
    ]
}
