use nalgebra::{Matrix3, Vector3};

use super::{RasterConfig, RasterError};
use crate::scene::Camera;

/// A Gaussian after projection into the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedGaussian {
    /// Index into the snapshot.
    pub index: u32,
    /// Pixel-space center.
    pub mean2d: [f64; 2],
    /// Dilated 2D covariance `(xx, xy, yy)`.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, `(xx, xy, yy)`.
    pub conic: [f64; 3],
    /// Camera-space depth of the center.
    pub depth: f64,
    /// Footprint half-sizes along x and y (the axis-aligned box of the
    /// `extent_sigmas` ellipse).
    pub radius: [f64; 2],
    pub opacity: f64,
    pub color: [f64; 3],
    pub cam_position: Vector3<f64>,
}

impl ProjectedGaussian {
    /// Whether the pixel center `(qx, qy)` lies inside the footprint box.
    #[inline]
    pub fn covers(&self, qx: f64, qy: f64) -> bool {
        (qx - self.mean2d[0]).abs() <= self.radius[0] && (qy - self.mean2d[1]).abs() <= self.radius[1]
    }

    /// Inclusive pixel ranges `(col_lo, col_hi, row_lo, row_hi)` that may be
    /// covered, widened by one pixel and clipped to the viewport.
    pub fn pixel_bounds(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let lo_x = (self.mean2d[0] - self.radius[0] - 0.5).ceil() - 1.0;
        let hi_x = (self.mean2d[0] + self.radius[0] - 0.5).floor() + 1.0;
        let lo_y = (self.mean2d[1] - self.radius[1] - 0.5).ceil() - 1.0;
        let hi_y = (self.mean2d[1] + self.radius[1] - 0.5).floor() + 1.0;
        if !(hi_x >= 0.0 && hi_y >= 0.0 && lo_x <= (width - 1) as f64 && lo_y <= (height - 1) as f64) {
            return None;
        }
        let clamp = |v: f64, max: usize| v.max(0.0).min(max as f64) as usize;
        Some((clamp(lo_x, width - 1), clamp(hi_x, width - 1), clamp(lo_y, height - 1), clamp(hi_y, height - 1)))
    }
}

/// Projects one world-frame Gaussian. Returns `None` when it is culled:
/// center at or behind the near plane, a degenerate footprint, or a
/// footprint that misses the viewport.
#[allow(clippy::too_many_arguments)]
pub fn project(
    index: u32,
    position: &Vector3<f64>,
    covariance: &Matrix3<f64>,
    opacity: f64,
    color: &Vector3<f64>,
    cam: &Camera,
    cfg: &RasterConfig,
) -> Option<ProjectedGaussian> {
    let pc = cam.to_camera(position);
    if !(pc.z > cfg.near_plane) {
        return None;
    }
    let inv_z = 1.0 / pc.z;
    let u = cam.fx * pc.x * inv_z + cam.cx;
    let v = cam.fy * pc.y * inv_z + cam.cy;

    let sc = cam.rotation * covariance * cam.rotation.transpose();
    // J = [[j00, 0, j02], [0, j11, j12]]
    let j00 = cam.fx * inv_z;
    let j02 = -cam.fx * pc.x * inv_z * inv_z;
    let j11 = cam.fy * inv_z;
    let j12 = -cam.fy * pc.y * inv_z * inv_z;
    // rows of J·Σc
    let a0 = [
        j00 * sc[(0, 0)] + j02 * sc[(2, 0)],
        j00 * sc[(0, 1)] + j02 * sc[(2, 1)],
        j00 * sc[(0, 2)] + j02 * sc[(2, 2)],
    ];
    let a1 = [
        j11 * sc[(1, 0)] + j12 * sc[(2, 0)],
        j11 * sc[(1, 1)] + j12 * sc[(2, 1)],
        j11 * sc[(1, 2)] + j12 * sc[(2, 2)],
    ];
    let xx = a0[0] * j00 + a0[2] * j02 + cfg.dilation;
    let xy = a0[1] * j11 + a0[2] * j12;
    let yy = a1[1] * j11 + a1[2] * j12 + cfg.dilation;
    let det = xx * yy - xy * xy;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let pg = ProjectedGaussian {
        index,
        mean2d: [u, v],
        cov2d: [xx, xy, yy],
        conic: [yy * inv_det, -xy * inv_det, xx * inv_det],
        depth: pc.z,
        radius: [cfg.extent_sigmas * xx.sqrt(), cfg.extent_sigmas * yy.sqrt()],
        opacity,
        color: [color[0], color[1], color[2]],
        cam_position: pc,
    };
    pg.pixel_bounds(cam.width, cam.height)?;
    Some(pg)
}

/// `α · exp(-½ (q - P)ᵀ Σ'⁻¹ (q - P))`.
pub fn pixel_opacity(pg: &ProjectedGaussian, q: [f64; 2], alpha: f64) -> Result<f64, RasterError> {
    let [xx, xy, yy] = pg.cov2d;
    let det = xx * yy - xy * xy;
    if !(det > 0.0) {
        return Err(RasterError::SingularCovariance(det));
    }
    let dx = q[0] - pg.mean2d[0];
    let dy = q[1] - pg.mean2d[1];
    let maha = (yy * dx * dx - 2.0 * xy * dx * dy + xx * dy * dy) / det;
    Ok(alpha * (-0.5 * maha).exp())
}
