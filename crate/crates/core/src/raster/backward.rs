use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};
use rayon::prelude::*;

use super::forward::{evaluate, prepare};
use super::{Image, RasterConfig, RasterError};
use crate::scene::{chain_to_parameters, Camera, InstanceGaussians, InstanceGrads, InstanceLayout, SceneSnapshot, WorldGrads};

// per-Gaussian screen-space accumulator layout
const D_MEAN: usize = 0; // 2
const D_CONIC: usize = 2; // 3: xx, xy, yy
const D_OPACITY: usize = 5;
const D_COLOR: usize = 6; // 3
type Acc = [f64; 9];

struct Layer {
    local: u32,
    alpha: f64,
    gauss: f64,
    dx: f64,
    dy: f64,
    t_before: f64,
}

/// Gradient of `⟨residual, render_forward(scene)⟩` with respect to the
/// world-frame quantities of every snapshot Gaussian.
pub fn backward_world(
    scene: &SceneSnapshot,
    cam: &Camera,
    background: [f64; 3],
    residual: &Image,
    cfg: &RasterConfig,
) -> Result<WorldGrads, RasterError> {
    let (w, h) = (cam.width, cam.height);
    if residual.width != w || residual.height != h {
        return Err(RasterError::ResidualShape {
            got_w: residual.width,
            got_h: residual.height,
            want_w: w,
            want_h: h,
        });
    }
    let prep = prepare(scene, cam, cfg);

    let per_tile: Vec<Vec<Acc>> = (0..prep.tiles.len())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = prep.tile_rect(t, w, h);
            let list = &prep.tiles[t];
            let mut acc = vec![[0.0; 9]; list.len()];
            let mut layers: Vec<Layer> = Vec::new();
            for row in y0..y1 {
                for col in x0..x1 {
                    let r = residual.pixel(col, row);
                    if r == [0.0; 3] {
                        continue;
                    }
                    let qx = col as f64 + 0.5;
                    let qy = row as f64 + 0.5;
                    layers.clear();
                    let mut t_acc = 1.0;
                    for (l, &j) in list.iter().enumerate() {
                        let g = &prep.projected[j as usize];
                        let Some((alpha, gauss, dx, dy)) = evaluate(g, qx, qy) else {
                            continue;
                        };
                        layers.push(Layer {
                            local: l as u32,
                            alpha,
                            gauss,
                            dx,
                            dy,
                            t_before: t_acc,
                        });
                        t_acc *= 1.0 - alpha;
                        if t_acc < cfg.transmittance_cutoff {
                            break;
                        }
                    }
                    // color seen behind the current layer
                    let mut behind = background;
                    for layer in layers.iter().rev() {
                        let g = &prep.projected[list[layer.local as usize] as usize];
                        let a = &mut acc[layer.local as usize];
                        let wgt = layer.alpha * layer.t_before;
                        let mut d_alpha = 0.0;
                        for k in 0..3 {
                            a[D_COLOR + k] += r[k] * wgt;
                            d_alpha += r[k] * (g.color[k] - behind[k]);
                            behind[k] = g.color[k] * layer.alpha + (1.0 - layer.alpha) * behind[k];
                        }
                        d_alpha *= layer.t_before;
                        a[D_OPACITY] += d_alpha * layer.gauss;
                        let d_power = d_alpha * layer.alpha;
                        let [ca, cb, cc] = g.conic;
                        let (dx, dy) = (layer.dx, layer.dy);
                        a[D_MEAN] += d_power * (ca * dx + cb * dy);
                        a[D_MEAN + 1] += d_power * (cb * dx + cc * dy);
                        a[D_CONIC] += -0.5 * dx * dx * d_power;
                        a[D_CONIC + 1] += -dx * dy * d_power;
                        a[D_CONIC + 2] += -0.5 * dy * dy * d_power;
                    }
                }
            }
            acc
        })
        .collect();

    // fixed tile order keeps the sum independent of scheduling
    let mut screen = vec![[0.0; 9]; prep.projected.len()];
    for (t, acc) in per_tile.iter().enumerate() {
        for (l, &j) in prep.tiles[t].iter().enumerate() {
            let dst = &mut screen[j as usize];
            for (d, s) in dst.iter_mut().zip(acc[l].iter()) {
                *d += s;
            }
        }
    }

    let mut grads = WorldGrads::zeros(scene.len());
    let rot = cam.rotation;
    for (g, s) in prep.projected.iter().zip(&screen) {
        let n = g.index as usize;
        grads.opacity[n] = s[D_OPACITY];
        grads.color[n] = Vector3::new(s[D_COLOR], s[D_COLOR + 1], s[D_COLOR + 2]);

        let pc = g.cam_position;
        let (x, y, z) = (pc.x, pc.y, pc.z);
        let (fx, fy) = (cam.fx, cam.fy);
        let iz = 1.0 / z;
        let iz2 = iz * iz;
        let jac = Matrix2x3::new(fx * iz, 0.0, -fx * x * iz2, 0.0, fy * iz, -fy * y * iz2);
        let sigma_cam = rot * scene.world_covariances[n] * rot.transpose();

        let conic = Matrix2::new(g.conic[0], g.conic[1], g.conic[1], g.conic[2]);
        let h_conic = Matrix2::new(s[D_CONIC], 0.5 * s[D_CONIC + 1], 0.5 * s[D_CONIC + 1], s[D_CONIC + 2]);
        let g_cov2 = -(conic * h_conic * conic);
        let g_sigma_cam: Matrix3<f64> = jac.transpose() * g_cov2 * jac;
        let g_jac: Matrix2x3<f64> = 2.0 * g_cov2 * jac * sigma_cam;

        let (gu, gv) = (s[D_MEAN], s[D_MEAN + 1]);
        let mut d_pc = Vector3::new(gu * fx * iz, gv * fy * iz, -(gu * fx * x + gv * fy * y) * iz2);
        d_pc.x += g_jac[(0, 2)] * (-fx * iz2);
        d_pc.y += g_jac[(1, 2)] * (-fy * iz2);
        d_pc.z += g_jac[(0, 0)] * (-fx * iz2)
            + g_jac[(0, 2)] * (2.0 * fx * x * iz2 * iz)
            + g_jac[(1, 1)] * (-fy * iz2)
            + g_jac[(1, 2)] * (2.0 * fy * y * iz2 * iz);

        grads.position[n] = rot.transpose() * d_pc;
        grads.covariance[n] = rot.transpose() * g_sigma_cam * rot;
    }
    Ok(grads)
}

/// Gradient of `⟨residual, I⟩` with respect to every instance's raw Gaussian
/// parameters and layout pose, where `I` is the forward render of
/// `snapshot` (which must have been assembled from `instances`, in order).
pub fn render_backward(
    instances: &[(&InstanceLayout, &InstanceGaussians)],
    snapshot: &SceneSnapshot,
    cam: &Camera,
    background: [f64; 3],
    residual: &Image,
    cfg: &RasterConfig,
) -> Result<Vec<InstanceGrads>, RasterError> {
    let world = backward_world(snapshot, cam, background, residual, cfg)?;
    Ok(chain_to_parameters(instances, snapshot, &world))
}
