//! Reference renderer: per-pixel full sort and exact compositing with no
//! tiling and no early termination. Intended for small scenes only.

use nalgebra::{Matrix2, Matrix2x3, Vector2};

use super::{Image, RasterConfig, RenderedImage};
use crate::scene::{Camera, SceneSnapshot};

struct Footprint {
    index: usize,
    depth: f64,
    mean: Vector2<f64>,
    inv_cov: Matrix2<f64>,
    half: Vector2<f64>,
}

fn footprints(scene: &SceneSnapshot, cam: &Camera, cfg: &RasterConfig) -> Vec<Footprint> {
    let mut out = Vec::new();
    for n in 0..scene.len() {
        let pc = cam.rotation * scene.world_positions[n] + cam.translation;
        if pc.z <= cfg.near_plane {
            continue;
        }
        let (x, y, z) = (pc.x, pc.y, pc.z);
        let jac = Matrix2x3::new(cam.fx / z, 0.0, -cam.fx * x / (z * z), 0.0, cam.fy / z, -cam.fy * y / (z * z));
        let w = cam.rotation;
        let cov = jac * w * scene.world_covariances[n] * w.transpose() * jac.transpose()
            + Matrix2::identity() * cfg.dilation;
        let Some(inv_cov) = cov.try_inverse() else {
            continue;
        };
        if cov.determinant() <= 0.0 {
            continue;
        }
        out.push(Footprint {
            index: n,
            depth: z,
            mean: Vector2::new(cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy),
            inv_cov,
            half: Vector2::new(cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()) * cfg.extent_sigmas,
        });
    }
    out
}

/// Ordered `(snapshot index, α')` of every Gaussian covering the pixel.
fn pixel_layers(fps: &[Footprint], scene: &SceneSnapshot, col: usize, row: usize) -> Vec<(usize, f64)> {
    let q = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
    let mut hits: Vec<&Footprint> = fps
        .iter()
        .filter(|f| (q.x - f.mean.x).abs() <= f.half.x && (q.y - f.mean.y).abs() <= f.half.y)
        .collect();
    hits.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    hits.iter()
        .map(|f| {
            let d = q - f.mean;
            let maha = (d.transpose() * f.inv_cov * d)[(0, 0)];
            (f.index, scene.opacities[f.index] * (-0.5 * maha).exp())
        })
        .collect()
}

/// Compositing weights `α'_i Π_{j<i}(1 - α'_j)` of one pixel and the final
/// transmittance (the background weight).
pub fn pixel_weights(
    scene: &SceneSnapshot,
    cam: &Camera,
    col: usize,
    row: usize,
    cfg: &RasterConfig,
) -> (Vec<(usize, f64)>, f64) {
    let fps = footprints(scene, cam, cfg);
    let mut t = 1.0;
    let weights = pixel_layers(&fps, scene, col, row)
        .into_iter()
        .map(|(n, a)| {
            let w = a * t;
            t *= 1.0 - a;
            (n, w)
        })
        .collect();
    (weights, t)
}

pub fn render_naive_oracle(
    scene: &SceneSnapshot,
    cam: &Camera,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> RenderedImage {
    let fps = footprints(scene, cam, cfg);
    let (w, h) = (cam.width, cam.height);
    let mut rgb = Image::new(w, h);
    let mut alpha = vec![0.0; w * h];
    let mut contributors = vec![0u32; w * h];
    for row in 0..h {
        for col in 0..w {
            let layers = pixel_layers(&fps, scene, col, row);
            let mut t = 1.0;
            let mut c = [0.0; 3];
            for &(n, a) in &layers {
                for k in 0..3 {
                    c[k] += scene.colors[n][k] * a * t;
                }
                t *= 1.0 - a;
            }
            for k in 0..3 {
                c[k] += t * background[k];
            }
            rgb.set_pixel(col, row, c);
            alpha[row * w + col] = 1.0 - t;
            contributors[row * w + col] = layers.len() as u32;
        }
    }
    RenderedImage {
        rgb,
        alpha,
        contributors,
    }
}

/// Front-to-back snapshot indices of the Gaussians covering each pixel,
/// row-major. Two parameter settings with equal lists lie on the same
/// smooth piece of the render (no footprint entry/exit, no reordering).
pub fn contributor_lists(scene: &SceneSnapshot, cam: &Camera, cfg: &RasterConfig) -> Vec<Vec<usize>> {
    let fps = footprints(scene, cam, cfg);
    let mut out = Vec::with_capacity(cam.width * cam.height);
    for row in 0..cam.height {
        for col in 0..cam.width {
            out.push(pixel_layers(&fps, scene, col, row).into_iter().map(|(n, _)| n).collect());
        }
    }
    out
}
