use rayon::prelude::*;

use super::project::{project, ProjectedGaussian};
use super::{Image, RasterConfig, RenderedImage};
use crate::scene::{Camera, SceneSnapshot};

pub const TILE_SIZE: usize = 16;

/// Projected Gaussians in compositing order plus per-tile lists.
pub(crate) struct Prepared {
    pub projected: Vec<ProjectedGaussian>,
    /// Indices into `projected`, ascending (hence front to back).
    pub tiles: Vec<Vec<u32>>,
    pub tiles_x: usize,
}

impl Prepared {
    pub fn tile_rect(&self, tile: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, (x0 + TILE_SIZE).min(width), y0, (y0 + TILE_SIZE).min(height))
    }
}

pub(crate) fn prepare(scene: &SceneSnapshot, cam: &Camera, cfg: &RasterConfig) -> Prepared {
    let mut projected: Vec<ProjectedGaussian> = (0..scene.len())
        .filter_map(|n| {
            project(
                n as u32,
                &scene.world_positions[n],
                &scene.world_covariances[n],
                scene.opacities[n],
                &scene.colors[n],
                cam,
                cfg,
            )
        })
        .collect();
    // center depth, then snapshot order (owner-major, then local index)
    projected.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));

    let tiles_x = cam.width.div_ceil(TILE_SIZE);
    let tiles_y = cam.height.div_ceil(TILE_SIZE);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (j, g) in projected.iter().enumerate() {
        if let Some((c0, c1, r0, r1)) = g.pixel_bounds(cam.width, cam.height) {
            for ty in r0 / TILE_SIZE..=r1 / TILE_SIZE {
                for tx in c0 / TILE_SIZE..=c1 / TILE_SIZE {
                    tiles[ty * tiles_x + tx].push(j as u32);
                }
            }
        }
    }
    Prepared {
        projected,
        tiles,
        tiles_x,
    }
}

/// Gaussian evaluation at one pixel: `(α', exp term, dx, dy)`.
#[inline]
pub(crate) fn evaluate(g: &ProjectedGaussian, qx: f64, qy: f64) -> Option<(f64, f64, f64, f64)> {
    if !g.covers(qx, qy) {
        return None;
    }
    let dx = qx - g.mean2d[0];
    let dy = qy - g.mean2d[1];
    let [a, b, c] = g.conic;
    let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
    let gauss = power.exp();
    Some((g.opacity * gauss, gauss, dx, dy))
}

struct PixelOut {
    rgb: [f64; 3],
    alpha: f64,
    count: u32,
}

/// Tiled front-to-back compositing of `scene` as seen from `cam`.
pub fn render_forward(
    scene: &SceneSnapshot,
    cam: &Camera,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> RenderedImage {
    let (w, h) = (cam.width, cam.height);
    let prep = prepare(scene, cam, cfg);

    let tiles: Vec<Vec<PixelOut>> = (0..prep.tiles.len())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = prep.tile_rect(t, w, h);
            let list = &prep.tiles[t];
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for row in y0..y1 {
                for col in x0..x1 {
                    let qx = col as f64 + 0.5;
                    let qy = row as f64 + 0.5;
                    let mut t_acc = 1.0;
                    let mut rgb = [0.0; 3];
                    let mut count = 0;
                    for &j in list {
                        let g = &prep.projected[j as usize];
                        let Some((a, ..)) = evaluate(g, qx, qy) else {
                            continue;
                        };
                        let weight = a * t_acc;
                        rgb[0] += g.color[0] * weight;
                        rgb[1] += g.color[1] * weight;
                        rgb[2] += g.color[2] * weight;
                        t_acc *= 1.0 - a;
                        count += 1;
                        if t_acc < cfg.transmittance_cutoff {
                            break;
                        }
                    }
                    for k in 0..3 {
                        rgb[k] += t_acc * background[k];
                    }
                    out.push(PixelOut {
                        rgb,
                        alpha: 1.0 - t_acc,
                        count,
                    });
                }
            }
            out
        })
        .collect();

    let mut rgb = Image::new(w, h);
    let mut alpha = vec![0.0; w * h];
    let mut contributors = vec![0; w * h];
    for (t, pixels) in tiles.into_iter().enumerate() {
        let (x0, x1, y0, _) = prep.tile_rect(t, w, h);
        let tw = x1 - x0;
        for (k, px) in pixels.into_iter().enumerate() {
            let col = x0 + k % tw;
            let row = y0 + k / tw;
            rgb.set_pixel(col, row, px.rgb);
            alpha[row * w + col] = px.alpha;
            contributors[row * w + col] = px.count;
        }
    }
    RenderedImage {
        rgb,
        alpha,
        contributors,
    }
}
