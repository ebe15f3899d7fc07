//! Adaptive geometry control: surface-concentrated initialization of
//! Gaussian centers and the flatness regularizer.
//!
//! Sampling draws a direction `d` uniformly on the sphere and a normalized
//! reciprocal radius `u = r_b(d) / ‖p‖` from a folded normal truncated to
//! `[1, ∞)`, where `r_b(d)` is the distance from the box center to the box
//! boundary along `d`. The truncation keeps every sample inside the box and
//! a small `σ` with `μ = 1` pulls samples onto the surface.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::scene::{logit, GaussianGrads, InstanceGaussians, InstanceLayout};

/// Particle count per instance used at full scale.
pub const FULL_SCALE_PARTICLES: usize = 100_000;
/// Particle count used by the desk-scale configurations.
pub const DESK_SCALE_PARTICLES: usize = 5_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceSamplingConfig {
    pub mu: f64,
    pub sigma: f64,
    pub particle_count: usize,
}

impl Default for SurfaceSamplingConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            sigma: 0.3,
            particle_count: FULL_SCALE_PARTICLES,
        }
    }
}

impl SurfaceSamplingConfig {
    pub fn desk() -> Self {
        Self {
            particle_count: DESK_SCALE_PARTICLES,
            ..Self::default()
        }
    }

    pub fn with_particles(mut self, particle_count: usize) -> Self {
        self.particle_count = particle_count;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(GeometryError::InvalidConfig(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.mu >= 1.0) || !self.mu.is_finite() {
            return Err(GeometryError::InvalidConfig(format!("mu must be >= 1, got {}", self.mu)));
        }
        if self.particle_count == 0 {
            return Err(GeometryError::InvalidConfig("particle_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// `P(X > x)` for `X ~ FoldedNormal(μ, σ²)`, `x ≥ 0`.
pub fn folded_normal_survival(x: f64, mu: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * (libm::erfc((x - mu) / s) + libm::erfc((x + mu) / s))
}

/// Inverse CDF of the folded normal truncated to `[1, ∞)`, at `p ∈ [0, 1)`.
pub fn truncated_folded_normal_quantile(p: f64, mu: f64, sigma: f64) -> f64 {
    let tail = folded_normal_survival(1.0, mu, sigma);
    let target = (1.0 - p) * tail;
    let mut lo = 1.0;
    let mut hi = mu.max(1.0) + sigma;
    while folded_normal_survival(hi, mu, sigma) > target {
        lo = hi;
        hi += 4.0 * sigma;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if folded_normal_survival(mid, mu, sigma) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Distance from the box center to its boundary along the unit direction `d`.
pub fn boundary_distance(half: &Vector3<f64>, d: &Vector3<f64>) -> f64 {
    (0..3)
        .filter(|&a| d[a] != 0.0)
        .map(|a| half[a] / d[a].abs())
        .fold(f64::INFINITY, f64::min)
}

/// Samples `cfg.particle_count` layout-local centers inside the box.
/// Returns a flat `3·M` array.
pub fn sample_surface_positions(
    layout: &InstanceLayout,
    cfg: &SurfaceSamplingConfig,
    seed: u64,
) -> Result<Vec<f64>, GeometryError> {
    cfg.validate()?;
    let half = layout.half_extents();
    let mut rng = rng::stream(seed, &format!("surface/{}", layout.id));
    let mut out = Vec::with_capacity(3 * cfg.particle_count);
    for _ in 0..cfg.particle_count {
        let d = Vector3::from(rng::unit_vector(&mut rng));
        let u = truncated_folded_normal_quantile(rand::Rng::random::<f64>(&mut rng), cfg.mu, cfg.sigma);
        let p = d * (boundary_distance(&half, &d) / u);
        // guard against the last-ulp overshoot of r_b(d)·d
        let p = p.zip_map(&half, |v, h| v.clamp(-h, h));
        out.extend_from_slice(p.as_slice());
    }
    Ok(out)
}

/// Closest point on the surface of the layout box to the layout-local point
/// `p`. Interior points go to the nearest face (ties broken in x, y, z
/// order); exterior points are clamped componentwise.
pub fn nearest_surface_point(p: &Vector3<f64>, layout: &InstanceLayout) -> Vector3<f64> {
    let half = layout.half_extents();
    let outside = (0..3).any(|a| p[a].abs() > half[a]);
    if outside {
        return p.zip_map(&half, |v, h| v.clamp(-h, h));
    }
    let mut axis = 0;
    let mut best = f64::INFINITY;
    for a in 0..3 {
        let gap = half[a] - p[a].abs();
        if gap < best {
            best = gap;
            axis = a;
        }
    }
    let mut q = *p;
    q[axis] = if p[axis] < 0.0 { -half[axis] } else { half[axis] };
    q
}

/// `(1/M) Σ mean(S_i) ‖q_i − p_i‖` with `q_i` the nearest surface point.
pub fn flatness_regularizer(g: &InstanceGaussians, layout: &InstanceLayout) -> f64 {
    flatness_regularizer_with_grad(g, layout).0
}

/// Regularizer value and its gradient with respect to positions and raw
/// scales.
pub fn flatness_regularizer_with_grad(g: &InstanceGaussians, layout: &InstanceLayout) -> (f64, GaussianGrads) {
    let m = g.len();
    let mut grads = GaussianGrads::zeros(m);
    if m == 0 {
        return (0.0, grads);
    }
    let inv_m = 1.0 / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        let p = g.position(i);
        let q = nearest_surface_point(&p, layout);
        let diff = p - q;
        let dist = diff.norm();
        let s = g.scale(i);
        let mean_s = s.sum() / 3.0;
        total += mean_s * dist;
        for a in 0..3 {
            grads.scales_raw[3 * i + a] = inv_m * dist * s[a] / 3.0;
        }
        if dist > 0.0 {
            let dp = diff / dist * (mean_s * inv_m);
            for a in 0..3 {
                grads.positions[3 * i + a] = dp[a];
            }
        }
    }
    (total * inv_m, grads)
}

/// Fresh Gaussians for a layout: sampled centers, identity rotations,
/// isotropic scale of 1.5× the mean spacing `sqrt(area / M)`, opacity 0.1
/// and mid-gray color.
pub fn init_instance(
    layout: &InstanceLayout,
    cfg: &SurfaceSamplingConfig,
    seed: u64,
) -> Result<InstanceGaussians, GeometryError> {
    let positions = sample_surface_positions(layout, cfg, seed)?;
    let m = cfg.particle_count;
    let e = layout.extents;
    let area = 2.0 * (e.x * e.y + e.y * e.z + e.x * e.z);
    let scale = 1.5 * (area / m as f64).sqrt();
    let mut g = InstanceGaussians::zeros(m);
    g.positions = positions;
    g.scales_raw.fill(libm::log(scale));
    g.opacity_raw.fill(logit(0.1));
    g.colors_raw.fill(0.0);
    Ok(g)
}
