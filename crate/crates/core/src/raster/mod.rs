//! Differentiable splatting of a [`SceneSnapshot`](crate::scene::SceneSnapshot).
//!
//! The forward pass projects every Gaussian with the local affine
//! approximation of the pinhole projection, sorts globally by camera-space
//! center depth and alpha-composites front to back over a background. The
//! backward pass recomputes each pixel's contributor list and accumulates
//! gradients per tile, then reduces tiles in a fixed order so results do not
//! depend on the thread count.

mod backward;
mod forward;
mod image;
mod oracle;
mod project;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backward::{backward_world, render_backward};
pub use forward::{render_forward, TILE_SIZE};
pub use image::{Image, RenderedImage};
pub use oracle::{contributor_lists, pixel_weights, render_naive_oracle};
pub use project::{pixel_opacity, project, ProjectedGaussian};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterConfig {
    /// Added to the diagonal of every 2D covariance, in px².
    pub dilation: f64,
    /// Front-to-back traversal stops once transmittance falls below this.
    pub transmittance_cutoff: f64,
    /// Gaussians whose camera-space depth is at or below this are culled.
    pub near_plane: f64,
    /// Footprint half-size in standard deviations.
    pub extent_sigmas: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            dilation: 0.3,
            transmittance_cutoff: 1e-7,
            near_plane: 0.01,
            extent_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("residual is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    ResidualShape {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("2D covariance is singular (det = {0:e})")]
    SingularCovariance(f64),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
}
