//! Guidance providers stand in for the diffusion prior. A provider maps a
//! rendered view to an image-space residual; the optimizer injects
//! `w(η)·residual` as `∂L/∂I`, which is exactly the gradient of the
//! surrogate `½·w(η)·‖I − stop(I − residual)‖²`.

mod cameras;
mod condition;
mod providers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Image;
use crate::scene::Camera;

pub use cameras::{sample_instance_camera, sample_scene_camera, scene_bounds, CameraPolicy, SceneBounds};
pub use condition::{palette_color, render_layout_condition};
pub use providers::{CheckerTexture, FlatColor, PhotometricTarget};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("no target image for view {0}")]
    MissingTarget(String),
    #[error("image is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    ShapeMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("timestep {0} outside [0, 1]")]
    InvalidTimestep(f64),
    #[error("residual is not finite")]
    NonFiniteResidual,
    #[error("invalid guidance config: {0}")]
    InvalidConfig(String),
    #[error("degenerate scene bounds")]
    DegenerateBounds,
}

/// Identifies which view a request renders, so providers holding per-view
/// assets can look them up.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKey {
    /// Object-centric view `index` of the instance with this prompt.
    Instance { prompt: String, index: usize },
    /// Scene view `index` of the scene camera rig.
    Scene { index: usize },
}

impl std::fmt::Display for ViewKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ViewKey::Instance { prompt, index } => write!(f, "instance {prompt:?} #{index}"),
            ViewKey::Scene { index } => write!(f, "scene #{index}"),
        }
    }
}

pub struct GuidanceRequest<'a> {
    pub image: &'a Image,
    pub camera: &'a Camera,
    pub prompt: &'a str,
    pub condition: Option<&'a Image>,
    /// Normalized diffusion timestep η.
    pub timestep: f64,
    pub view: ViewKey,
    /// Classifier-free guidance scale the real prior would use.
    pub guidance_scale: f64,
}

impl GuidanceRequest<'_> {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        if !(0.0..=1.0).contains(&self.timestep) {
            return Err(GuidanceError::InvalidTimestep(self.timestep));
        }
        check_shape(self.image, self.camera.width, self.camera.height)?;
        if let Some(c) = self.condition {
            check_shape(c, self.image.width, self.image.height)?;
        }
        Ok(())
    }
}

pub(crate) fn check_shape(img: &Image, w: usize, h: usize) -> Result<(), GuidanceError> {
    if img.width != w || img.height != h {
        return Err(GuidanceError::ShapeMismatch {
            got_w: img.width,
            got_h: img.height,
            want_w: w,
            want_h: h,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceResidual {
    pub residual: Image,
    pub weight: f64,
}

/// Timestep weighting `w(η)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Constant,
    EtaSquared,
}

impl Weighting {
    pub fn weight(&self, eta: f64) -> f64 {
        match self {
            Weighting::Constant => 1.0,
            Weighting::EtaSquared => eta * eta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub instance_guidance_scale: f64,
    pub scene_guidance_scale: f64,
    pub eta_start: f64,
    pub eta_end: f64,
    pub weighting: Weighting,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            instance_guidance_scale: 50.0,
            scene_guidance_scale: 100.0,
            eta_start: 0.98,
            eta_end: 0.02,
            weighting: Weighting::Constant,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        for (name, s) in [("instance_guidance_scale", self.instance_guidance_scale), ("scene_guidance_scale", self.scene_guidance_scale)] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(GuidanceError::InvalidConfig(format!("{name} must be > 0, got {s}")));
            }
        }
        for (name, e) in [("eta_start", self.eta_start), ("eta_end", self.eta_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(GuidanceError::InvalidConfig(format!("{name} must lie in [0, 1], got {e}")));
            }
        }
        Ok(())
    }

    /// Timestep at `step` of `steps`, decaying linearly from `eta_start`
    /// at the first step to `eta_end` at the last.
    pub fn timestep(&self, step: usize, steps: usize) -> f64 {
        if steps <= 1 {
            return self.eta_start;
        }
        let s = step.min(steps - 1) as f64;
        self.eta_start - (self.eta_start - self.eta_end) * s / (steps - 1) as f64
    }
}

/// A stand-in for the denoiser. Implementations must tolerate concurrent
/// calls with distinct requests.
pub trait GuidanceProvider: Send + Sync {
    /// Image-space residual for the rendered view. `weight` must be `w(η)`.
    fn provide(&self, req: &GuidanceRequest<'_>, cfg: &GuidanceConfig) -> Result<GuidanceResidual, GuidanceError>;

    /// Whether views of an instance with this prompt can be served.
    fn has_assets_for_prompt(&self, _prompt: &str) -> bool {
        true
    }

    /// Whether scene view `index` can be served.
    fn has_scene_view(&self, _index: usize) -> bool {
        true
    }
}

/// `I − target`, weighted by the configured `w(η)`.
pub(crate) fn difference(req: &GuidanceRequest<'_>, target: &Image, cfg: &GuidanceConfig) -> Result<GuidanceResidual, GuidanceError> {
    req.validate()?;
    check_shape(target, req.image.width, req.image.height)?;
    let residual = req.image.sub(target);
    if !residual.is_finite() {
        return Err(GuidanceError::NonFiniteResidual);
    }
    Ok(GuidanceResidual {
        residual,
        weight: cfg.weighting.weight(req.timestep),
    })
}
