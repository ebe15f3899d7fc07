use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::OptimError;
use crate::guidance::{CameraPolicy, GuidanceConfig, SceneBounds};
use crate::loss::LossWeights;
use crate::raster::RasterConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningRates {
    pub position: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub color: f64,
    pub layout_center: f64,
    pub layout_scale: f64,
    pub layout_yaw: f64,
    pub layout_opacity: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 1.6e-4,
            rotation: 1e-3,
            scale: 5e-3,
            opacity: 5e-2,
            color: 5e-3,
            layout_center: 1e-3,
            layout_scale: 1e-3,
            layout_yaw: 1e-3,
            layout_opacity: 1e-3,
        }
    }
}

impl LearningRates {
    /// Rates for the five Gaussian groups in storage order.
    pub fn gaussian_groups(&self) -> [f64; 5] {
        [self.position, self.rotation, self.scale, self.opacity, self.color]
    }

    /// Rates for center (×3), scale factor, yaw, opacity bias.
    pub fn layout(&self) -> [f64; 6] {
        [
            self.layout_center,
            self.layout_center,
            self.layout_center,
            self.layout_scale,
            self.layout_yaw,
            self.layout_opacity,
        ]
    }

    fn all(&self) -> [(&'static str, f64); 9] {
        [
            ("position", self.position),
            ("rotation", self.rotation),
            ("scale", self.scale),
            ("opacity", self.opacity),
            ("color", self.color),
            ("layout_center", self.layout_center),
            ("layout_scale", self.layout_scale),
            ("layout_yaw", self.layout_yaw),
            ("layout_opacity", self.layout_opacity),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub lr: LearningRates,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    /// Instance views rendered per step (per instance).
    pub instance_views: usize,
    /// Scene views rendered per step.
    pub scene_views: usize,
    /// Azimuth positions on the instance orbit; views cycle through them.
    pub instance_rig: usize,
    /// Azimuth positions on the scene orbit.
    pub scene_rig: usize,
    pub instance_cameras: CameraPolicy,
    pub scene_cameras: CameraPolicy,
    /// Scene orbit to use instead of the current layout bounds. Keeps scene
    /// views fixed while layouts move.
    pub scene_bounds: Option<SceneBounds>,
    pub guidance: GuidanceConfig,
    pub raster: RasterConfig,
    pub background: [f64; 3],
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr: LearningRates::default(),
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
            instance_views: 4,
            scene_views: 4,
            instance_rig: 8,
            scene_rig: 8,
            instance_cameras: CameraPolicy::default(),
            scene_cameras: CameraPolicy::default(),
            scene_bounds: None,
            guidance: GuidanceConfig::default(),
            raster: RasterConfig::default(),
            background: [1.0; 3],
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.steps == 0 {
            return Err(OptimError::Config("steps must be >= 1".into()));
        }
        for (name, lr) in self.lr.all() {
            if !lr.is_finite() || lr < 0.0 {
                return Err(OptimError::Config(format!("learning rate {name} must be >= 0, got {lr}")));
            }
        }
        if self.instance_rig == 0 || self.scene_rig == 0 {
            return Err(OptimError::Config("camera rigs need at least one position".into()));
        }
        self.weights.validate()?;
        self.guidance.validate()?;
        self.instance_cameras.validate()?;
        self.scene_cameras.validate()?;
        Ok(())
    }

    /// Rig indices used by view `j` at `step`.
    pub fn instance_view_index(&self, step: usize, j: usize) -> usize {
        (step * self.instance_views + j) % self.instance_rig
    }

    pub fn scene_view_index(&self, step: usize, j: usize) -> usize {
        (step * self.scene_views + j) % self.scene_rig
    }
}
