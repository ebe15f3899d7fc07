use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::adam::Moments;
use super::OptimError;
use crate::geometry::{init_instance, SurfaceSamplingConfig};
use crate::scene::{assemble_scene, InstanceGaussians, InstanceLayout, SceneSnapshot};

/// One layout with its Gaussians and optimizer moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub layout: InstanceLayout,
    pub gaussians: InstanceGaussians,
    pub moments: Moments,
}

impl Instance {
    pub fn new(layout: InstanceLayout, gaussians: InstanceGaussians) -> Self {
        let moments = Moments::zeros(gaussians.len());
        Self { layout, gaussians, moments }
    }
}

/// Everything the optimizer mutates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub scene_prompt: String,
    pub instances: Vec<Instance>,
    /// Number of steps executed so far.
    pub step: usize,
    pub seed: u64,
}

/// Layout pose at one point of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutPose {
    pub id: String,
    pub center: Vector3<f64>,
    pub scale_factor: f64,
    pub yaw: f64,
}

impl SceneState {
    /// Samples fresh Gaussians for every layout.
    pub fn initialize(
        scene_prompt: impl Into<String>,
        layouts: Vec<InstanceLayout>,
        sampling: &SurfaceSamplingConfig,
        seed: u64,
    ) -> Result<Self, OptimError> {
        let mut state = Self {
            scene_prompt: scene_prompt.into(),
            instances: Vec::with_capacity(layouts.len()),
            step: 0,
            seed,
        };
        for layout in layouts {
            state.add_instance(layout, sampling)?;
        }
        Ok(state)
    }

    pub fn from_parts(scene_prompt: impl Into<String>, parts: Vec<(InstanceLayout, InstanceGaussians)>, seed: u64) -> Self {
        Self {
            scene_prompt: scene_prompt.into(),
            instances: parts.into_iter().map(|(l, g)| Instance::new(l, g)).collect(),
            step: 0,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.layout.id == id)
    }

    pub fn instance(&self, id: &str) -> Result<&Instance, OptimError> {
        self.instances
            .iter()
            .find(|i| i.layout.id == id)
            .ok_or_else(|| OptimError::UnknownInstance(id.to_string()))
    }

    pub fn instance_mut(&mut self, id: &str) -> Result<&mut Instance, OptimError> {
        self.instances
            .iter_mut()
            .find(|i| i.layout.id == id)
            .ok_or_else(|| OptimError::UnknownInstance(id.to_string()))
    }

    /// Adds a layout with Gaussians sampled from its own seed stream, so the
    /// result does not depend on when the instance was added.
    pub fn add_instance(&mut self, layout: InstanceLayout, sampling: &SurfaceSamplingConfig) -> Result<(), OptimError> {
        if self.index_of(&layout.id).is_some() {
            return Err(OptimError::DuplicateInstance(layout.id));
        }
        layout.validate()?;
        let gaussians = init_instance(&layout, sampling, self.seed)?;
        self.instances.push(Instance::new(layout, gaussians));
        Ok(())
    }

    pub fn remove_instance(&mut self, id: &str) -> Result<Instance, OptimError> {
        let idx = self.index_of(id).ok_or_else(|| OptimError::UnknownInstance(id.to_string()))?;
        Ok(self.instances.remove(idx))
    }

    pub fn layouts(&self) -> Vec<InstanceLayout> {
        self.instances.iter().map(|i| i.layout.clone()).collect()
    }

    pub fn parts(&self) -> Vec<(&InstanceLayout, &InstanceGaussians)> {
        self.instances.iter().map(|i| (&i.layout, &i.gaussians)).collect()
    }

    /// World-frame snapshot, or `None` for an empty scene.
    pub fn snapshot(&self) -> Option<SceneSnapshot> {
        if self.instances.is_empty() {
            return None;
        }
        Some(assemble_scene(self.parts()).expect("state invariants hold"))
    }

    pub fn poses(&self) -> Vec<LayoutPose> {
        self.instances
            .iter()
            .map(|i| LayoutPose {
                id: i.layout.id.clone(),
                center: i.layout.center,
                scale_factor: i.layout.scale_factor,
                yaw: i.layout.yaw,
            })
            .collect()
    }

    /// Total number of Gaussians.
    pub fn gaussian_count(&self) -> usize {
        self.instances.iter().map(|i| i.gaussians.len()).sum()
    }
}
