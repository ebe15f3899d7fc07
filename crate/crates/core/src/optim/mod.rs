//! The compositional optimization loop.
//!
//! Every step runs an object-centric phase (each instance rendered alone in
//! its canonical frame, gradients to its Gaussians only) and a scene phase
//! (all instances composed, gradients to every Gaussian and to learnable
//! layout poses), adds the analytic containment and flatness gradients,
//! and applies one Adam update per parameter group. Both phases share the
//! step's timestep.

mod adam;
mod config;
mod objective;
mod run;
mod state;
mod targets;

use thiserror::Error;

pub use adam::{adam_delta, bias_corrections, AdamConfig, Moments, LAYOUT_PARAMS};
pub use config::{LearningRates, OptimizerConfig};
pub use objective::{objective_and_gradient, Gradient};
pub use run::{local_reoptimize, refine_layouts, run, step, step_with, OptimizationTrace, StepControl, TraceRow};
pub use state::{Instance, LayoutPose, SceneState};
pub use targets::reference_targets;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("optimization diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("duplicate instance id `{0}`")]
    DuplicateInstance(String),
    #[error("edit set is empty")]
    EmptyEditSet,
    #[error("no layout has learnable pose parameters")]
    NoLearnableLayouts,
    #[error(transparent)]
    Guidance(#[from] crate::guidance::GuidanceError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error(transparent)]
    Loss(#[from] crate::loss::LossError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}
