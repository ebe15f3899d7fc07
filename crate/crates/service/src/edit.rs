use layoutsplat::geometry::SurfaceSamplingConfig;
use layoutsplat::guidance::GuidanceProvider;
use layoutsplat::io::InstanceSpec;
use layoutsplat::optim::{OptimError, SceneState};
use layoutsplat::scene::normalize_yaw;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// A layout transformation. Pose edits move the layout; the instance's
/// Gaussians follow because they live in the layout's local frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditOp {
    Add { instance: InstanceSpec },
    Remove { id: String },
    Translate { id: String, delta: [f64; 3] },
    /// Adds `degrees` to the yaw about +z.
    Rotate { id: String, degrees: f64 },
    /// Multiplies the scale factor.
    Scale { id: String, factor: f64 },
    Relabel { id: String, prompt: String },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EditError {
    #[error("unknown instance {0:?}")]
    UnknownTarget(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("guidance has no assets for prompt {0:?}")]
    MissingAssets(String),
    #[error("session is shut down")]
    SessionClosed,
}

impl EditOp {
    pub fn target(&self) -> Option<&str> {
        match self {
            EditOp::Add { .. } => None,
            EditOp::Remove { id }
            | EditOp::Translate { id, .. }
            | EditOp::Rotate { id, .. }
            | EditOp::Scale { id, .. }
            | EditOp::Relabel { id, .. } => Some(id),
        }
    }

    /// Checks that do not depend on the scene.
    pub fn validate_payload(&self) -> Result<(), EditError> {
        let bad = |m: &str| Err(EditError::InvalidPayload(m.to_string()));
        match self {
            EditOp::Add { instance } => instance.to_layout().map(|_| ()).map_err(|e| EditError::InvalidPayload(e.to_string())),
            EditOp::Translate { delta, .. } if !delta.iter().all(|v| v.is_finite()) => bad("delta must be finite"),
            EditOp::Rotate { degrees, .. } if !degrees.is_finite() => bad("degrees must be finite"),
            EditOp::Scale { factor, .. } if !(factor.is_finite() && *factor > 0.0) => bad("factor must be > 0"),
            EditOp::Relabel { prompt, .. } if prompt.trim().is_empty() => bad("prompt must be non-empty"),
            _ => Ok(()),
        }
    }
}

/// Applies one edit to `state`. Nothing is modified when an error is
/// returned.
pub fn apply_edit(
    state: &mut SceneState,
    op: &EditOp,
    sampling: &SurfaceSamplingConfig,
    provider: &dyn GuidanceProvider,
) -> Result<(), EditError> {
    op.validate_payload()?;
    if let Some(id) = op.target() {
        if state.index_of(id).is_none() {
            return Err(EditError::UnknownTarget(id.to_string()));
        }
    }
    let check_assets = |prompt: &str| {
        if provider.has_assets_for_prompt(prompt) {
            Ok(())
        } else {
            Err(EditError::MissingAssets(prompt.to_string()))
        }
    };
    let pose_error = |e: OptimError| EditError::InvalidPayload(e.to_string());
    match op {
        EditOp::Add { instance } => {
            check_assets(&instance.prompt)?;
            let layout = instance.to_layout().map_err(|e| EditError::InvalidPayload(e.to_string()))?;
            state.add_instance(layout, sampling).map_err(|e| match e {
                OptimError::DuplicateInstance(id) => EditError::InvalidPayload(format!("instance {id:?} already exists")),
                other => pose_error(other),
            })?;
        }
        EditOp::Remove { id } => {
            state.remove_instance(id).map_err(pose_error)?;
        }
        EditOp::Relabel { id, prompt } => {
            check_assets(prompt)?;
            state.instance_mut(id).map_err(pose_error)?.layout.prompt = prompt.clone();
        }
        EditOp::Translate { id, .. } | EditOp::Rotate { id, .. } | EditOp::Scale { id, .. } => {
            let layout = &mut state.instance_mut(id).map_err(pose_error)?.layout;
            let mut moved = layout.clone();
            match op {
                EditOp::Translate { delta, .. } => moved.center += Vector3::from(*delta),
                EditOp::Rotate { degrees, .. } => moved.yaw = normalize_yaw(moved.yaw + degrees.to_radians()),
                EditOp::Scale { factor, .. } => moved.scale_factor *= factor,
                _ => unreachable!(),
            }
            moved.validate().map_err(|e| EditError::InvalidPayload(e.to_string()))?;
            *layout = moved;
        }
    }
    Ok(())
}
