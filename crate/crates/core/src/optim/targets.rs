use super::config::OptimizerConfig;
use super::state::SceneState;
use super::OptimError;
use crate::guidance::{sample_instance_camera, sample_scene_camera, scene_bounds, PhotometricTarget, ViewKey};
use crate::raster::render_forward;
use crate::scene::assemble_scene;

/// Renders every instance-rig and scene-rig view of `reference` with the
/// cameras the optimizer would use under `cfg`, producing a synthetic
/// photometric dataset. Instances sharing a prompt share target keys; the
/// later one wins.
pub fn reference_targets(reference: &SceneState, cfg: &OptimizerConfig) -> Result<PhotometricTarget, OptimError> {
    let mut targets = PhotometricTarget::new();
    for inst in &reference.instances {
        let canonical = inst.layout.canonical();
        let snapshot = assemble_scene([(&canonical, &inst.gaussians)])?;
        for index in 0..cfg.instance_rig {
            let cam = sample_instance_camera(&canonical, index, cfg.instance_rig, &cfg.instance_cameras);
            let img = render_forward(&snapshot, &cam, cfg.background, &cfg.raster).rgb;
            targets.insert(
                ViewKey::Instance {
                    prompt: inst.layout.prompt.clone(),
                    index,
                },
                img,
            );
        }
    }
    if let Some(snapshot) = reference.snapshot() {
        let bounds = match cfg.scene_bounds {
            Some(b) => b,
            None => scene_bounds(&reference.layouts())?,
        };
        for index in 0..cfg.scene_rig {
            let cam = sample_scene_camera(&bounds, index, cfg.scene_rig, &cfg.scene_cameras)?;
            targets.insert(ViewKey::Scene { index }, render_forward(&snapshot, &cam, cfg.background, &cfg.raster).rgb);
        }
    }
    Ok(targets)
}
