use rayon::prelude::*;

use super::config::OptimizerConfig;
use super::state::{Instance, SceneState};
use super::OptimError;
use crate::geometry::flatness_regularizer_with_grad;
use crate::guidance::{
    render_layout_condition, sample_instance_camera, sample_scene_camera, scene_bounds, GuidanceProvider,
    GuidanceRequest, GuidanceResidual, ViewKey,
};
use crate::loss::{layout_loss_with_grad, LossReport, LossTerms};
use crate::raster::{render_backward, render_forward, Image};
use crate::scene::{assemble_scene, Camera, GaussianGrads, InstanceGrads, LayoutGrads, SceneSnapshot};

/// Loss report and the weighted gradient of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub report: LossReport,
    /// One entry per instance; inactive instances get zeros.
    pub instances: Vec<InstanceGrads>,
}

struct Phase {
    value: f64,
    grads: Vec<InstanceGrads>,
}

/// Renders one view, queries the provider and pulls the weighted residual
/// back to parameters. Returns the surrogate value `½·w·‖r‖²/(H·W)`.
#[allow(clippy::too_many_arguments)]
fn guided_view(
    parts: &[(&crate::scene::InstanceLayout, &crate::scene::InstanceGaussians)],
    snapshot: &SceneSnapshot,
    cam: &Camera,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    prompt: &str,
    condition: Option<&Image>,
    view: ViewKey,
    eta: f64,
    guidance_scale: f64,
    views: usize,
) -> Result<Phase, OptimError> {
    let rendered = render_forward(snapshot, cam, cfg.background, &cfg.raster);
    let req = GuidanceRequest {
        image: &rendered.rgb,
        camera: cam,
        prompt,
        condition,
        timestep: eta,
        view,
        guidance_scale,
    };
    let GuidanceResidual { residual, weight } = provider.provide(&req, &cfg.guidance)?;
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(OptimError::Config(format!("provider returned weight {weight}")));
    }
    let norm = (cam.width * cam.height * views) as f64;
    let value = 0.5 * weight * residual.squared_norm() / norm;
    let grads = render_backward(parts, snapshot, cam, cfg.background, &residual.scaled(weight / norm), &cfg.raster)?;
    Ok(Phase { value, grads })
}

fn instance_phase(inst: &Instance, provider: &dyn GuidanceProvider, cfg: &OptimizerConfig, step: usize, eta: f64) -> Result<(f64, GaussianGrads), OptimError> {
    let canonical = inst.layout.canonical();
    let parts = [(&canonical, &inst.gaussians)];
    let snapshot = assemble_scene(parts)?;
    let mut value = 0.0;
    let mut grads = GaussianGrads::zeros(inst.gaussians.len());
    for j in 0..cfg.instance_views {
        let index = cfg.instance_view_index(step, j);
        let cam = sample_instance_camera(&canonical, index, cfg.instance_rig, &cfg.instance_cameras);
        let view = ViewKey::Instance {
            prompt: inst.layout.prompt.clone(),
            index,
        };
        let phase = guided_view(
            &parts,
            &snapshot,
            &cam,
            provider,
            cfg,
            &inst.layout.prompt,
            None,
            view,
            eta,
            cfg.guidance.instance_guidance_scale,
            cfg.instance_views,
        )?;
        value += phase.value;
        grads.add_scaled(&phase.grads[0].gaussians, 1.0);
    }
    Ok((value, grads))
}

fn scene_phase(state: &SceneState, provider: &dyn GuidanceProvider, cfg: &OptimizerConfig, step: usize, eta: f64) -> Result<Phase, OptimError> {
    let parts = state.parts();
    let snapshot = assemble_scene(parts.iter().copied())?;
    let layouts = state.layouts();
    let bounds = match cfg.scene_bounds {
        Some(b) => b,
        None => scene_bounds(&layouts)?,
    };
    let mut total = Phase {
        value: 0.0,
        grads: state.instances.iter().map(|i| zero_grads(i.gaussians.len())).collect(),
    };
    for j in 0..cfg.scene_views {
        let index = cfg.scene_view_index(step, j);
        let cam = sample_scene_camera(&bounds, index, cfg.scene_rig, &cfg.scene_cameras)?;
        let condition = render_layout_condition(&layouts, &cam);
        let phase = guided_view(
            &parts,
            &snapshot,
            &cam,
            provider,
            cfg,
            &state.scene_prompt,
            Some(&condition),
            ViewKey::Scene { index },
            eta,
            cfg.guidance.scene_guidance_scale,
            cfg.scene_views,
        )?;
        total.value += phase.value;
        for (acc, g) in total.grads.iter_mut().zip(&phase.grads) {
            acc.gaussians.add_scaled(&g.gaussians, 1.0);
            acc.layout.add_scaled(&g.layout, 1.0);
        }
    }
    Ok(total)
}

fn zero_grads(m: usize) -> InstanceGrads {
    InstanceGrads {
        gaussians: GaussianGrads::zeros(m),
        layout: LayoutGrads::default(),
    }
}

/// Evaluates every loss term at the current state and assembles
///
/// * Gaussians: `β₁·∇sdsᵢ + β₄·∇global + β₂·∇layoutᵢ + β₅·∇reg`
/// * layout pose: `β₃·∇global`, restricted to the learnable components
///
/// for the instances flagged in `active`. `step` selects the camera views
/// and the timestep.
pub fn objective_and_gradient(
    state: &SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    step: usize,
    active: &[bool],
) -> Result<Gradient, OptimError> {
    assert_eq!(active.len(), state.len(), "active mask must cover every instance");
    let w = cfg.weights;
    let eta = cfg.guidance.timestep(step, cfg.steps);
    let n = state.len();
    let mut terms = LossTerms {
        sds_instance: vec![0.0; n],
        layout: vec![0.0; n],
        refine: vec![0.0; n],
        global: 0.0,
        reg: 0.0,
    };
    let mut out: Vec<InstanceGrads> = state.instances.iter().map(|i| zero_grads(i.gaussians.len())).collect();

    if w.beta1 > 0.0 && cfg.instance_views > 0 {
        let results: Vec<Option<(f64, GaussianGrads)>> = state
            .instances
            .par_iter()
            .zip(active.par_iter())
            .map(|(inst, &on)| on.then(|| instance_phase(inst, provider, cfg, step, eta)).transpose())
            .collect::<Result<_, _>>()?;
        for (i, r) in results.into_iter().enumerate() {
            if let Some((value, g)) = r {
                terms.sds_instance[i] = value;
                out[i].gaussians.add_scaled(&g, w.beta1);
            }
        }
    }

    let refines = state
        .instances
        .iter()
        .zip(active)
        .any(|(i, &on)| on && i.layout.learnable.any());
    if n > 0 && cfg.scene_views > 0 && (w.beta4 > 0.0 || (w.beta3 > 0.0 && refines)) {
        let phase = scene_phase(state, provider, cfg, step, eta)?;
        terms.global = phase.value;
        for (i, (inst, g)) in state.instances.iter().zip(&phase.grads).enumerate() {
            let learn = inst.layout.learnable;
            if learn.any() {
                terms.refine[i] = phase.value;
            }
            if !active[i] {
                continue;
            }
            out[i].gaussians.add_scaled(&g.gaussians, w.beta4);
            let layout = &mut out[i].layout;
            if learn.center {
                layout.center += w.beta3 * g.layout.center;
            }
            if learn.scale {
                layout.scale_factor += w.beta3 * g.layout.scale_factor;
            }
            if learn.yaw {
                layout.yaw += w.beta3 * g.layout.yaw;
            }
            if learn.opacity {
                layout.opacity_bias += w.beta3 * g.layout.opacity_bias;
            }
        }
    }

    for (i, inst) in state.instances.iter().enumerate() {
        let (value, grad) = layout_loss_with_grad(&inst.gaussians, &inst.layout);
        terms.layout[i] = value;
        let (reg, reg_grad) = flatness_regularizer_with_grad(&inst.gaussians, &inst.layout);
        terms.reg += reg;
        if active[i] {
            let g = &mut out[i].gaussians;
            for (d, s) in g.positions.iter_mut().zip(&grad) {
                *d += w.beta2 * s;
            }
            g.add_scaled(&reg_grad, w.beta5);
        }
    }

    let report = LossReport::new(terms, &w).map_err(|e| OptimError::Diverged {
        step,
        detail: e.to_string(),
    })?;
    Ok(Gradient { report, instances: out })
}
