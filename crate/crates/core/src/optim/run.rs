use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_delta, bias_corrections};
use super::config::OptimizerConfig;
use super::objective::objective_and_gradient;
use super::state::{Instance, LayoutPose, SceneState};
use super::OptimError;
use crate::guidance::GuidanceProvider;
use crate::loss::{LossReport, LossWeights};
use crate::scene::{normalize_yaw, InstanceGrads};

/// Smallest and largest allowed layout scale factor.
pub const SCALE_FACTOR_RANGE: (f64, f64) = (0.1, 10.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Zero-based index of the executed step.
    pub step: usize,
    pub eta: f64,
    pub report: LossReport,
    pub poses: Vec<LayoutPose>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
    pub wall_time_s: f64,
}

/// Returned by a [`run`] observer after each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

#[derive(Clone, Copy)]
struct Targets {
    gaussians: bool,
    layouts: bool,
}

fn apply_update(inst: &mut Instance, g: &InstanceGrads, cfg: &OptimizerConfig, targets: Targets) {
    let mom = &mut inst.moments;
    mom.t += 1;
    let (c1, c2) = bias_corrections(&cfg.adam, mom.t);

    if targets.gaussians {
        let gs = &mut inst.gaussians;
        let mut rotated = vec![false; gs.len()];
        let params = [&mut gs.positions, &mut gs.rotations, &mut gs.scales_raw, &mut gs.opacity_raw, &mut gs.colors_raw];
        let firsts = mom.first.groups_mut();
        let seconds = mom.second.groups_mut();
        let grads = g.gaussians.groups();
        let lrs = cfg.lr.gaussian_groups();
        for (gi, (((p, m), v), grad)) in params.into_iter().zip(firsts).zip(seconds).zip(grads).enumerate() {
            for k in 0..p.len() {
                let d = adam_delta(&cfg.adam, &mut m[k], &mut v[k], grad[k], lrs[gi], c1, c2);
                if d != 0.0 {
                    p[k] -= d;
                    if gi == 1 {
                        rotated[k / 4] = true;
                    }
                }
            }
        }
        for (i, moved) in rotated.iter().enumerate() {
            if *moved {
                let q = &mut inst.gaussians.rotations[4 * i..4 * i + 4];
                let n = (q.iter().map(|c| c * c).sum::<f64>()).sqrt();
                q.iter_mut().for_each(|c| *c /= n);
            }
        }
    }

    if targets.layouts {
        let l = &mut inst.layout;
        let learn = l.learnable;
        let mask = [learn.center, learn.center, learn.center, learn.scale, learn.yaw, learn.opacity];
        let grad = [
            g.layout.center.x,
            g.layout.center.y,
            g.layout.center.z,
            g.layout.scale_factor,
            g.layout.yaw,
            g.layout.opacity_bias,
        ];
        let lrs = cfg.lr.layout();
        for k in 0..6 {
            if !mask[k] {
                continue;
            }
            let d = adam_delta(&cfg.adam, &mut mom.layout_first[k], &mut mom.layout_second[k], grad[k], lrs[k], c1, c2);
            match k {
                0..=2 => l.center[k] -= d,
                3 => l.scale_factor = (l.scale_factor - d).clamp(SCALE_FACTOR_RANGE.0, SCALE_FACTOR_RANGE.1),
                4 => l.yaw = normalize_yaw(l.yaw - d),
                _ => l.opacity_bias -= d,
            }
        }
    }
}

fn check_finite(state: &SceneState, grads: &[InstanceGrads], active: &[bool]) -> Result<(), OptimError> {
    for ((inst, g), &on) in state.instances.iter().zip(grads).zip(active) {
        if on && (!g.gaussians.is_finite() || !g.layout.is_finite()) {
            return Err(OptimError::Diverged {
                step: state.step,
                detail: format!("non-finite gradient for instance `{}`", inst.layout.id),
            });
        }
    }
    Ok(())
}

fn step_inner(
    state: &mut SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    active: &[bool],
    targets: Targets,
) -> Result<LossReport, OptimError> {
    let grad = objective_and_gradient(state, provider, cfg, state.step, active)?;
    check_finite(state, &grad.instances, active)?;
    for ((inst, g), &on) in state.instances.iter_mut().zip(&grad.instances).zip(active) {
        if on {
            apply_update(inst, g, cfg, targets);
        }
    }
    Ok(grad.report)
}

/// One optimization step over every instance.
pub fn step(state: &mut SceneState, provider: &dyn GuidanceProvider, cfg: &OptimizerConfig) -> Result<LossReport, OptimError> {
    let active = vec![true; state.len()];
    step_with(state, provider, cfg, &active)
}

/// One step updating only the instances flagged in `active`; the others are
/// rendered as context but left bit-identical, moments included. The state
/// is untouched if the step diverges.
pub fn step_with(
    state: &mut SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    active: &[bool],
) -> Result<LossReport, OptimError> {
    cfg.validate()?;
    let report = step_inner(state, provider, cfg, active, Targets { gaussians: true, layouts: true })?;
    state.step += 1;
    Ok(report)
}

fn run_steps(
    state: &mut SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    active: &[bool],
    count: usize,
    observer: &mut dyn FnMut(&SceneState, &TraceRow) -> StepControl,
) -> Result<OptimizationTrace, OptimError> {
    let start = Instant::now();
    let mut trace = OptimizationTrace::default();
    for _ in 0..count {
        let step_index = state.step;
        let eta = cfg.guidance.timestep(step_index, cfg.steps);
        let report = step_with(state, provider, cfg, active)?;
        let row = TraceRow {
            step: step_index,
            eta,
            report,
            poses: state.poses(),
        };
        let control = observer(state, &row);
        trace.rows.push(row);
        if control == StepControl::Stop {
            break;
        }
    }
    trace.wall_time_s = start.elapsed().as_secs_f64();
    Ok(trace)
}

/// Runs from `state.step` up to `cfg.steps`, calling `observer` after every
/// step. Resuming a restored state continues the same schedule.
pub fn run(
    state: &mut SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    observer: &mut dyn FnMut(&SceneState, &TraceRow) -> StepControl,
) -> Result<OptimizationTrace, OptimError> {
    cfg.validate()?;
    let active = vec![true; state.len()];
    let remaining = cfg.steps.saturating_sub(state.step);
    run_steps(state, provider, cfg, &active, remaining, observer)
}

/// One update of the learnable layout poses from the scene-level guidance
/// alone. Gaussians and non-learnable poses are left untouched.
pub fn refine_layouts(state: &mut SceneState, provider: &dyn GuidanceProvider, cfg: &OptimizerConfig) -> Result<LossReport, OptimError> {
    cfg.validate()?;
    let active: Vec<bool> = state.instances.iter().map(|i| i.layout.learnable.any()).collect();
    if !active.iter().any(|a| *a) {
        return Err(OptimError::NoLearnableLayouts);
    }
    let refine_cfg = OptimizerConfig {
        weights: LossWeights {
            beta3: cfg.weights.beta3,
            ..LossWeights::ZERO
        },
        ..cfg.clone()
    };
    step_inner(state, provider, &refine_cfg, &active, Targets { gaussians: false, layouts: true })
}

/// Runs `steps` steps in which only the listed instances are updated; all
/// instances are still rendered so the scene guidance sees full context.
pub fn local_reoptimize(
    state: &mut SceneState,
    provider: &dyn GuidanceProvider,
    cfg: &OptimizerConfig,
    edited: &[String],
    steps: usize,
    observer: &mut dyn FnMut(&SceneState, &TraceRow) -> StepControl,
) -> Result<OptimizationTrace, OptimError> {
    cfg.validate()?;
    if edited.is_empty() {
        return Err(OptimError::EmptyEditSet);
    }
    let mut active = vec![false; state.len()];
    for id in edited {
        let i = state.index_of(id).ok_or_else(|| OptimError::UnknownInstance(id.clone()))?;
        active[i] = true;
    }
    run_steps(state, provider, cfg, &active, steps, observer)
}
