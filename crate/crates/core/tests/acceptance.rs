//! Acceptance suite. Runs every criterion in sequence so the timed ones are
//! not competing with each other, prints one PASS/FAIL line per criterion
//! and exits non-zero if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use layoutsplat::geometry::{init_instance, sample_surface_positions, SurfaceSamplingConfig};
use layoutsplat::guidance::{
    sample_instance_camera, sample_scene_camera, scene_bounds, CameraPolicy, PhotometricTarget, ViewKey,
};
use layoutsplat::io::{decode_checkpoint, encode_checkpoint};
use layoutsplat::loss::{layout_loss, LossWeights};
use layoutsplat::optim::{
    local_reoptimize, objective_and_gradient, reference_targets, refine_layouts, run, step, Gradient, OptimizerConfig,
    SceneState, StepControl,
};
use layoutsplat::raster::{contributor_lists, pixel_weights, render_forward, render_naive_oracle, RasterConfig};
use layoutsplat::scene::{
    assemble_scene, inverse_compose_position, logit, InstanceGaussians, InstanceLayout, Learnable,
};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 10] = [
        ("rasterizer oracle equivalence", oracle_equivalence),
        ("master gradient check", master_gradient_check),
        ("compositing partition of unity", partition_of_unity),
        ("layout loss correctness", layout_loss_correctness),
        ("surface sampling distribution", sampling_distribution),
        ("end-to-end photometric fit", end_to_end_fit),
        ("layout refinement recovery", layout_refinement),
        ("edit locality", edit_locality),
        ("determinism", determinism),
        ("term isolation", term_isolation),
    ];
    // ACCEPTANCE_ONLY=<substring> runs a subset while iterating locally
    let only = std::env::var("ACCEPTANCE_ONLY").unwrap_or_default();
    let selected: Vec<_> = criteria.into_iter().filter(|(name, _)| name.contains(only.as_str())).collect();
    let mut failed = 0;
    for &(name, check) in &selected {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !verdict(name, pass, &format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64())) {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", selected.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn same_bits(a: &InstanceGaussians, b: &InstanceGaussians) -> bool {
    bits(&a.positions) == bits(&b.positions)
        && bits(&a.rotations) == bits(&b.rotations)
        && bits(&a.scales_raw) == bits(&b.scales_raw)
        && bits(&a.opacity_raw) == bits(&b.opacity_raw)
        && bits(&a.colors_raw) == bits(&b.colors_raw)
}

// ---------------------------------------------------------------------------
// rasterizer

fn oracle_equivalence() -> (bool, String) {
    let start = Instant::now();
    let mut rng = rng(2024);
    let cfg = RasterConfig::default();
    let mut worst: f64 = 0.0;
    let mut gaussians = 0;
    for _ in 0..20 {
        let per_instance = rng.random_range(50..=250);
        let recipe = SceneRecipe { instances: 4, per_instance, ..Default::default() };
        let scene = random_scene(&mut rng, &recipe);
        gaussians = gaussians.max(4 * per_instance);
        let cam = random_camera(&mut rng, 3.5, 64, 64);
        let bg = [rng.random(), rng.random(), rng.random()];
        let snap = assemble_scene(refs(&scene)).unwrap();
        let fast = render_forward(&snap, &cam, bg, &cfg);
        let slow = render_naive_oracle(&snap, &cam, bg, &cfg);
        worst = worst.max(fast.rgb.max_abs_diff(&slow.rgb));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-6 && secs < 30.0;
    (pass, format!("max abs error {worst:.2e} (< 1e-6) over 20 scenes of up to {gaussians} Gaussians at 64x64, {secs:.1}s (< 30s)"))
}

fn partition_of_unity() -> (bool, String) {
    let mut rng = rng(77);
    let cfg = RasterConfig::default();
    let mut worst: f64 = 0.0;
    let mut alpha_gap: f64 = 0.0;
    let mut pixels = 0;
    for _ in 0..8 {
        let recipe = SceneRecipe { per_instance: rng.random_range(20..80), opacity: (0.05, 0.99), ..Default::default() };
        let scene = random_scene(&mut rng, &recipe);
        let cam = random_camera(&mut rng, 3.0, 24, 24);
        let snap = assemble_scene(refs(&scene)).unwrap();
        let rendered = render_forward(&snap, &cam, [0.0; 3], &cfg);
        for row in 0..24 {
            for col in 0..24 {
                let (weights, t) = pixel_weights(&snap, &cam, col, row, &cfg);
                let sum: f64 = weights.iter().map(|(_, w)| w).sum();
                worst = worst.max((sum + t - 1.0).abs());
                alpha_gap = alpha_gap.max((rendered.alpha[row * 24 + col] - sum).abs());
                pixels += 1;
            }
        }
    }
    let pass = worst < 1e-9 && alpha_gap < 1e-9;
    (pass, format!("|sum w + T - 1| max {worst:.2e}, |alpha - sum w| max {alpha_gap:.2e} (< 1e-9) over {pixels} pixels"))
}

// ---------------------------------------------------------------------------
// gradient check

fn fd_h() -> f64 {
    std::env::var("FD_H").ok().and_then(|v| v.parse().ok()).unwrap_or(1e-4)
}
const FD_TOL: f64 = 1e-3;
const FD_FLOOR: f64 = 1e-6;

/// Weighted terms of the objective whose full gradient the optimizer
/// assembles when β₃ = β₄. Kept apart so a central difference of the sum can
/// be taken term by term: the large containment term then cannot swamp the
/// small guidance derivatives in rounding.
fn objective_terms(state: &SceneState, provider: &PhotometricTarget, cfg: &OptimizerConfig, step: usize) -> [f64; 4] {
    let t = objective_and_gradient(state, provider, cfg, step, &vec![true; state.len()]).unwrap().report.terms;
    let w = cfg.weights;
    [
        w.beta1 * t.sds_instance.iter().sum::<f64>(),
        w.beta2 * t.layout.iter().sum::<f64>(),
        w.beta4 * t.global,
        w.beta5 * t.reg,
    ]
}

/// Everything that selects a smooth branch of the objective: the ordered
/// contributors of every rendered pixel, which axes of each center lie
/// outside its box (and on which side), and the face each center is pulled
/// towards by the regularizer.
fn branch(state: &SceneState, cfg: &OptimizerConfig, step: usize) -> (Vec<Vec<Vec<usize>>>, Vec<i8>) {
    let mut lists = Vec::new();
    for inst in &state.instances {
        let canonical = inst.layout.canonical();
        let snap = assemble_scene([(&canonical, &inst.gaussians)]).unwrap();
        let cam = sample_instance_camera(&canonical, cfg.instance_view_index(step, 0), cfg.instance_rig, &cfg.instance_cameras);
        lists.push(contributor_lists(&snap, &cam, &cfg.raster));
    }
    let bounds = cfg.scene_bounds.unwrap();
    let cam = sample_scene_camera(&bounds, cfg.scene_view_index(step, 0), cfg.scene_rig, &cfg.scene_cameras).unwrap();
    lists.push(contributor_lists(&state.snapshot().unwrap(), &cam, &cfg.raster));

    let mut codes = Vec::new();
    for inst in &state.instances {
        let half = inst.layout.half_extents();
        for p in inst.gaussians.positions.chunks_exact(3) {
            let mut outside = false;
            for a in 0..3 {
                let out = p[a].abs() > half[a];
                outside |= out;
                codes.push(if out { p[a].signum() as i8 } else { 0 });
            }
            if !outside {
                let gaps: Vec<f64> = (0..3).map(|a| half[a] - p[a].abs()).collect();
                let axis = (0..3).fold(0, |best, a| if gaps[a] < gaps[best] { a } else { best });
                codes.push(axis as i8);
                codes.push(p[axis].signum() as i8);
            }
        }
    }
    (lists, codes)
}

fn gradient_scene(seed: u64) -> (SceneState, PhotometricTarget, OptimizerConfig, usize) {
    let mut rng = rng(5000 + seed);
    let recipe = SceneRecipe {
        instances: 2,
        per_instance: 6,
        log_scale: (0.12f64.ln(), 0.3f64.ln()),
        opacity: (0.1, 0.9),
        learnable: Learnable::POSE,
    };
    let mut scene = random_scene(&mut rng, &recipe);
    for (_, g) in &mut scene {
        // push a third of the centers outside so the containment term is live
        for i in (0..g.len()).step_by(3) {
            let p = g.position(i);
            g.set_position(i, p * 1.4);
        }
    }
    let reference: Vec<_> = scene
        .iter()
        .map(|(l, _)| (l.clone(), random_gaussians(&mut rng, l, 8, &recipe)))
        .collect();
    let state = SceneState::from_parts("room", scene, seed);
    let cams = CameraPolicy { width: 24, height: 24, ..Default::default() };
    let cfg = OptimizerConfig {
        steps: 8,
        instance_views: 1,
        scene_views: 1,
        instance_rig: 4,
        scene_rig: 4,
        instance_cameras: cams,
        scene_cameras: cams,
        scene_bounds: Some(scene_bounds(&state.layouts()).unwrap()),
        background: [0.3, 0.5, 0.1],
        ..Default::default()
    };
    let targets = reference_targets(&SceneState::from_parts("room", reference, 0), &cfg).unwrap();
    let step = rng.random_range(0..8);
    (state, targets, cfg, step)
}

fn perturbed(state: &SceneState, p: Param, d: f64) -> SceneState {
    let parts: Vec<_> = state.instances.iter().map(|i| (i.layout.clone(), i.gaussians.clone())).collect();
    let mut s = state.clone();
    for (inst, (l, g)) in s.instances.iter_mut().zip(perturb(&parts, p, d)) {
        inst.layout = l;
        inst.gaussians = g;
    }
    s
}

fn master_gradient_check() -> (bool, String) {
    let start = Instant::now();
    let mut total = FdStats::default();
    for seed in 0..50 {
        let (state, targets, cfg, step) = gradient_scene(seed);
        assert_eq!(cfg.weights.beta3, cfg.weights.beta4);
        let g = objective_and_gradient(&state, &targets, &cfg, step, &[true, true]).unwrap();
        let base = branch(&state, &cfg, step);
        let parts: Vec<_> = state.instances.iter().map(|i| (i.layout.clone(), i.gaussians.clone())).collect();
        for p in all_params(&parts, &[0, 1, 2, 3, 4]) {
            let plus = perturbed(&state, p, fd_h());
            let minus = perturbed(&state, p, -fd_h());
            if branch(&plus, &cfg, step) != base || branch(&minus, &cfg, step) != base {
                total.skipped += 1;
                continue;
            }
            let (fp, fm) = (objective_terms(&plus, &targets, &cfg, step), objective_terms(&minus, &targets, &cfg, step));
            let fd: f64 = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * fd_h())).sum();
            total.record(&format!("scene{seed}.{}", p.name()), lookup(&g.instances, p), fd, FD_FLOOR, FD_TOL);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let considered = total.checked + total.skipped;
    let pass = total.failures.is_empty() && secs < 300.0 && total.skipped * 10 < considered && total.nonzero * 2 > total.checked;
    let mut detail = format!(
        "50 scenes, {} derivatives checked, {} skipped at branch changes, worst rel err {:.2e} at {} (< {FD_TOL:e}), {secs:.0}s (< 300s)",
        total.checked, total.skipped, total.worst, total.worst_name
    );
    if let Some(f) = total.failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", total.failures.len()));
    }
    (pass, detail)
}

// ---------------------------------------------------------------------------
// layout loss

fn random_box<R: Rng>(rng: &mut R, n: usize) -> InstanceLayout {
    InstanceLayout::new(
        format!("box{n}"),
        "box",
        Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)),
        Vector3::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)),
        rng.random_range(0.3..3.0),
        rng.random_range(0.0..std::f64::consts::TAU),
    )
    .unwrap()
}

fn single(p: Vector3<f64>) -> InstanceGaussians {
    let mut g = InstanceGaussians::zeros(1);
    g.set_position(0, p);
    g
}

fn layout_loss_correctness() -> (bool, String) {
    let mut rng = rng(31);
    let (mut inside, mut outside, mut boundary) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    for b in 0..20 {
        let layout = random_box(&mut rng, b);
        let half = layout.half_extents();
        let (c, s) = (layout.yaw.cos(), layout.yaw.sin());
        let rz_inv = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
        let reach = 1.5 * layout.scale_factor * half.norm();
        for n in 0..10_000 {
            let world = layout.center + Vector3::from_fn(|_, _| rng.random_range(-reach..reach));
            let local = rz_inv * (world - layout.center) / layout.scale_factor;
            let clamped = local.zip_map(&half, |v, h| v.clamp(-h, h));
            let expected = (local - clamped).abs().sum();
            let is_inside = (0..3).all(|a| local[a].abs() <= half[a]);
            let got = layout_loss(&single(inverse_compose_position(&world, &layout)), &layout);
            if is_inside {
                inside += 1;
                if got != 0.0 {
                    mismatches.push(format!("box{b} point{n}: inside but loss {got:e}"));
                }
            } else {
                outside += 1;
                worst = worst.max((got - expected).abs());
                if !(got > 0.0) {
                    mismatches.push(format!("box{b} point{n}: outside but loss {got:e}"));
                }
            }
        }
        // exact face and corner points in the local frame
        for _ in 0..500 {
            let mut p = Vector3::from_fn(|a, _| rng.random_range(-half[a]..=half[a]));
            for a in 0..3 {
                if rng.random_bool(0.5) {
                    p[a] = if rng.random_bool(0.5) { half[a] } else { -half[a] };
                }
            }
            boundary += 1;
            let got = layout_loss(&single(p), &layout);
            if got != 0.0 {
                mismatches.push(format!("box{b}: boundary point {p:?} loss {got:e}"));
            }
        }
    }
    let pass = mismatches.is_empty() && worst < 1e-12 && inside > 0 && outside > 0;
    let mut detail = format!(
        "{inside} inside and {boundary} boundary points at zero, {outside} outside within {worst:.2e} of the clamp L1 distance (< 1e-12)"
    );
    if let Some(m) = mismatches.first() {
        detail.push_str(&format!("; {} mismatches, first: {m}", mismatches.len()));
    }
    (pass, detail)
}

// ---------------------------------------------------------------------------
// surface sampling

fn folded_normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let g = |z: f64| (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    g((x - mu) / sigma) + g((x + mu) / sigma)
}

/// CDF of the folded normal truncated to `[1, ∞)`, tabulated by composite
/// Simpson integration of the density on `[1, upper]`.
struct TruncatedCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TruncatedCdf {
    fn new(mu: f64, sigma: f64) -> Self {
        let upper = mu + 12.0 * sigma;
        let cells = 20_000;
        let dx = (upper - 1.0) / cells as f64;
        let mut grid = vec![1.0];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for i in 0..cells {
            let a = 1.0 + i as f64 * dx;
            let b = a + dx;
            acc += dx / 6.0 * (folded_normal_pdf(a, mu, sigma) + 4.0 * folded_normal_pdf(0.5 * (a + b), mu, sigma) + folded_normal_pdf(b, mu, sigma));
            grid.push(b);
            cdf.push(acc);
        }
        let mass = acc;
        cdf.iter_mut().for_each(|c| *c /= mass);
        Self { grid, cdf }
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return 0.0;
        }
        let dx = self.grid[1] - self.grid[0];
        let i = ((x - 1.0) / dx) as usize;
        if i + 1 >= self.grid.len() {
            return 1.0;
        }
        let t = (x - self.grid[i]) / dx;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

fn sampling_distribution() -> (bool, String) {
    let n = 100_000;
    let cfg = SurfaceSamplingConfig::default().with_particles(n);
    let mut rng = rng(41);
    let layout = random_box(&mut rng, 0);
    let half = layout.half_extents();
    let positions = sample_surface_positions(&layout, &cfg, 7).unwrap();
    let mut contained = 0;
    let mut u = Vec::with_capacity(n);
    for p in positions.chunks_exact(3) {
        let p = Vector3::new(p[0], p[1], p[2]);
        if (0..3).all(|a| p[a].abs() <= half[a]) {
            contained += 1;
        }
        let r = p.norm();
        let d = p / r;
        let boundary = (0..3).filter(|&a| d[a] != 0.0).map(|a| half[a] / d[a].abs()).fold(f64::INFINITY, f64::min);
        u.push(boundary / r);
    }
    u.sort_by(|a, b| a.total_cmp(b));
    let cdf = TruncatedCdf::new(cfg.mu, cfg.sigma);
    let mut d_stat: f64 = 0.0;
    for (i, x) in u.iter().enumerate() {
        let f = cdf.eval(*x);
        d_stat = d_stat.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
    }
    // asymptotic Kolmogorov critical value at significance 0.01
    let critical = 1.6276 / (n as f64).sqrt();
    let pass = contained == n && d_stat < critical;
    (pass, format!("{contained}/{n} inside the box; KS statistic {d_stat:.5} vs critical {critical:.5} (alpha 0.01)"))
}

// ---------------------------------------------------------------------------
// end-to-end fit

fn e2e_layouts() -> Vec<InstanceLayout> {
    vec![
        InstanceLayout::new("chair", "a chair", Vector3::new(-0.6, 0.0, 0.0), Vector3::new(0.8, 0.8, 1.0), 1.0, 0.3).unwrap(),
        InstanceLayout::new("table", "a table", Vector3::new(0.7, 0.2, -0.1), Vector3::new(1.0, 0.6, 0.7), 1.0, 1.2).unwrap(),
    ]
}

/// Hidden scene: independently sampled centers with colors varying smoothly
/// over each object.
fn hidden_reference(layouts: &[InstanceLayout], m: usize) -> SceneState {
    let sampling = SurfaceSamplingConfig::default().with_particles(m);
    let parts = layouts
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let mut g = init_instance(l, &sampling, 100 + n as u64).unwrap();
            for i in 0..g.len() {
                let p = g.position(i);
                let c = [
                    1.5 * (2.0 * p.x + n as f64).sin(),
                    1.5 * (2.5 * p.y - 0.5).cos(),
                    1.5 * (3.0 * p.z + p.x).sin(),
                ];
                g.colors_raw[3 * i..3 * i + 3].copy_from_slice(&c);
                g.opacity_raw[i] = logit(0.6);
            }
            (l.clone(), g)
        })
        .collect();
    SceneState::from_parts("a living room", parts, 0)
}

fn end_to_end_fit() -> (bool, String) {
    let start = Instant::now();
    let m = 5000;
    let steps = 1500;
    let reference = hidden_reference(&e2e_layouts(), m);
    let cams = CameraPolicy { width: 128, height: 128, ..Default::default() };
    let cfg = OptimizerConfig {
        steps,
        instance_views: 0,
        scene_views: 1,
        scene_rig: 8,
        instance_cameras: cams,
        scene_cameras: cams,
        ..Default::default()
    };
    let targets = reference_targets(&reference, &cfg).unwrap();
    assert_eq!(targets.views().filter(|(k, _)| matches!(k, ViewKey::Scene { .. })).count(), 8);
    // halfway between two training azimuths
    let bounds = scene_bounds(&reference.layouts()).unwrap();
    let held_out = cams.orbit_camera(bounds.center, bounds.radius, 22.5f64.to_radians());
    let truth = render_forward(&reference.snapshot().unwrap(), &held_out, cfg.background, &cfg.raster).rgb;

    let sampling = SurfaceSamplingConfig::default().with_particles(m);
    let mut state = SceneState::initialize("a living room", e2e_layouts(), &sampling, 1).unwrap();
    let initial = render_forward(&state.snapshot().unwrap(), &held_out, cfg.background, &cfg.raster).rgb.psnr(&truth);
    run(&mut state, &targets, &cfg, &mut |_, _| StepControl::Continue).unwrap();
    let psnr = render_forward(&state.snapshot().unwrap(), &held_out, cfg.background, &cfg.raster).rgb.psnr(&truth);
    let secs = start.elapsed().as_secs_f64();
    let pass = psnr >= 25.0 && secs <= 600.0 && state.step <= 2000;
    (
        pass,
        format!("2x{m} Gaussians, 8 views at 128x128, {} steps: held-out PSNR {initial:.2} -> {psnr:.2} dB (>= 25), {secs:.0}s (<= 600s)", state.step),
    )
}

// ---------------------------------------------------------------------------
// layout refinement

fn refinement_case(reference: &SceneState, targets: &PhotometricTarget, cfg: &OptimizerConfig, signs: [f64; 3], k_factor: f64) -> (bool, String) {
    let truth = reference.instances[0].layout.clone();
    let extent = truth.scale_factor * truth.extents;
    let mut state = reference.clone();
    {
        let l = &mut state.instances[0].layout;
        for a in 0..3 {
            l.center[a] += signs[a] * 0.2 * extent[a];
        }
        l.scale_factor *= k_factor;
        l.learnable = Learnable::POSE;
    }
    let mut steps = 0;
    for _ in 0..500 {
        refine_layouts(&mut state, targets, cfg).unwrap();
        steps += 1;
    }
    let l = &state.instances[0].layout;
    let center_err: Vec<f64> = (0..3).map(|a| (l.center[a] - truth.center[a]).abs() / extent[a]).collect();
    let k_err = (l.scale_factor - truth.scale_factor).abs() / truth.scale_factor;
    let worst_center = center_err.iter().cloned().fold(0.0, f64::max);
    let pass = worst_center <= 0.05 && k_err <= 0.05;
    (pass, format!("k x{k_factor}: center err {worst_center:.3} of extent, k err {k_err:.3} after {steps} steps"))
}

fn layout_refinement() -> (bool, String) {
    let reference = hidden_reference(&e2e_layouts(), 2000);
    let cams = CameraPolicy { width: 64, height: 64, ..Default::default() };
    let cfg = OptimizerConfig {
        steps: 500,
        instance_views: 0,
        scene_views: 2,
        scene_rig: 8,
        scene_cameras: cams,
        instance_cameras: cams,
        scene_bounds: Some(scene_bounds(&reference.layouts()).unwrap()),
        ..Default::default()
    };
    let targets = reference_targets(&reference, &cfg).unwrap();
    let (p1, d1) = refinement_case(&reference, &targets, &cfg, [1.0, -1.0, 1.0], 1.2);
    let (p2, d2) = refinement_case(&reference, &targets, &cfg, [-1.0, 1.0, -1.0], 0.8);
    (p1 && p2, format!("center offset 0.2 of extent per axis; {d1}; {d2} (limits 0.05)"))
}

// ---------------------------------------------------------------------------
// edits, determinism and routing

fn small_state(seed: u64) -> (SceneState, PhotometricTarget, OptimizerConfig) {
    let layouts = vec![
        InstanceLayout::new("a", "a lamp", Vector3::new(-1.0, 0.0, 0.0), Vector3::new(0.5, 0.5, 1.2), 1.0, 0.2).unwrap(),
        InstanceLayout::new("b", "a desk", Vector3::new(0.2, 0.3, -0.2), Vector3::new(1.2, 0.6, 0.8), 1.0, 1.0).unwrap(),
        InstanceLayout::new("c", "a stool", Vector3::new(1.1, -0.5, -0.3), Vector3::new(0.4, 0.4, 0.5), 1.2, 2.0).unwrap(),
    ];
    let cams = CameraPolicy { width: 32, height: 32, ..Default::default() };
    let cfg = OptimizerConfig {
        steps: 20,
        instance_views: 1,
        scene_views: 1,
        instance_cameras: cams,
        scene_cameras: cams,
        seed,
        ..Default::default()
    };
    let reference = hidden_reference(&layouts, 300);
    let targets = reference_targets(&reference, &cfg).unwrap();
    let mut state = SceneState::initialize("an office", layouts, &SurfaceSamplingConfig::default().with_particles(300), seed).unwrap();
    for inst in &mut state.instances {
        inst.layout.learnable = Learnable::POSE;
    }
    (state, targets, cfg)
}

fn edit_locality() -> (bool, String) {
    let (mut state, targets, cfg) = small_state(3);
    run(&mut state, &targets, &OptimizerConfig { steps: 5, ..cfg.clone() }, &mut |_, _| StepControl::Continue).unwrap();
    let before = state.clone();
    local_reoptimize(&mut state, &targets, &cfg, &["b".to_string()], 10, &mut |_, _| StepControl::Continue).unwrap();
    let mut frozen = true;
    for i in [0, 2] {
        let (x, y) = (&before.instances[i], &state.instances[i]);
        frozen &= same_bits(&x.gaussians, &y.gaussians) && x.layout == y.layout && x.moments == y.moments;
        frozen &= bits(x.layout.center.as_slice()) == bits(y.layout.center.as_slice())
            && x.layout.scale_factor.to_bits() == y.layout.scale_factor.to_bits()
            && x.layout.yaw.to_bits() == y.layout.yaw.to_bits();
    }
    let edited_moved = !same_bits(&before.instances[1].gaussians, &state.instances[1].gaussians);
    let pass = frozen && edited_moved;
    (pass, format!("10 local steps on \"b\": others bit-identical {frozen}, edited instance changed {edited_moved}"))
}

fn run_in_pool(threads: usize, seed: u64) -> SceneState {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let (mut state, targets, cfg) = small_state(seed);
        run(&mut state, &targets, &cfg, &mut |_, _| StepControl::Continue).unwrap();
        state
    })
}

fn max_param_diff(a: &SceneState, b: &SceneState) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.instances.iter().zip(&b.instances) {
        let (gx, gy) = (&x.gaussians, &y.gaussians);
        for (u, v) in [
            (&gx.positions, &gy.positions),
            (&gx.rotations, &gy.rotations),
            (&gx.scales_raw, &gy.scales_raw),
            (&gx.opacity_raw, &gy.opacity_raw),
            (&gx.colors_raw, &gy.colors_raw),
        ] {
            for (p, q) in u.iter().zip(v) {
                worst = worst.max((p - q).abs());
            }
        }
        worst = worst
            .max((x.layout.center - y.layout.center).amax())
            .max((x.layout.scale_factor - y.layout.scale_factor).abs())
            .max((x.layout.yaw - y.layout.yaw).abs());
    }
    worst
}

fn determinism() -> (bool, String) {
    let a = encode_checkpoint(&run_in_pool(1, 17));
    let b = encode_checkpoint(&run_in_pool(1, 17));
    let four = run_in_pool(4, 17);
    let identical = a == b;
    let diff = max_param_diff(&decode_checkpoint(&a).unwrap(), &four);
    let pass = identical && diff <= 1e-10;
    (pass, format!("two single-threaded runs give identical checkpoints: {identical} ({} bytes); 1 vs 4 threads max parameter diff {diff:.1e} (<= 1e-10)", a.len()))
}

fn only(k: usize) -> LossWeights {
    let mut w = LossWeights::ZERO;
    match k {
        1 => w.beta1 = 1.0,
        2 => w.beta2 = 1.0,
        3 => w.beta3 = 1.0,
        4 => w.beta4 = 1.0,
        _ => w.beta5 = 1.0,
    }
    w
}

fn group_nonzero(g: &Gradient) -> [bool; 6] {
    let mut out = [false; 6];
    for inst in &g.instances {
        for (n, group) in inst.gaussians.groups().iter().enumerate() {
            out[n] |= group.iter().any(|v| *v != 0.0);
        }
        let l = inst.layout;
        out[5] |= l.center.iter().any(|v| *v != 0.0) || l.scale_factor != 0.0 || l.yaw != 0.0 || l.opacity_bias != 0.0;
    }
    out
}

fn term_isolation() -> (bool, String) {
    let (mut state, targets, base_cfg) = small_state(9);
    // anisotropic, rotated Gaussians so rotations matter, and some centers
    // outside their boxes so the containment term is live
    let mut rng = rng(90);
    for inst in &mut state.instances {
        let g = &mut inst.gaussians;
        for i in 0..g.len() {
            g.rotations[4 * i..4 * i + 4].copy_from_slice(&random_quat(&mut rng));
            for a in 0..3 {
                g.scales_raw[3 * i + a] += rng.random_range(-0.5..0.5);
            }
            if i % 7 == 0 {
                let p = g.position(i);
                g.set_position(i, p * 1.3);
            }
        }
    }
    let active = vec![true; state.len()];
    let grad = |w: LossWeights| objective_and_gradient(&state, &targets, &OptimizerConfig { weights: w, ..base_cfg.clone() }, 2, &active).unwrap();
    // position, rotation, scale, opacity, color, layout
    let expected: [(usize, [bool; 6]); 5] = [
        (1, [true, true, true, true, true, false]),
        (2, [true, false, false, false, false, false]),
        (3, [false, false, false, false, false, true]),
        (4, [true, true, true, true, true, false]),
        (5, [true, false, true, false, false, false]),
    ];
    let mut problems = Vec::new();
    for (k, routes) in expected {
        let got = group_nonzero(&grad(only(k)));
        if got != routes {
            problems.push(format!("only beta{k}: nonzero groups {got:?}, expected {routes:?}"));
        }
    }

    // zeroing one weight removes exactly that term's contribution
    let full = LossWeights::default();
    let g_full = grad(full);
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let mut w = full;
        let beta = match k {
            1 => std::mem::replace(&mut w.beta1, 0.0),
            2 => std::mem::replace(&mut w.beta2, 0.0),
            3 => std::mem::replace(&mut w.beta3, 0.0),
            4 => std::mem::replace(&mut w.beta4, 0.0),
            _ => std::mem::replace(&mut w.beta5, 0.0),
        };
        let g_without = grad(w);
        let g_term = grad(only(k));
        for ((a, b), c) in g_full.instances.iter().zip(&g_without.instances).zip(&g_term.instances) {
            for n in 0..5 {
                for ((x, y), z) in a.gaussians.groups()[n].iter().zip(b.gaussians.groups()[n]).zip(c.gaussians.groups()[n]) {
                    worst = worst.max((x - y - beta * z).abs() / x.abs().max(1e-12));
                }
            }
            let (x, y, z) = (a.layout, b.layout, c.layout);
            worst = worst.max((x.center - y.center - beta * z.center).amax() / x.center.amax().max(1e-12));
        }
        if k == 3 && group_nonzero(&g_without)[5] {
            problems.push("beta3 = 0 still sends gradient to layouts".into());
        }
    }
    if worst > 1e-9 {
        problems.push(format!("removing a term changed the rest of the gradient by {worst:e} (relative)"));
    }

    // over several steps: no β₃, layouts never move; no β₁/β₄, appearance never moves
    let mut s = state.clone();
    let cfg = OptimizerConfig { weights: LossWeights { beta3: 0.0, ..full }, ..base_cfg.clone() };
    for _ in 0..4 {
        step(&mut s, &targets, &cfg).unwrap();
    }
    if s.layouts() != state.layouts() {
        problems.push("beta3 = 0 moved a layout".into());
    }
    let mut s = state.clone();
    let cfg = OptimizerConfig { weights: LossWeights { beta1: 0.0, beta4: 0.0, ..full }, ..base_cfg.clone() };
    for _ in 0..4 {
        step(&mut s, &targets, &cfg).unwrap();
    }
    for (a, b) in s.instances.iter().zip(&state.instances) {
        let g = (&a.gaussians, &b.gaussians);
        if bits(&g.0.colors_raw) != bits(&g.1.colors_raw) || bits(&g.0.opacity_raw) != bits(&g.1.opacity_raw) || bits(&g.0.rotations) != bits(&g.1.rotations) {
            problems.push("beta1 = beta4 = 0 changed colors, opacities or rotations".into());
            break;
        }
    }
    let pass = problems.is_empty();
    let detail = if pass {
        format!("single-term routing matches for all five weights; zeroing a weight removes exactly its term (worst rel {worst:.1e}); multi-step freezes hold")
    } else {
        problems.join("; ")
    };
    (pass, detail)
}
