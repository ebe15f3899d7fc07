#![allow(dead_code)]

use layoutsplat::scene::{logit, normalize_quat, Camera, InstanceGaussians, InstanceGrads, InstanceLayout, Learnable};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct SceneRecipe {
    pub instances: usize,
    pub per_instance: usize,
    /// Range of raw log-scales.
    pub log_scale: (f64, f64),
    /// Range of activated opacities.
    pub opacity: (f64, f64),
    pub learnable: Learnable,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        Self {
            instances: 2,
            per_instance: 20,
            log_scale: (0.03f64.ln(), 0.15f64.ln()),
            opacity: (0.05, 0.9),
            learnable: Learnable::NONE,
        }
    }
}

pub fn random_quat<R: Rng>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|c| c * c).sum();
        if n2 > 0.05 && n2 <= 1.0 {
            return normalize_quat(q);
        }
    }
}

pub fn random_layout<R: Rng>(rng: &mut R, id: &str) -> InstanceLayout {
    InstanceLayout::new(
        id,
        format!("object {id}"),
        Vector3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8), rng.random_range(-0.3..0.3)),
        Vector3::new(rng.random_range(0.4..1.2), rng.random_range(0.4..1.2), rng.random_range(0.4..1.2)),
        rng.random_range(0.7..1.4),
        rng.random_range(0.0..std::f64::consts::TAU),
    )
    .unwrap()
}

pub fn random_gaussians<R: Rng>(rng: &mut R, layout: &InstanceLayout, m: usize, recipe: &SceneRecipe) -> InstanceGaussians {
    let half = layout.half_extents();
    let mut g = InstanceGaussians::zeros(m);
    for i in 0..m {
        let p = Vector3::new(
            rng.random_range(-half.x..half.x),
            rng.random_range(-half.y..half.y),
            rng.random_range(-half.z..half.z),
        );
        g.set_position(i, p);
        g.rotations[4 * i..4 * i + 4].copy_from_slice(&random_quat(rng));
        for a in 0..3 {
            g.scales_raw[3 * i + a] = rng.random_range(recipe.log_scale.0..recipe.log_scale.1);
            g.colors_raw[3 * i + a] = rng.random_range(-2.0..2.0);
        }
        g.opacity_raw[i] = logit(rng.random_range(recipe.opacity.0..recipe.opacity.1));
    }
    g
}

pub fn random_scene<R: Rng>(rng: &mut R, recipe: &SceneRecipe) -> Vec<(InstanceLayout, InstanceGaussians)> {
    (0..recipe.instances)
        .map(|i| {
            let layout = random_layout(rng, &format!("obj{i}")).with_learnable(recipe.learnable);
            let g = random_gaussians(rng, &layout, recipe.per_instance, recipe);
            (layout, g)
        })
        .collect()
}

/// Camera on a sphere of radius `distance` around the origin looking at it.
pub fn random_camera<R: Rng>(rng: &mut R, distance: f64, width: usize, height: usize) -> Camera {
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.random_range(-0.6..0.9);
    let eye = distance * Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
    Camera::look_at(eye, Vector3::zeros(), 50f64.to_radians(), width, height).unwrap()
}

pub fn refs(scene: &[(InstanceLayout, InstanceGaussians)]) -> Vec<(&InstanceLayout, &InstanceGaussians)> {
    scene.iter().map(|(l, g)| (l, g)).collect()
}

/// One scalar parameter of a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    /// Gaussian group (0 positions, 1 rotations, 2 scales, 3 opacity, 4 colors).
    Gaussian { instance: usize, group: usize, k: usize },
    /// Layout pose (0..3 center, 3 scale factor, 4 yaw, 5 opacity bias).
    Layout { instance: usize, which: usize },
}

pub const GROUP_NAMES: [&str; 5] = ["position", "rotation", "scale", "opacity", "color"];
pub const LAYOUT_NAMES: [&str; 6] = ["center.x", "center.y", "center.z", "scale_factor", "yaw", "opacity_bias"];

impl Param {
    pub fn name(&self) -> String {
        match *self {
            Param::Gaussian { instance, group, k } => format!("inst{instance}.{}[{k}]", GROUP_NAMES[group]),
            Param::Layout { instance, which } => format!("inst{instance}.layout.{}", LAYOUT_NAMES[which]),
        }
    }
}

fn group_mut(g: &mut InstanceGaussians, group: usize) -> &mut Vec<f64> {
    match group {
        0 => &mut g.positions,
        1 => &mut g.rotations,
        2 => &mut g.scales_raw,
        3 => &mut g.opacity_raw,
        _ => &mut g.colors_raw,
    }
}

pub fn all_params(scene: &[(InstanceLayout, InstanceGaussians)], layout_params: &[usize]) -> Vec<Param> {
    let mut out = Vec::new();
    for (i, (_, g)) in scene.iter().enumerate() {
        let lens = [g.positions.len(), g.rotations.len(), g.scales_raw.len(), g.opacity_raw.len(), g.colors_raw.len()];
        for (group, len) in lens.iter().enumerate() {
            for k in 0..*len {
                out.push(Param::Gaussian { instance: i, group, k });
            }
        }
        for &which in layout_params {
            out.push(Param::Layout { instance: i, which });
        }
    }
    out
}

pub fn perturb(scene: &[(InstanceLayout, InstanceGaussians)], p: Param, delta: f64) -> Vec<(InstanceLayout, InstanceGaussians)> {
    let mut s = scene.to_vec();
    match p {
        Param::Gaussian { instance, group, k } => group_mut(&mut s[instance].1, group)[k] += delta,
        Param::Layout { instance, which } => {
            let l = &mut s[instance].0;
            match which {
                0..=2 => l.center[which] += delta,
                3 => l.scale_factor += delta,
                // kept unnormalized so ±h stays on one side of the wrap
                4 => l.yaw += delta,
                _ => l.opacity_bias += delta,
            }
        }
    }
    s
}

pub fn lookup(grads: &[InstanceGrads], p: Param) -> f64 {
    match p {
        Param::Gaussian { instance, group, k } => grads[instance].gaussians.groups()[group][k],
        Param::Layout { instance, which } => {
            let l = &grads[instance].layout;
            match which {
                0..=2 => l.center[which],
                3 => l.scale_factor,
                4 => l.yaw,
                _ => l.opacity_bias,
            }
        }
    }
}

/// Outcome of comparing one analytic derivative against central differences.
#[derive(Clone, Debug, Default)]
pub struct FdStats {
    pub checked: usize,
    pub skipped: usize,
    pub nonzero: usize,
    pub worst: f64,
    pub worst_name: String,
    pub failures: Vec<String>,
}

impl FdStats {
    /// Records one comparison. `floor` keeps near-zero derivatives from
    /// producing huge relative errors out of rounding noise.
    pub fn record(&mut self, name: &str, analytic: f64, fd: f64, floor: f64, tol: f64) {
        self.checked += 1;
        let scale = analytic.abs().max(fd.abs());
        if scale > floor {
            self.nonzero += 1;
        }
        let rel = (analytic - fd).abs() / scale.max(floor);
        if rel > self.worst {
            self.worst = rel;
            self.worst_name = name.to_string();
        }
        if rel >= tol {
            self.failures.push(format!("{name}: analytic {analytic:.6e} fd {fd:.6e} rel {rel:.2e}"));
        }
    }

    pub fn merge(&mut self, other: FdStats) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.nonzero += other.nonzero;
        if other.worst > self.worst {
            self.worst = other.worst;
            self.worst_name = other.worst_name;
        }
        self.failures.extend(other.failures);
    }
}

/// Prints a one-line acceptance verdict and returns whether it passed.
pub fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
