//! Layout containment loss and the weighted total objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{InstanceGaussians, InstanceLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("loss term `{0}` is not finite")]
    NonFinite(String),
    #[error("invalid loss weight `{name}`: {value}")]
    InvalidWeight { name: &'static str, value: f64 },
}

/// Weights of the five objective terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Per-instance guidance.
    pub beta1: f64,
    /// Layout containment.
    pub beta2: f64,
    /// Layout refinement (scene guidance routed to layout pose).
    pub beta3: f64,
    /// Scene-level guidance.
    pub beta4: f64,
    /// Flatness regularizer.
    pub beta5: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1e3,
            beta3: 1e-1,
            beta4: 1e-1,
            beta5: 1e3,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        beta1: 0.0,
        beta2: 0.0,
        beta3: 0.0,
        beta4: 0.0,
        beta5: 0.0,
    };

    pub fn validate(&self) -> Result<(), LossError> {
        for (name, value) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("beta4", self.beta4),
            ("beta5", self.beta5),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(LossError::InvalidWeight { name, value });
            }
        }
        Ok(())
    }
}

/// Unweighted term values of one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub sds_instance: Vec<f64>,
    pub layout: Vec<f64>,
    pub refine: Vec<f64>,
    pub global: f64,
    pub reg: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub terms: LossTerms,
    pub total: f64,
}

impl LossReport {
    pub fn new(terms: LossTerms, weights: &LossWeights) -> Result<Self, LossError> {
        let total = total_loss(&terms, weights)?;
        Ok(Self { terms, total })
    }
}

/// `Σᵢ(β₁·sdsᵢ + β₂·layoutᵢ + β₃·refineᵢ) + β₄·global + β₅·reg`.
/// Any non-finite term is an error.
pub fn total_loss(terms: &LossTerms, w: &LossWeights) -> Result<f64, LossError> {
    let check = |name: String, v: f64| if v.is_finite() { Ok(v) } else { Err(LossError::NonFinite(name)) };
    let mut total = 0.0;
    for (i, v) in terms.sds_instance.iter().enumerate() {
        total += w.beta1 * check(format!("sds_instance[{i}]"), *v)?;
    }
    for (i, v) in terms.layout.iter().enumerate() {
        total += w.beta2 * check(format!("layout[{i}]"), *v)?;
    }
    for (i, v) in terms.refine.iter().enumerate() {
        total += w.beta3 * check(format!("refine[{i}]"), *v)?;
    }
    total += w.beta4 * check("global".into(), terms.global)?;
    total += w.beta5 * check("reg".into(), terms.reg)?;
    Ok(total)
}

/// Exterior Manhattan distance of one layout-local point to the box
/// `[-e/2, e/2]`.
pub fn exterior_l1(p: [f64; 3], half: [f64; 3]) -> f64 {
    (0..3).map(|a| (p[a].abs() - half[a]).max(0.0)).sum()
}

/// Sum over Gaussian centers of the exterior Manhattan distance to the
/// layout box, measured in the layout-local frame.
pub fn layout_loss(g: &InstanceGaussians, layout: &InstanceLayout) -> f64 {
    let h = layout.half_extents();
    let half = [h.x, h.y, h.z];
    g.positions
        .chunks_exact(3)
        .map(|p| exterior_l1([p[0], p[1], p[2]], half))
        .sum()
}

/// Loss value and its subgradient with respect to the flat position array
/// (`sign(p_a)` on violated axes, zero elsewhere).
pub fn layout_loss_with_grad(g: &InstanceGaussians, layout: &InstanceLayout) -> (f64, Vec<f64>) {
    let h = layout.half_extents();
    let mut grad = vec![0.0; g.positions.len()];
    let mut total = 0.0;
    for (k, p) in g.positions.iter().enumerate() {
        let excess = p.abs() - h[k % 3];
        if excess > 0.0 {
            total += excess;
            grad[k] = p.signum();
        }
    }
    (total, grad)
}
