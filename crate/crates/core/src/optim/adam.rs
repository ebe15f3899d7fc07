use serde::{Deserialize, Serialize};

use crate::scene::GaussianGrads;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Number of scalar layout parameters: center (3), scale factor, yaw,
/// opacity bias.
pub const LAYOUT_PARAMS: usize = 6;

/// Moment estimates of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Number of updates applied so far.
    pub t: u64,
    pub first: GaussianGrads,
    pub second: GaussianGrads,
    pub layout_first: [f64; LAYOUT_PARAMS],
    pub layout_second: [f64; LAYOUT_PARAMS],
}

impl Moments {
    pub fn zeros(count: usize) -> Self {
        Self {
            t: 0,
            first: GaussianGrads::zeros(count),
            second: GaussianGrads::zeros(count),
            layout_first: [0.0; LAYOUT_PARAMS],
            layout_second: [0.0; LAYOUT_PARAMS],
        }
    }
}

/// Bias-corrected step for a single scalar; updates the moments in place
/// and returns the amount to subtract from the parameter.
#[inline]
pub fn adam_delta(cfg: &AdamConfig, m: &mut f64, v: &mut f64, g: f64, lr: f64, c1: f64, c2: f64) -> f64 {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    lr * m_hat / (v_hat.sqrt() + cfg.epsilon)
}

/// Bias-correction denominators `(1 − β₁ᵗ, 1 − β₂ᵗ)`.
pub fn bias_corrections(cfg: &AdamConfig, t: u64) -> (f64, f64) {
    let t = t.min(i32::MAX as u64) as i32;
    (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t))
}
