use serde::{Deserialize, Serialize};

/// Adam hyperparameters. Defaults: `δ = 0.05`, `β₁ = 0`, `β₂ = 0.95`, `ε = 1e-8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            beta1: 0.0,
            beta2: 0.95,
            epsilon: 1e-8,
        }
    }
}

/// State of a scalar Adam optimizer running gradient *ascent* on `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub theta: f64,
    /// First moment.
    pub m: f64,
    /// Second moment.
    pub s: f64,
    /// Number of updates applied so far.
    pub n: u64,
}

impl AdamState {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            m: 0.0,
            s: 0.0,
            n: 0,
        }
    }
}

/// One ascent step. The step counter is incremented before bias correction,
/// so the first call uses `n = 1`.
pub fn adam_update(state: &AdamState, g: f64, cfg: &AdamConfig) -> AdamState {
    let n = state.n + 1;
    let m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
    let s = cfg.beta2 * state.s + (1.0 - cfg.beta2) * g * g;
    let m_hat = m / (1.0 - cfg.beta1.powf(n as f64));
    let s_hat = s / (1.0 - cfg.beta2.powf(n as f64));
    AdamState {
        theta: state.theta + cfg.learning_rate * m_hat / (s_hat.sqrt() + cfg.epsilon),
        m,
        s,
        n,
    }
}
