//! Tuning machinery for the adaptive sampler.
//!
//! * [`adam`]: scalar Adam in ascent form, used on `log h` and `log τ`.
//! * [`moments`]: amnesic online moments, CCIPCA, and the mass, damping and
//!   `ρ` rules computed from them.
//! * [`esjd`]: the squared principal projection `φ` and the stochastic
//!   gradients for step size and trajectory length.

pub mod adam;
pub mod esjd;
pub mod moments;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use esjd::{
    esjd_grad_forward, esjd_grad_reduced, phi, phi_grad, step_size_gradient, trajectory_gradient,
    LengthGradientTerms, Projection,
};
pub use moments::{
    ccipca_update, compute_damping, compute_mass, compute_rho, AmnesiaSchedule, OnlineMoments,
};
