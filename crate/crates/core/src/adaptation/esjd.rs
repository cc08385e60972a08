//! The principal-projection statistic `φ(x) = (zᵀM^{1/2}(x-m))²` and the
//! stochastic gradients used to tune the step size and trajectory length.

use crate::adaptation::moments::OnlineMoments;
use crate::dynamics::{acceptance_probability, MassDiag, TrajectoryOutcome};
use crate::error::{Error, Result};
use crate::target::dot;

/// Projection onto the preconditioned principal axis.
///
/// Stores the centre `m` and the direction `M^{1/2} z`, so that
/// `zᵀM^{1/2}(x-m) = directionᵀ(x - centre)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    centre: Vec<f64>,
    direction: Vec<f64>,
}

impl Projection {
    /// Builds the projection for a unit axis `z`.
    pub fn from_axis(centre: &[f64], axis: &[f64], mass: &MassDiag) -> Self {
        Self {
            centre: centre.to_vec(),
            direction: axis.iter().zip(mass.sqrt()).map(|(z, s)| z * s).collect(),
        }
    }

    /// Uses `z = w/|w|`; fails while `w` is still zero.
    pub fn new(moments: &OnlineMoments, mass: &MassDiag) -> Result<Self> {
        let axis = moments.axis().ok_or(Error::UndefinedAxis)?;
        Ok(Self::from_axis(&moments.mean, &axis, mass))
    }

    /// Like [`Projection::new`], but falls back to the first coordinate axis
    /// while `w` is zero.
    pub fn with_fallback(moments: &OnlineMoments, mass: &MassDiag) -> Self {
        Self::from_axis(&moments.mean, &moments.axis_or_first(), mass)
    }

    /// `zᵀM^{1/2}(x-m)`.
    pub fn project(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.centre)
            .zip(&self.direction)
            .map(|((xi, mi), di)| di * (xi - mi))
            .sum()
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        self.project(x).powi(2)
    }

    /// `∇φ(x) = 2 (zᵀM^{1/2}(x-m)) M^{1/2} z`.
    pub fn phi_grad(&self, x: &[f64]) -> Vec<f64> {
        let p = 2.0 * self.project(x);
        self.direction.iter().map(|d| p * d).collect()
    }

    /// `∇φ(x)ᵀ M^{-1} v`.
    fn phi_velocity(&self, x: &[f64], v: &[f64], mass: &MassDiag) -> f64 {
        let p = 2.0 * self.project(x);
        p * self
            .direction
            .iter()
            .zip(v)
            .zip(mass.inv())
            .map(|((d, vi), mi)| d * vi * mi)
            .sum::<f64>()
    }
}

/// `φ(x)` for the current moments; errors while the principal axis is undefined.
pub fn phi(x: &[f64], moments: &OnlineMoments, mass: &MassDiag) -> Result<f64> {
    Ok(Projection::new(moments, mass)?.phi(x))
}

/// `∇φ(x)` for the current moments; errors while the principal axis is undefined.
pub fn phi_grad(x: &[f64], moments: &OnlineMoments, mass: &MassDiag) -> Result<Vec<f64>> {
    Ok(Projection::new(moments, mass)?.phi_grad(x))
}

/// Synthetic step-size gradient `exp(-Δ⁺) - α*`.
pub fn step_size_gradient(delta: f64, target_acceptance: f64) -> f64 {
    acceptance_probability(delta) - target_acceptance
}

/// Forward estimator of `d/dτ ESJD`:
/// `2 (∇φ(x_end)ᵀ M^{-1} v_end) (φ(x_end) - φ(x_start))`.
pub fn esjd_grad_forward(
    proj: &Projection,
    mass: &MassDiag,
    x_end: &[f64],
    x_start: &[f64],
    v_end: &[f64],
) -> f64 {
    let jump = proj.phi(x_end) - proj.phi(x_start);
    if jump == 0.0 {
        // also keeps a non-finite velocity from a rejected trajectory out of the sum
        return 0.0;
    }
    2.0 * proj.phi_velocity(x_end, v_end, mass) * jump
}

/// Time-reversal averaged estimator
/// `(δ(x_end, x_start, v_end) + δ(x_start, x_end, -v_start)) / 2`.
pub fn esjd_grad_reduced(
    proj: &Projection,
    mass: &MassDiag,
    x_end: &[f64],
    v_end: &[f64],
    x_start: &[f64],
    v_start: &[f64],
) -> f64 {
    let neg: Vec<f64> = v_start.iter().map(|v| -v).collect();
    0.5 * (esjd_grad_forward(proj, mass, x_end, x_start, v_end)
        + esjd_grad_forward(proj, mass, x_start, x_end, &neg))
}

/// The two ingredients of one chain's trajectory-length gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthGradientTerms {
    /// Reduced-variance derivative estimate `g(X′, v_τ, x₀, v₀)`.
    pub derivative: f64,
    /// Squared jump `(φ(X′) - φ(x₀))²`.
    pub jump_sq: f64,
}

impl LengthGradientTerms {
    pub fn from_outcome(proj: &Projection, mass: &MassDiag, outcome: &TrajectoryOutcome) -> Self {
        let jump = proj.phi(&outcome.accepted_position) - proj.phi(&outcome.start_position);
        Self {
            derivative: esjd_grad_reduced(
                proj,
                mass,
                &outcome.accepted_position,
                &outcome.end_velocity,
                &outcome.start_position,
                &outcome.start_velocity,
            ),
            jump_sq: jump * jump,
        }
    }

    /// `derivative - (1+ρ)/(2τ) · jump²`.
    pub fn combine(&self, rho: f64, tau: f64) -> f64 {
        self.derivative - (1.0 + rho) / (2.0 * tau) * self.jump_sq
    }
}

/// One chain's contribution to the gradient of `ESJD_φ(τ) / τ^{(1+ρ)/2}`.
pub fn trajectory_gradient(
    proj: &Projection,
    mass: &MassDiag,
    outcome: &TrajectoryOutcome,
    rho: f64,
    tau: f64,
) -> f64 {
    LengthGradientTerms::from_outcome(proj, mass, outcome).combine(rho, tau)
}

pub(crate) fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let norm = dot(v, v).sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}
