//! Leapfrog integration, partial momentum refreshment and the trajectory
//! kernels built from them: MALT, fixed-length HMC and jittered RHMC.
//!
//! All kernels share one trajectory routine. A trajectory of `L = ⌈τ/h⌉`
//! steps draws `ξ_0` for the initial velocity, then for each step draws
//! `ξ_i`, refreshes `v ← ηv + sqrt(1-η²) M^{1/2} ξ_i` and takes one leapfrog
//! step. The energy error accumulated over the whole trajectory is tested
//! once against an `Exp(1)` variate. With `η = 1` the refresh is the identity
//! but still consumes its variates, so MALT at zero damping and HMC read the
//! random stream identically.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::target::TargetDensity;

/// Diagonal mass matrix with cached square root and inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDiag {
    entries: Vec<f64>,
    sqrt: Vec<f64>,
    inv: Vec<f64>,
}

impl MassDiag {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter(
                "mass must have dimension >= 1".into(),
            ));
        }
        if let Some(bad) = entries.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "mass entries must be finite and positive (got {bad})"
            )));
        }
        let sqrt = entries.iter().map(|m| m.sqrt()).collect();
        let inv = entries.iter().map(|m| 1.0 / m).collect();
        Ok(Self { entries, sqrt, inv })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: vec![1.0; dim],
            sqrt: vec![1.0; dim],
            inv: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sqrt(&self) -> &[f64] {
        &self.sqrt
    }

    pub fn inv(&self) -> &[f64] {
        &self.inv
    }

    /// `|v|²_{M^{-1}} = Σ v_i² / M_ii`.
    pub fn norm_sq_inv(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.inv).map(|(vi, m)| vi * vi * m).sum()
    }

    fn kinetic(&self, v: &[f64]) -> f64 {
        0.5 * self.norm_sq_inv(v)
    }
}

/// The four tunables consumed by one kernel call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub mass: MassDiag,
    /// Damping `γ ≥ 0`.
    pub damping: f64,
    /// Leapfrog step size `h > 0`.
    pub step: f64,
    /// Trajectory length `τ > 0`.
    pub length: f64,
}

impl KernelParams {
    pub fn new(mass: MassDiag, damping: f64, step: f64, length: f64) -> Result<Self> {
        let p = Self {
            mass,
            damping,
            step,
            length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step must be positive (got {})",
                self.step
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "length must be positive (got {})",
                self.length
            )));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must be non-negative (got {})",
                self.damping
            )));
        }
        Ok(())
    }

    /// `L = ⌈τ/h⌉`, at least one.
    pub fn n_steps(&self) -> usize {
        n_steps(self.length, self.step)
    }

    /// Per-step momentum retention `η = exp(-γh)`.
    pub fn eta(&self) -> f64 {
        (-self.damping * self.step).exp()
    }
}

pub(crate) fn n_steps(length: f64, step: f64) -> usize {
    ((length / step).ceil() as usize).max(1)
}

/// Everything one trajectory hands back to the tuner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    /// Next chain state `X′`; equals `start_position` on rejection.
    pub accepted_position: Vec<f64>,
    /// Velocity at the end of the trajectory, `v_L`.
    pub end_velocity: Vec<f64>,
    pub start_position: Vec<f64>,
    /// First refreshed velocity `v₀′`.
    pub start_velocity: Vec<f64>,
    /// Total energy error `Δ`; `+∞` after a divergence.
    pub delta: f64,
    pub accepted: bool,
    pub diverged: bool,
    /// Energy error of each leapfrog step, `δ_i`.
    pub per_step_deltas: Vec<f64>,
    pub gradient_evals: usize,
    /// Number of leapfrog steps `L`.
    pub steps: usize,
    /// Trajectory length `τ` the step count was derived from.
    pub length: f64,
}

impl TrajectoryOutcome {
    /// `exp(-Δ⁺)`.
    pub fn acceptance_probability(&self) -> f64 {
        acceptance_probability(self.delta)
    }
}

/// `exp(-max(0, Δ))`, zero for `Δ = +∞` or NaN.
pub fn acceptance_probability(delta: f64) -> f64 {
    if delta.is_nan() {
        0.0
    } else {
        (-delta.max(0.0)).exp()
    }
}

/// One leapfrog step, in place. `grad` must hold `∇Φ(x)` on entry and holds
/// `∇Φ(x₁)` on exit. Returns `Φ(x₁)`.
pub(crate) fn leapfrog_in_place<T: TargetDensity + ?Sized>(
    target: &T,
    mass: &MassDiag,
    h: f64,
    x: &mut [f64],
    v: &mut [f64],
    grad: &mut [f64],
) -> Result<f64> {
    let half = 0.5 * h;
    for ((vi, gi), (xi, mi)) in v
        .iter_mut()
        .zip(grad.iter())
        .zip(x.iter_mut().zip(mass.inv()))
    {
        *vi -= half * gi;
        *xi += h * mi * *vi;
    }
    let phi = target.potential_and_gradient(x, grad);
    if !phi.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    for (vi, gi) in v.iter_mut().zip(grad.iter()) {
        *vi -= half * gi;
    }
    Ok(phi)
}

/// Result of a single [`leapfrog`] step.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// `∇Φ(position)`, reusable as the cached gradient of the next step.
    pub gradient: Vec<f64>,
}

/// One leapfrog step from `(x0, v0)`. Pass `grad_x0 = Some(∇Φ(x0))` to skip
/// the initial gradient evaluation.
pub fn leapfrog<T: TargetDensity + ?Sized>(
    target: &T,
    mass: &MassDiag,
    h: f64,
    x0: &[f64],
    v0: &[f64],
    grad_x0: Option<&[f64]>,
) -> Result<LeapfrogState> {
    let mut grad = match grad_x0 {
        Some(g) => g.to_vec(),
        None => {
            let mut g = vec![0.0; x0.len()];
            target.gradient(x0, &mut g);
            g
        }
    };
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    leapfrog_in_place(target, mass, h, &mut x, &mut v, &mut grad)?;
    Ok(LeapfrogState {
        position: x,
        velocity: v,
        gradient: grad,
    })
}

/// `v ← ηv + sqrt(1-η²) M^{1/2} ξ` for a given standard normal vector `ξ`.
pub fn refresh_with_noise(v: &mut [f64], eta: f64, mass: &MassDiag, xi: &[f64]) {
    let c = (1.0 - eta * eta).max(0.0).sqrt();
    if c == 0.0 {
        return;
    }
    for ((vi, si), ni) in v.iter_mut().zip(mass.sqrt()).zip(xi) {
        *vi = eta * *vi + c * si * ni;
    }
}

fn refresh_in_place<R: Rng + ?Sized>(
    v: &mut [f64],
    eta: f64,
    mass: &MassDiag,
    noise: &mut [f64],
    rng: &mut R,
) {
    for n in noise.iter_mut() {
        *n = rng.sample(StandardNormal);
    }
    refresh_with_noise(v, eta, mass, noise);
}

/// Partial momentum refreshment. Consumes exactly `d` standard normals.
pub fn partial_refresh<R: Rng + ?Sized>(
    v: &[f64],
    eta: f64,
    mass: &MassDiag,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut noise = vec![0.0; v.len()];
    refresh_in_place(&mut out, eta, mass, &mut noise, rng);
    out
}

fn trajectory<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    x: &[f64],
    target: &T,
    mass: &MassDiag,
    step: f64,
    length: f64,
    eta: f64,
    rng: &mut R,
) -> TrajectoryOutcome {
    let d = x.len();
    let n_steps = n_steps(length, step);
    let mut pos = x.to_vec();
    let mut grad = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut per_step_deltas = Vec::with_capacity(n_steps);

    let diverged = |vel: Vec<f64>, v0: Vec<f64>, deltas, evals| TrajectoryOutcome {
        accepted_position: x.to_vec(),
        end_velocity: vel,
        start_position: x.to_vec(),
        start_velocity: v0,
        delta: f64::INFINITY,
        accepted: false,
        diverged: true,
        per_step_deltas: deltas,
        gradient_evals: evals,
        steps: n_steps,
        length,
    };

    let phi0 = target.potential_and_gradient(&pos, &mut grad);
    let mut gradient_evals = 1;
    if !phi0.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return diverged(vec![0.0; d], vec![0.0; d], per_step_deltas, gradient_evals);
    }

    let mut vel: Vec<f64> = mass
        .sqrt()
        .iter()
        .map(|s| s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut start_velocity = Vec::new();
    let mut kinetic_delta = 0.0;
    let mut phi_prev = phi0;

    for i in 0..n_steps {
        refresh_in_place(&mut vel, eta, mass, &mut noise, rng);
        if i == 0 {
            start_velocity = vel.clone();
        }
        let k_before = mass.kinetic(&vel);
        let phi = match leapfrog_in_place(target, mass, step, &mut pos, &mut vel, &mut grad) {
            Ok(phi) => phi,
            Err(_) => {
                gradient_evals += 1;
                return diverged(vel, start_velocity, per_step_deltas, gradient_evals);
            }
        };
        gradient_evals += 1;
        let k_after = mass.kinetic(&vel);
        kinetic_delta += k_after - k_before;
        per_step_deltas.push(phi - phi_prev + k_after - k_before);
        phi_prev = phi;
    }

    let delta = kinetic_delta + (phi_prev - phi0);
    let z: f64 = rng.sample(Exp1);
    // Reject iff Z < Δ; a NaN Δ compares false and is rejected.
    let accepted = z >= delta;
    TrajectoryOutcome {
        accepted_position: if accepted { pos } else { x.to_vec() },
        end_velocity: vel,
        start_position: x.to_vec(),
        start_velocity,
        delta,
        accepted,
        diverged: false,
        per_step_deltas,
        gradient_evals,
        steps: n_steps,
        length,
    }
}

/// One MALT transition: a full Langevin trajectory with a single accept/reject.
pub fn malt_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    x: &[f64],
    target: &T,
    params: &KernelParams,
    rng: &mut R,
) -> TrajectoryOutcome {
    trajectory(
        x,
        target,
        &params.mass,
        params.step,
        params.length,
        params.eta(),
        rng,
    )
}

/// Fixed-length HMC: MALT with no intermediate refreshment. `damping` is ignored.
pub fn hmc_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    x: &[f64],
    target: &T,
    params: &KernelParams,
    rng: &mut R,
) -> TrajectoryOutcome {
    trajectory(
        x,
        target,
        &params.mass,
        params.step,
        params.length,
        1.0,
        rng,
    )
}

/// Trajectory-length distribution for RHMC, both with mean `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Jitter {
    /// `τ′ ~ Uniform(0, 2τ]`.
    Uniform,
    /// `τ′ ~ Exp(mean τ)`.
    Exponential,
}

impl Jitter {
    /// Draws a length with mean `tau`, clamped below at `step`.
    pub fn sample_length<R: Rng + ?Sized>(self, tau: f64, step: f64, rng: &mut R) -> f64 {
        let drawn = match self {
            Jitter::Uniform => 2.0 * tau * (1.0 - rng.random::<f64>()),
            Jitter::Exponential => tau * rng.sample::<f64, _>(Exp1),
        };
        drawn.max(step)
    }
}

/// RHMC transition: draws a jittered length, then runs [`hmc_step`] with it.
pub fn rhmc_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    x: &[f64],
    target: &T,
    params: &KernelParams,
    jitter: Jitter,
    rng: &mut R,
) -> TrajectoryOutcome {
    let length = jitter.sample_length(params.length, params.step, rng);
    trajectory(x, target, &params.mass, params.step, length, 1.0, rng)
}
