//! Online moment estimates with amnesia, CCIPCA, and the mass/damping/ρ
//! rules derived from them.

use serde::{Deserialize, Serialize};

use crate::adaptation::esjd::{unit, Projection};
use crate::dynamics::MassDiag;
use crate::error::{Error, Result};
use crate::reduce::{mean, mean_rows};
use crate::target::dot;

/// Decay `β(n) = n/(n+a)`; `a_w` is used for the principal vector `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmnesiaSchedule {
    pub a: f64,
    pub a_w: f64,
}

impl Default for AmnesiaSchedule {
    fn default() -> Self {
        Self { a: 8.0, a_w: 3.0 }
    }
}

impl AmnesiaSchedule {
    pub fn beta(&self, n: usize) -> f64 {
        n as f64 / (n as f64 + self.a)
    }

    pub fn beta_w(&self, n: usize) -> f64 {
        n as f64 / (n as f64 + self.a_w)
    }
}

/// Running estimates `m, s, w, m₂, s₂, c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineMoments {
    /// Coordinate means `m`.
    pub mean: Vec<f64>,
    /// Coordinate variances `s`.
    pub var: Vec<f64>,
    /// CCIPCA vector `w`; `|w|` estimates the top eigenvalue.
    pub pca_vector: Vec<f64>,
    /// Mean of the squared projection, `m₂`.
    pub proj_mean: f64,
    /// Variance of the squared projection, `s₂`.
    pub proj_var: f64,
    /// Lag-one covariance of the squared projection across a transition, `c`.
    pub lag_cov: f64,
}

impl OnlineMoments {
    /// Zero mean, unit variances, and a zero principal vector.
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            pca_vector: vec![0.0; dim],
            proj_mean: 0.0,
            proj_var: 0.0,
            lag_cov: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `λ̂ = |w|`.
    pub fn eigenvalue(&self) -> f64 {
        dot(&self.pca_vector, &self.pca_vector).sqrt()
    }

    /// `z = w/|w|`, `None` while `w = 0`.
    pub fn axis(&self) -> Option<Vec<f64>> {
        unit(&self.pca_vector)
    }

    /// `z`, or the first coordinate axis while `w = 0`.
    pub fn axis_or_first(&self) -> Vec<f64> {
        self.axis().unwrap_or_else(|| {
            let mut e = vec![0.0; self.dim()];
            e[0] = 1.0;
            e
        })
    }

    pub fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(&self.var)
            .chain(&self.pca_vector)
            .chain([&self.proj_mean, &self.proj_var, &self.lag_cov])
            .all(|v| v.is_finite())
    }

    /// One amnesic update from a batch of chain states.
    ///
    /// `accepted[k]` is the chain state after the transition and `starts[k]`
    /// the state it started from. All per-chain statistics are evaluated with
    /// the estimates held before this call, then averaged across chains, and
    /// every estimate `ψ` moves to `βψ + (1-β)·mean_k f_ψ`.
    pub fn update(
        &self,
        schedule: &AmnesiaSchedule,
        n: usize,
        accepted: &[Vec<f64>],
        starts: &[Vec<f64>],
        mass: &MassDiag,
    ) -> OnlineMoments {
        let proj = Projection::with_fallback(self, mass);
        let k = accepted.len();
        let mut centred = Vec::with_capacity(k);
        let mut sq_dev = Vec::with_capacity(k);
        let mut pca = Vec::with_capacity(k);
        let mut proj_sq = Vec::with_capacity(k);
        let mut proj_dev = Vec::with_capacity(k);
        let mut lag = Vec::with_capacity(k);
        for (x, x0) in accepted.iter().zip(starts) {
            let y: Vec<f64> = x
                .iter()
                .zip(&self.mean)
                .zip(mass.sqrt())
                .map(|((xi, mi), si)| si * (xi - mi))
                .collect();
            let p = proj.project(x);
            let phi = p * p;
            centred.push(x.clone());
            sq_dev.push(
                x.iter()
                    .zip(&self.mean)
                    .map(|(xi, mi)| (xi - mi).powi(2))
                    .collect(),
            );
            pca.push(y.iter().map(|yi| p * yi).collect());
            proj_sq.push(phi);
            proj_dev.push((phi - self.proj_mean).powi(2));
            lag.push((phi - self.proj_mean) * (proj.phi(x0) - self.proj_mean));
        }

        let beta = schedule.beta(n);
        let beta_w = schedule.beta_w(n);
        let blend = |old: f64, new: f64, b: f64| b * old + (1.0 - b) * new;
        let blend_vec = |old: &[f64], new: Vec<f64>, b: f64| -> Vec<f64> {
            old.iter().zip(new).map(|(o, v)| blend(*o, v, b)).collect()
        };
        OnlineMoments {
            mean: blend_vec(&self.mean, mean_rows(&centred), beta),
            var: blend_vec(&self.var, mean_rows(&sq_dev), beta),
            pca_vector: blend_vec(&self.pca_vector, mean_rows(&pca), beta_w),
            proj_mean: blend(self.proj_mean, mean(&proj_sq), beta),
            proj_var: blend(self.proj_var, mean(&proj_dev), beta),
            lag_cov: blend(self.lag_cov, mean(&lag), beta),
        }
    }
}

/// Single-sample CCIPCA step `w ← βw + (1-β) y (yᵀw)/|w|`, `y = M^{1/2}(x-m)`.
///
/// A zero `w` is seeded with `(1-β) y |y|`.
pub fn ccipca_update(w: &[f64], x: &[f64], mean: &[f64], mass: &MassDiag, beta: f64) -> Vec<f64> {
    let y: Vec<f64> = x
        .iter()
        .zip(mean)
        .zip(mass.sqrt())
        .map(|((xi, mi), si)| si * (xi - mi))
        .collect();
    let norm_w = dot(w, w).sqrt();
    if norm_w == 0.0 {
        let norm_y = dot(&y, &y).sqrt();
        return y.iter().map(|yi| (1.0 - beta) * yi * norm_y).collect();
    }
    let coef = (1.0 - beta) * dot(&y, w) / norm_w;
    w.iter()
        .zip(&y)
        .map(|(wi, yi)| beta * wi + coef * yi)
        .collect()
}

/// `M = max(s) · diag(s)^{-1}` after flooring each `s_i` at `floor · max(s)`.
pub fn compute_mass(var: &[f64], floor: f64) -> Result<MassDiag> {
    if var.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let max = var.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(MassDiag::identity(var.len()));
    }
    let lo = floor * max;
    MassDiag::new(var.iter().map(|v| max / v.max(lo)).collect())
}

/// `γ = |w|^{-1/2}`; errors while `w = 0`.
pub fn compute_damping(w: &[f64]) -> Result<f64> {
    let lambda = dot(w, w).sqrt();
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda.powf(-0.5))
    } else {
        Err(Error::UndefinedAxis)
    }
}

/// `ρ = clamp(c⁺/s₂, 0, 1)`, or `1` when `s₂` is not positive.
pub fn compute_rho(c: f64, s2: f64) -> f64 {
    if !(s2 > 0.0) || !s2.is_finite() {
        return 1.0;
    }
    (c.max(0.0) / s2).clamp(0.0, 1.0)
}
