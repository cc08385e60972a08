//! Multi-chain adaptive sampler.
//!
//! Every iteration runs one kernel call per chain in parallel, reduces the
//! per-chain statistics in a fixed order, and then applies a single serial
//! tuner update. A run has three phases: `n_adapt` adaptive iterations
//! (the first `n_clip` of them with `τ = h`), `n_postadapt_warmup` frozen
//! iterations, and `n_sample` frozen iterations whose draws are stored.
//!
//! Random streams are a pure function of `(seed, chain, iteration)`, so a run
//! is reproducible bit-for-bit regardless of the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{
    adam_update, compute_damping, compute_mass, compute_rho, AdamConfig, AdamState,
    AmnesiaSchedule, LengthGradientTerms, OnlineMoments, Projection,
};
use crate::dynamics::{hmc_step, malt_step, Jitter, KernelParams, TrajectoryOutcome};
use crate::error::{Error, Result};
use crate::reduce::{mean, pairwise_sum};
use crate::target::TargetDensity;

/// Transition kernel driven by the tuner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Malt,
    Hmc,
    RhmcUniform,
    RhmcExponential,
}

impl KernelKind {
    fn jitter(self) -> Option<Jitter> {
        match self {
            KernelKind::RhmcUniform => Some(Jitter::Uniform),
            KernelKind::RhmcExponential => Some(Jitter::Exponential),
            _ => None,
        }
    }

    fn refreshes(self) -> bool {
        self == KernelKind::Malt
    }
}

/// How `ρ` in the trajectory-length criterion is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMode {
    /// `ρ = c⁺/s₂`, the estimated lag-one autocorrelation of `φ`.
    Adaptive,
    /// `ρ ≡ 1`, i.e. maximise `ESJD/τ`.
    FixedOne,
}

/// Cross-chain average of acceptance probabilities for the step-size gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptanceMean {
    Arithmetic,
    Harmonic,
}

/// Run configuration. Defaults follow the many-chain experimental setup.
///
/// With `chains = 1` the same code path is used; a single chain needs a lower
/// learning rate and more adaptation, see [`RunConfig::single_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chains: usize,
    pub n_adapt: usize,
    /// Adaptive iterations at the start that force `τ = h`.
    pub n_clip: usize,
    pub n_postadapt_warmup: usize,
    pub n_sample: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    pub rho_mode: RhoMode,
    pub acceptance_mean: AcceptanceMean,
    /// Target acceptance rate `α*`.
    pub target_acceptance: f64,
    pub adam: AdamConfig,
    pub amnesia: AmnesiaSchedule,
    /// Initial step size; defaults to `0.5 · d^{-1/4}`.
    pub initial_step: Option<f64>,
    /// Initial trajectory length; defaults to the initial step.
    pub initial_length: Option<f64>,
    /// Fixed damping. When set, damping is not adapted.
    pub damping: Option<f64>,
    /// Damping used while the principal vector is still zero.
    pub damping_fallback: f64,
    /// Variances are floored at `variance_floor · max(s)` before computing the mass.
    pub variance_floor: f64,
    /// `τ` is clamped to `[h, max_length_ratio · h]`.
    pub max_length_ratio: f64,
    /// Chains start at `init_scale · N(0, I)`.
    pub init_scale: f64,
    /// Coordinates stored during sampling; all when `None`.
    pub store_coords: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chains: 128,
            n_adapt: 5000,
            n_clip: 100,
            n_postadapt_warmup: 400,
            n_sample: 1600,
            seed: 0,
            kernel: KernelKind::Malt,
            rho_mode: RhoMode::Adaptive,
            acceptance_mean: AcceptanceMean::Arithmetic,
            target_acceptance: 0.8,
            adam: AdamConfig::default(),
            amnesia: AmnesiaSchedule::default(),
            initial_step: None,
            initial_length: None,
            damping: None,
            damping_fallback: 1.0,
            variance_floor: 1e-10,
            max_length_ratio: 1e6,
            init_scale: 1.0,
            store_coords: None,
        }
    }
}

impl RunConfig {
    /// Single-chain preset: one chain, learning rate 0.01, four times the adaptation.
    pub fn single_chain(mut self) -> Self {
        self.chains = 1;
        self.adam.learning_rate = 0.01;
        self.n_adapt *= 4;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if self.n_clip > self.n_adapt {
            return bad(format!(
                "n_clip ({}) must not exceed n_adapt ({})",
                self.n_clip, self.n_adapt
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!(
                "target_acceptance must lie in (0, 1) (got {})",
                self.target_acceptance
            ));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.epsilon > 0.0)
        {
            return bad(format!("invalid adam settings {a:?}"));
        }
        if !(self.amnesia.a > 1.0 && self.amnesia.a_w > 1.0) {
            return bad(format!(
                "amnesia parameters must exceed 1 ({:?})",
                self.amnesia
            ));
        }
        for (name, v) in [
            ("initial_step", self.initial_step),
            ("initial_length", self.initial_length),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{name} must be positive (got {v})"));
                }
            }
        }
        if let Some(g) = self.damping {
            if !(g.is_finite() && g >= 0.0) {
                return bad(format!("damping must be non-negative (got {g})"));
            }
        }
        if !(self.damping_fallback.is_finite() && self.damping_fallback >= 0.0) {
            return bad("damping_fallback must be non-negative".into());
        }
        if !(self.variance_floor >= 0.0 && self.variance_floor < 1.0) {
            return bad("variance_floor must lie in [0, 1)".into());
        }
        if !(self.max_length_ratio >= 1.0) {
            return bad("max_length_ratio must be at least 1".into());
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return bad("init_scale must be positive".into());
        }
        Ok(())
    }
}

const RESERVED: u64 = u32::MAX as u64;

/// Random stream for `(seed, chain, iteration)`.
///
/// Chain index `u32::MAX` is reserved for draws shared by all chains and
/// iteration `u32::MAX` for initialisation.
pub fn chain_rng(seed: u64, chain: usize, iteration: usize) -> ChaCha8Rng {
    debug_assert!((chain as u64) <= RESERVED && (iteration as u64) <= RESERVED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((chain as u64) << 32) | iteration as u64);
    rng
}

fn shared_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    chain_rng(seed, RESERVED as usize, iteration)
}

/// Chain positions plus the seed their streams derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnsemble {
    pub positions: Vec<Vec<f64>>,
    pub seed: u64,
    pub iteration: usize,
}

/// Draws `chains` starting points from `init_scale · N(0, I)`.
pub fn initialize_chains<T: TargetDensity + ?Sized>(
    target: &T,
    config: &RunConfig,
) -> ChainEnsemble {
    let d = target.dim();
    let positions = (0..config.chains)
        .map(|k| {
            let mut rng = chain_rng(config.seed, k, RESERVED as usize);
            (0..d)
                .map(|_| config.init_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    ChainEnsemble {
        positions,
        seed: config.seed,
        iteration: 0,
    }
}

/// All adaptation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerState {
    pub moments: OnlineMoments,
    pub log_step: AdamState,
    pub log_length: AdamState,
    /// Adaptive iterations completed.
    pub iteration: usize,
}

impl TunerState {
    pub fn new(dim: usize, step: f64, length: f64) -> Self {
        Self {
            moments: OnlineMoments::new(dim),
            log_step: AdamState::new(step.ln()),
            log_length: AdamState::new(length.ln()),
            iteration: 0,
        }
    }

    pub fn step(&self) -> f64 {
        self.log_step.theta.exp()
    }

    pub fn length(&self) -> f64 {
        self.log_length.theta.exp()
    }

    fn is_finite(&self) -> bool {
        self.moments.is_finite()
            && [self.log_step, self.log_length]
                .iter()
                .all(|a| a.theta.is_finite() && a.m.is_finite() && a.s.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Adapt,
    Warmup,
    Sample,
}

/// Per-iteration snapshot of the kernel parameters and tuner signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// One-based iteration index across all phases.
    pub iteration: usize,
    pub phase: Phase,
    pub step: f64,
    /// Trajectory length parameter `τ`.
    pub length: f64,
    /// Length actually integrated (differs from `length` under jitter).
    pub realized_length: f64,
    pub n_steps: usize,
    pub damping: f64,
    pub eta: f64,
    /// `λ̂ = |w|`.
    pub eigenvalue: f64,
    pub rho: f64,
    /// Cross-chain mean of `exp(-Δ⁺)`.
    pub acceptance: f64,
    /// Fraction of chains that accepted.
    pub accept_rate: f64,
    /// Step-size gradient; `None` outside adaptation.
    pub grad_step: Option<f64>,
    /// Trajectory-length gradient; `None` outside adaptation.
    pub grad_length: Option<f64>,
}

/// Stored sampling-phase draws, laid out `[chain][iteration][coord]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draws {
    pub chains: usize,
    pub iterations: usize,
    /// Target coordinates that were kept.
    pub coords: Vec<usize>,
    pub values: Vec<f64>,
}

impl Draws {
    fn new(chains: usize, iterations: usize, coords: Vec<usize>) -> Self {
        Self {
            chains,
            iterations,
            values: Vec::with_capacity(chains * iterations * coords.len()),
            coords,
        }
    }

    pub fn get(&self, chain: usize, iteration: usize, slot: usize) -> f64 {
        let w = self.coords.len();
        self.values[(chain * self.iterations + iteration) * w + slot]
    }

    /// Series of stored coordinate `slot` for one chain.
    pub fn series(&self, chain: usize, slot: usize) -> Vec<f64> {
        (0..self.iterations)
            .map(|t| self.get(chain, t, slot))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.chains * self.iterations
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trace: Vec<IterationTrace>,
    pub draws: Draws,
    /// Energy errors of the sampling phase, `[iteration][chain]`.
    pub sample_deltas: Vec<f64>,
    pub gradient_evals_total: u64,
    pub gradient_evals_sampling: u64,
    pub final_params: KernelParams,
    pub final_tuner: TunerState,
    pub final_positions: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn chains(&self) -> usize {
        self.draws.chains
    }

    pub fn sample_trace(&self) -> impl Iterator<Item = &IterationTrace> {
        self.trace.iter().filter(|t| t.phase == Phase::Sample)
    }
}

/// Runs adaptive MALT.
pub fn run_adaptive<T: TargetDensity + ?Sized>(
    target: &T,
    config: &RunConfig,
) -> Result<RunRecord> {
    if config.kernel != KernelKind::Malt {
        return Err(Error::InvalidParameter(format!(
            "run_adaptive drives MALT; use run_baseline for {:?}",
            config.kernel
        )));
    }
    run(target, config)
}

/// Runs the same tuner with an HMC or RHMC kernel.
pub fn run_baseline<T: TargetDensity + ?Sized>(
    target: &T,
    config: &RunConfig,
) -> Result<RunRecord> {
    if config.kernel == KernelKind::Malt {
        return Err(Error::InvalidParameter(
            "run_baseline expects an hmc or rhmc kernel".into(),
        ));
    }
    run(target, config)
}

struct Sampler<'a, T: ?Sized> {
    target: &'a T,
    config: &'a RunConfig,
    tuner: TunerState,
    positions: Vec<Vec<f64>>,
    trace: Vec<IterationTrace>,
    gradient_evals: u64,
}

/// Parameters in force for one iteration.
struct IterationParams {
    kernel: KernelParams,
    rho: f64,
}

impl<'a, T: TargetDensity + ?Sized> Sampler<'a, T> {
    fn params(&self, n: usize) -> Result<IterationParams> {
        let cfg = self.config;
        let moments = &self.tuner.moments;
        let mass = compute_mass(&moments.var, cfg.variance_floor)
            .map_err(|_| self.abort(n, "non-finite variance estimate"))?;
        let damping = if !cfg.kernel.refreshes() {
            0.0
        } else if let Some(g) = cfg.damping {
            g
        } else {
            compute_damping(&moments.pca_vector).unwrap_or(cfg.damping_fallback)
        };
        let step = self.tuner.step();
        let length = if n <= cfg.n_clip {
            step
        } else {
            self.tuner.length()
        };
        let rho = match cfg.rho_mode {
            RhoMode::Adaptive => compute_rho(moments.lag_cov, moments.proj_var),
            RhoMode::FixedOne => 1.0,
        };
        Ok(IterationParams {
            kernel: KernelParams {
                mass,
                damping,
                step,
                length,
            },
            rho,
        })
    }

    fn abort(&self, iteration: usize, reason: &str) -> Error {
        Error::Aborted {
            iteration,
            reason: reason.to_string(),
            snapshot: serde_json::to_string(&self.tuner).unwrap_or_default(),
        }
    }

    /// Runs every chain once from the current positions.
    fn transition(&self, n: usize, params: &KernelParams) -> (Vec<TrajectoryOutcome>, f64) {
        let seed = self.config.seed;
        let kernel = self.config.kernel;
        let kernel_params = match kernel.jitter() {
            // one jittered length shared across chains
            Some(j) => KernelParams {
                length: j.sample_length(params.length, params.step, &mut shared_rng(seed, n)),
                ..params.clone()
            },
            None => params.clone(),
        };
        let outcomes = self
            .positions
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let mut rng = chain_rng(seed, k, n);
                if kernel.refreshes() {
                    malt_step(x, self.target, &kernel_params, &mut rng)
                } else {
                    hmc_step(x, self.target, &kernel_params, &mut rng)
                }
            })
            .collect();
        (outcomes, kernel_params.length)
    }

    fn acceptance_mean(&self, probs: &[f64]) -> f64 {
        match self.config.acceptance_mean {
            AcceptanceMean::Arithmetic => mean(probs),
            AcceptanceMean::Harmonic => {
                if probs.iter().any(|p| *p <= 0.0) {
                    0.0
                } else {
                    let inv: Vec<f64> = probs.iter().map(|p| 1.0 / p).collect();
                    probs.len() as f64 / pairwise_sum(&inv)
                }
            }
        }
    }

    fn iterate(
        &mut self,
        n: usize,
        phase: Phase,
        draws: Option<&mut Draws>,
        deltas: &mut Vec<f64>,
    ) -> Result<()> {
        let cfg = self.config;
        let IterationParams {
            kernel: params,
            rho,
        } = self.params(n)?;
        let (outcomes, realized_length) = self.transition(n, &params);

        let probs: Vec<f64> = outcomes
            .iter()
            .map(|o| o.acceptance_probability())
            .collect();
        let accept_rate =
            outcomes.iter().filter(|o| o.accepted).count() as f64 / outcomes.len() as f64;
        self.gradient_evals += outcomes
            .iter()
            .map(|o| o.gradient_evals as u64)
            .sum::<u64>();

        let mut grad_step = None;
        let mut grad_length = None;
        if phase == Phase::Adapt {
            let g_h = self.acceptance_mean(&probs) - cfg.target_acceptance;
            let proj = Projection::with_fallback(&self.tuner.moments, &params.mass);
            // jittered lengths scale the derivative by τ′/τ
            let weight = realized_length / params.length;
            let per_chain: Vec<f64> = outcomes
                .iter()
                .map(|o| {
                    let terms = LengthGradientTerms::from_outcome(&proj, &params.mass, o);
                    weight * terms.derivative - (1.0 + rho) / (2.0 * params.length) * terms.jump_sq
                })
                .collect();
            let g_tau = mean(&per_chain);
            if !g_h.is_finite() || !g_tau.is_finite() {
                return Err(self.abort(n, "non-finite adaptation gradient"));
            }

            let tuner = &mut self.tuner;
            tuner.log_length.theta = params.length.ln();
            tuner.log_step = adam_update(&tuner.log_step, g_h, &cfg.adam);
            tuner.log_length = adam_update(&tuner.log_length, g_tau, &cfg.adam);
            let h = tuner.step();
            let tau = tuner.length().clamp(h, cfg.max_length_ratio * h);
            tuner.log_length.theta = tau.ln();

            let accepted: Vec<Vec<f64>> = outcomes
                .iter()
                .map(|o| o.accepted_position.clone())
                .collect();
            let starts: Vec<Vec<f64>> = outcomes.iter().map(|o| o.start_position.clone()).collect();
            tuner.moments = tuner
                .moments
                .update(&cfg.amnesia, n, &accepted, &starts, &params.mass);
            tuner.iteration = n;
            if !tuner.is_finite() {
                return Err(self.abort(n, "non-finite tuner state"));
            }
            grad_step = Some(g_h);
            grad_length = Some(g_tau);
        }

        if let Some(draws) = draws {
            for o in &outcomes {
                draws
                    .values
                    .extend(draws.coords.iter().map(|&j| o.accepted_position[j]));
            }
            deltas.extend(outcomes.iter().map(|o| o.delta));
        }

        self.trace.push(IterationTrace {
            iteration: n,
            phase,
            step: params.step,
            length: params.length,
            realized_length,
            n_steps: crate::dynamics::n_steps(realized_length, params.step),
            damping: params.damping,
            eta: params.eta(),
            eigenvalue: self.tuner.moments.eigenvalue(),
            rho,
            acceptance: mean(&probs),
            accept_rate,
            grad_step,
            grad_length,
        });
        for (x, o) in self.positions.iter_mut().zip(outcomes) {
            *x = o.accepted_position;
        }
        Ok(())
    }
}

/// Runs the configured kernel through all three phases.
pub fn run<T: TargetDensity + ?Sized>(target: &T, config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let d = target.dim();
    let coords = match &config.store_coords {
        Some(c) => {
            if let Some(bad) = c.iter().find(|j| **j >= d) {
                return Err(Error::InvalidParameter(format!(
                    "stored coordinate {bad} out of range for dimension {d}"
                )));
            }
            c.clone()
        }
        None => (0..d).collect(),
    };
    let step = config.initial_step.unwrap_or(0.5 * (d as f64).powf(-0.25));
    let length = config.initial_length.unwrap_or(step);
    let ensemble = initialize_chains(target, config);

    let mut sampler = Sampler {
        target,
        config,
        tuner: TunerState::new(d, step, length),
        positions: ensemble.positions,
        trace: Vec::with_capacity(config.n_adapt + config.n_postadapt_warmup + config.n_sample),
        gradient_evals: 0,
    };
    let mut scratch = Vec::new();
    for n in 1..=config.n_adapt {
        sampler.iterate(n, Phase::Adapt, None, &mut scratch)?;
    }
    let warm_end = config.n_adapt + config.n_postadapt_warmup;
    for n in config.n_adapt + 1..=warm_end {
        sampler.iterate(n, Phase::Warmup, None, &mut scratch)?;
    }
    let before_sampling = sampler.gradient_evals;
    let mut draws = Draws::new(config.chains, config.n_sample, coords);
    let mut sample_deltas = Vec::with_capacity(config.chains * config.n_sample);
    for n in warm_end + 1..=warm_end + config.n_sample {
        sampler.iterate(n, Phase::Sample, Some(&mut draws), &mut sample_deltas)?;
    }
    // draws were appended iteration-major; store them chain-major
    let w = draws.coords.len();
    let k = config.chains;
    let mut values = vec![0.0; draws.values.len()];
    for t in 0..config.n_sample {
        for c in 0..k {
            let src = (t * k + c) * w;
            let dst = (c * config.n_sample + t) * w;
            values[dst..dst + w].copy_from_slice(&draws.values[src..src + w]);
        }
    }
    draws.values = values;

    let final_params = sampler.params(config.n_adapt + 1)?.kernel;
    Ok(RunRecord {
        trace: sampler.trace,
        draws,
        sample_deltas,
        gradient_evals_sampling: sampler.gradient_evals - before_sampling,
        gradient_evals_total: sampler.gradient_evals,
        final_params,
        final_tuner: sampler.tuner,
        final_positions: sampler.positions,
    })
}
