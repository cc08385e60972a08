//! Metropolis adjusted Langevin trajectories with adaptive tuning.
//!
//! The crate is organised bottom-up:
//!
//! * [`target`]: the density trait plus a handful of built-in targets.
//! * [`dynamics`]: leapfrog, partial velocity refresh, and the MALT, HMC and
//!   randomised HMC kernels.
//! * [`adaptation`]: Adam, amnesic moment estimates, CCIPCA and the
//!   step-size and trajectory-length gradients.
//! * [`sampler`]: the multi-chain loop tying the pieces together.
//! * [`diagnostics`]: autocorrelation, ESS, ESJD and summary statistics.
//! * [`experiment`]: config files, single runs, sweeps and benchmark batteries.
//!
//! ```no_run
//! use malt::{make_target, run_adaptive, min_ess_squared_coords, RunConfig, TargetSpec};
//!
//! let target = make_target(&TargetSpec::StandardGaussian { dim: 10 })?;
//! let record = run_adaptive(&target, &RunConfig { chains: 16, ..RunConfig::default() })?;
//! let report = min_ess_squared_coords(&record)?;
//! println!("min ESS {:.0}, per gradient {:.4}", report.min_ess, report.ess_per_grad);
//! # Ok::<(), malt::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiment;
mod reduce;
pub mod sampler;
pub mod target;

pub use diagnostics::{autocorrelation, esjd, ess_geyer, min_ess_squared_coords, EssReport};
pub use dynamics::{
    hmc_step, leapfrog, malt_step, rhmc_step, Jitter, KernelParams, MassDiag, TrajectoryOutcome,
};
pub use error::{Error, Result};
pub use sampler::{
    run, run_adaptive, run_baseline, KernelKind, RhoMode, RunConfig, RunRecord, TunerState,
};
pub use target::{check_gradient, make_target, BuiltinTarget, TargetDensity, TargetSpec};
