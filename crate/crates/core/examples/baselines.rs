// The same tuner driving HMC and randomised HMC, next to adaptive MALT.
//
// Run with `cargo run --release --example baselines`.

use malt::diagnostics::min_ess_squared_coords;
use malt::sampler::{run_adaptive, run_baseline, KernelKind, RhoMode, RunConfig};
use malt::target::{make_target, TargetSpec};

pub fn run_example() -> malt::Result<()> {
    let target = make_target(&TargetSpec::RotatedGaussian {
        spectrum: vec![16.0, 4.0, 1.0, 1.0],
        rotation_seed: 5,
    })?;
    let base = RunConfig {
        chains: 8,
        n_adapt: 400,
        n_clip: 40,
        n_postadapt_warmup: 100,
        n_sample: 300,
        seed: 4,
        ..RunConfig::default()
    };
    let variants = [
        ("malt", KernelKind::Malt, RhoMode::Adaptive),
        ("malt rho=1", KernelKind::Malt, RhoMode::FixedOne),
        ("hmc", KernelKind::Hmc, RhoMode::Adaptive),
        ("rhmc uniform", KernelKind::RhmcUniform, RhoMode::Adaptive),
        (
            "rhmc exponential",
            KernelKind::RhmcExponential,
            RhoMode::Adaptive,
        ),
    ];
    for (name, kernel, rho_mode) in variants {
        let cfg = RunConfig {
            kernel,
            rho_mode,
            ..base.clone()
        };
        let record = if kernel == KernelKind::Malt {
            run_adaptive(&target, &cfg)?
        } else {
            run_baseline(&target, &cfg)?
        };
        let r = min_ess_squared_coords(&record)?;
        println!(
            "{name:>17}: h {:.3}, tau {:.3}, min ESS {:7.1}, ESS/grad {:.4}",
            record.final_params.step, record.final_params.length, r.min_ess, r.ess_per_grad
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("baseline example failed");
}
