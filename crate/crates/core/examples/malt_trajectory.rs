// Single MALT, HMC and RHMC transitions and their energy errors.
//
// Run with `cargo run --example malt_trajectory`.

use malt::dynamics::{hmc_step, malt_step, rhmc_step, Jitter, KernelParams, MassDiag};
use malt::target::{make_target, TargetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> malt::Result<()> {
    let target = make_target(&TargetSpec::Rosenbrock {
        dim: 4,
        curvature: 5.0,
    })?;
    let params = KernelParams::new(MassDiag::identity(4), 1.0, 0.1, 1.0)?;
    let x = vec![0.5; 4];

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let o = malt_step(&x, &target, &params, &mut rng);
    println!(
        "MALT: {} steps, {} gradients, delta {:.4}, accept prob {:.3}, accepted {}",
        o.steps,
        o.gradient_evals,
        o.delta,
        o.acceptance_probability(),
        o.accepted
    );
    let sum: f64 = o.per_step_deltas.iter().sum();
    let sum_pos: f64 = o.per_step_deltas.iter().map(|d| d.max(0.0)).sum();
    println!("  sum of step errors {sum:.4}, sum of positive parts {sum_pos:.4}");

    // γ = 0 MALT and HMC consume the same random numbers
    let mut a = ChaCha8Rng::seed_from_u64(8);
    let mut b = ChaCha8Rng::seed_from_u64(8);
    let undamped = KernelParams {
        damping: 0.0,
        ..params.clone()
    };
    let same = malt_step(&x, &target, &undamped, &mut a) == hmc_step(&x, &target, &params, &mut b);
    println!("MALT with gamma = 0 equals HMC: {same}");

    for jitter in [Jitter::Uniform, Jitter::Exponential] {
        let o = rhmc_step(&x, &target, &params, jitter, &mut rng);
        println!(
            "RHMC {jitter:?}: length {:.3}, {} steps, accepted {}",
            o.length, o.steps, o.accepted
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("trajectory example failed");
}
