// Leapfrog steps and partial velocity refreshment on a 2-D Gaussian.
//
// Run with `cargo run --example leapfrog_dynamics`.

use malt::dynamics::{leapfrog, partial_refresh, MassDiag};
use malt::target::{make_target, TargetDensity, TargetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> malt::Result<()> {
    let target = make_target(&TargetSpec::DiagGaussian {
        variances: vec![1.0, 4.0],
    })?;
    let mass = MassDiag::identity(2);
    let h = 0.2;

    let energy = |x: &[f64], v: &[f64]| target.potential(x) + 0.5 * mass.norm_sq_inv(v);
    let (x0, v0) = (vec![1.0, -0.5], vec![0.3, 0.8]);
    let mut state = leapfrog(&target, &mass, h, &x0, &v0, None)?;
    for _ in 1..20 {
        state = leapfrog(
            &target,
            &mass,
            h,
            &state.position,
            &state.velocity,
            Some(&state.gradient),
        )?;
    }
    println!(
        "after 20 steps: x = {:.4?}, v = {:.4?}",
        state.position, state.velocity
    );
    println!(
        "energy error: {:.2e}",
        energy(&state.position, &state.velocity) - energy(&x0, &v0)
    );

    // run backwards from the flipped velocity
    let mut back = leapfrog(
        &target,
        &mass,
        h,
        &state.position,
        &neg(&state.velocity),
        None,
    )?;
    for _ in 1..20 {
        back = leapfrog(
            &target,
            &mass,
            h,
            &back.position,
            &back.velocity,
            Some(&back.gradient),
        )?;
    }
    let err = back
        .position
        .iter()
        .zip(&x0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("reversibility error: {err:.1e}");

    // η = exp(-γh): η = 1 keeps v, η = 0 redraws it
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for gamma in [0.0, 1.0, 10.0] {
        let eta = (-gamma * h).exp();
        let v = partial_refresh(&v0, eta, &mass, &mut rng);
        println!("gamma {gamma:>4}: eta {eta:.3}, refreshed v = {v:.3?}");
    }
    Ok(())
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

#[allow(dead_code)]
fn main() {
    run_example().expect("leapfrog example failed");
}
