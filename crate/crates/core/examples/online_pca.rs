// Streaming moment estimates and CCIPCA on exact Gaussian draws.
//
// Run with `cargo run --example online_pca`.

use malt::adaptation::{compute_damping, compute_mass, AmnesiaSchedule, OnlineMoments};
use malt::target::{make_target, TargetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> malt::Result<()> {
    let target = make_target(&TargetSpec::RotatedGaussian {
        spectrum: vec![9.0, 4.0, 1.0],
        rotation_seed: 11,
    })?;
    let truth = target.gaussian_moments().expect("gaussian target");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let schedule = AmnesiaSchedule::default();
    let batch = 8;

    let mut moments = OnlineMoments::new(3);
    let mut prev: Vec<Vec<f64>> = (0..batch)
        .filter_map(|_| target.sample_exact(&mut rng))
        .collect();
    for n in 1..=2000 {
        let mass = compute_mass(&moments.var, 1e-10)?;
        let draws: Vec<Vec<f64>> = (0..batch)
            .filter_map(|_| target.sample_exact(&mut rng))
            .collect();
        moments = moments.update(&schedule, n, &draws, &prev, &mass);
        prev = draws;
        if n % 500 == 0 {
            println!(
                "n {n:4}: var {:.3?}, lambda {:.3}, gamma {:.3}",
                moments.var,
                moments.eigenvalue(),
                compute_damping(&moments.pca_vector)?
            );
        }
    }
    println!("true marginal variances {:.3?}", truth.marginal_variances);
    println!("leading axis {:.3?}", moments.axis().unwrap_or_default());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("online PCA example failed");
}
