// Autocorrelation, ESS and ESJD on AR(1) series with known answers.
//
// Run with `cargo run --release --example ess_diagnostics`.

use malt::diagnostics::{autocorrelation, default_max_lag, esjd, ess_geyer, percentile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn ar1(phi: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = (1.0 - phi * phi).sqrt();
    let mut x: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|_| {
            x = phi * x + sd * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

pub fn run_example() -> malt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 20_000;
    for phi in [-0.5, 0.0, 0.5, 0.9] {
        let x = ar1(phi, n, &mut rng);
        let acf = autocorrelation(&x, 3)?;
        let ess = ess_geyer(&x)?;
        let want = (1.0 - phi) / (1.0 + phi) * n as f64;
        println!(
            "phi {phi:>4}: acf {:.3?}, ESS {ess:8.0} (analytic {want:8.0}), ESJD {:.3}",
            acf.values,
            esjd(std::slice::from_ref(&x))?
        );
    }
    println!("default max lag for {n} draws: {}", default_max_lag(n));
    let runs = [0.8, 1.3, 0.9, 1.1, 1.0];
    println!(
        "10th percentile of {runs:?}: {:.3}",
        percentile(&runs, 10.0)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("diagnostics example failed");
}
