// Sampling a user-defined density: a two-dimensional banana.
//
// Run with `cargo run --release --example custom_target`.

use malt::diagnostics::min_ess_squared_coords;
use malt::sampler::{run_adaptive, RunConfig};
use malt::target::{check_gradient, TargetDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x₀ ~ N(0, 4)`, `x₁ | x₀ ~ N(b(x₀² - 4), 1)`.
struct Banana {
    b: f64,
}

impl TargetDensity for Banana {
    fn dim(&self) -> usize {
        2
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let r = x[1] - self.b * (x[0] * x[0] - 4.0);
        x[0] * x[0] / 8.0 + 0.5 * r * r
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let r = x[1] - self.b * (x[0] * x[0] - 4.0);
        grad[0] = x[0] / 4.0 - 2.0 * self.b * x[0] * r;
        grad[1] = r;
    }

    fn name(&self) -> &str {
        "banana"
    }
}

pub fn run_example() -> malt::Result<()> {
    let target = Banana { b: 0.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let points: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0)])
        .collect();
    let check = check_gradient(&target, &points, 1e-5);
    println!(
        "gradient check: max error {:.1e}, passed {}",
        check.max_error,
        check.passed()
    );

    let cfg = RunConfig {
        chains: 8,
        n_adapt: 500,
        n_clip: 50,
        n_postadapt_warmup: 100,
        n_sample: 400,
        seed: 1,
        ..RunConfig::default()
    };
    let record = run_adaptive(&target, &cfg)?;
    let d = &record.draws;
    let x0: Vec<f64> = (0..d.chains).flat_map(|c| d.series(c, 0)).collect();
    let var0 = x0.iter().map(|x| x * x).sum::<f64>() / x0.len() as f64;
    println!("Var(x0) estimate {var0:.2} (true 4)");
    let report = min_ess_squared_coords(&record)?;
    println!(
        "min ESS {:.0}, ESS/grad {:.4}",
        report.min_ess, report.ess_per_grad
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("custom target example failed");
}
