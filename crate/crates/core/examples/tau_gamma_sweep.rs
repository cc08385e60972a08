// Fixed-kernel efficiency surface over trajectory length and damping.
//
// At `τ = π` the unit-variance coordinate of the target completes half an
// oscillation, so its square barely moves without damping.
//
// Run with `cargo run --release --example tau_gamma_sweep`.

use malt::experiment::{run_sweep, ExperimentConfig};

const CONFIG: &str = r#"
[target]
kind = "diag-gaussian"
variances = [1.0, 16.0]

[run]
chains = 8
n_postadapt_warmup = 100
n_sample = 500
seed = 9

[sweep]
tau = [0.05, 1.0, 2.0, 3.14159]
gamma = [0.0, 0.5, 2.0]
step = 0.1
"#;

pub fn run_example() -> malt::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    println!(
        "{:>7} {:>5} {:>6} {:>8} {:>12}",
        "tau", "gamma", "steps", "clamped", "ESS/grad"
    );
    for row in run_sweep(&cfg)? {
        println!(
            "{:7.3} {:5.1} {:6} {:>8} {:12.5}",
            row.tau, row.gamma, row.n_steps, row.clamped, row.ess_per_grad
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("sweep example failed");
}
