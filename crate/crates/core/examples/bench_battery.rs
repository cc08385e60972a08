// Repeated-seed comparison of the kernel battery, normalised by MALT with `ρ = 1`.
//
// Run with `cargo run --release --example bench_battery`.

use malt::experiment::{run_bench, ExperimentConfig};

const CONFIG: &str = r#"
[target]
kind = "synthetic-logistic-regression"
n_obs = 200
dim = 4
data_seed = 1

[run]
chains = 4
n_adapt = 300
n_clip = 30
n_postadapt_warmup = 50
n_sample = 200

[bench]
methods = ["malt-adaptive-rho", "malt-rho-one", "hmc"]
repeats = 3
bootstrap = 200
"#;

pub fn run_example() -> malt::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let rows = run_bench(&cfg)?;
    for r in rows.iter().filter(|r| r.row_type == "summary") {
        println!(
            "{:>18}: p10 ESS/grad {:.4} (sem {:.4}), relative {:.2}",
            r.method,
            r.pct_ess_per_grad.unwrap_or(f64::NAN),
            r.sem_ess_per_grad.unwrap_or(f64::NAN),
            r.normalized_ess_per_grad.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("bench example failed");
}
