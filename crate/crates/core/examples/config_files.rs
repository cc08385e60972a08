// Driving the experiment runner from a TOML config, as the `malt` binary does.
//
// Run with `cargo run --example config_files`.

use malt::experiment::{execute, Command, ExperimentConfig};

const CONFIG: &str = r#"
[target]
kind = "standard-gaussian"
dim = 3

[run]
chains = 4
n_adapt = 200
n_clip = 20
n_postadapt_warmup = 50
n_sample = 100
seed = 5

[output]
draws = true
"#;

pub fn run_example() -> malt::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let out = std::env::temp_dir().join(format!("malt-config-example-{}", std::process::id()));
    execute(Command::Run, &cfg, &out)?;
    for name in ["trace.csv", "draws.csv", "ess.csv", "report.json"] {
        let text = std::fs::read_to_string(out.join(name))?;
        let first = text.lines().next().unwrap_or_default();
        println!(
            "{name}: {} lines, starts {:.60}",
            text.lines().count(),
            first
        );
    }
    std::fs::remove_dir_all(&out)?;

    match ExperimentConfig::from_toml_str(
        "[target]\nkind = \"standard-gaussian\"\ndim = 2\nchains = 4\n",
    ) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("config example failed");
}
