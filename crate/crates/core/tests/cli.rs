use std::path::Path;
use std::process::{Command as Process, Output};
use std::time::Instant;

use malt::experiment::{execute, Command, ExperimentConfig};

const MINIMAL: &str = r#"
[target]
kind = "standard-gaussian"
dim = 3

[run]
chains = 4
n_adapt = 100
n_clip = 10
n_postadapt_warmup = 20
n_sample = 50
seed = 8

[output]
draws = true
"#;

fn malt(args: &[&str]) -> Output {
    Process::new(env!("CARGO_BIN_EXE_malt"))
        .args(args)
        .output()
        .expect("binary should start")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// report.json with the wall-clock field removed.
fn report_without_runtime(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&read(&dir.join("report.json"))).unwrap();
    assert!(v["runtime_secs"].is_f64());
    v.as_object_mut().unwrap().remove("runtime_secs");
    v
}

#[test]
fn minimal_run_emits_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let start = Instant::now();
    let status = malt(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(start.elapsed().as_secs() < 10);
    for name in ["trace.csv", "draws.csv", "report.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let trace = read(&out.join("trace.csv"));
    assert!(trace.starts_with(
        "iteration,phase,step,length,realized_length,n_steps,damping,eta,eigenvalue,rho,acceptance"
    ));
    assert_eq!(trace.lines().count(), 171);
}

#[test]
fn repeated_runs_match_apart_from_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert!(malt(&[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--quiet"
        ])
        .status
        .success());
    }
    assert_eq!(report_without_runtime(&a), report_without_runtime(&b));
    for name in ["trace.csv", "draws.csv", "ess.csv"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name}");
    }
}

#[test]
fn unknown_key_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &MINIMAL.replace("n_sample = 50", "n_samples = 50"),
    );
    let out = malt(&[
        "run",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples"));
}

#[test]
fn missing_config_and_sweep_section_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = malt(&[
        "run",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let config = write_config(dir.path(), MINIMAL);
    let out = malt(&[
        "sweep",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_abort_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!("{MINIMAL}\n").replace("seed = 8", "seed = 8\ninit_scale = 1e200"),
    );
    let out_dir = dir.path().join("o");
    let out = malt(&[
        "run",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out_dir.join("abort.json").exists());
}

/// The binary and the library call write identical files.
fn assert_same_as_library(command: Command, sub: &str, text: &str, files: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), text);
    let bin_out = dir.path().join("bin");
    let lib_out = dir.path().join("lib");
    let status = malt(&[
        sub,
        "--config",
        &config,
        "--out",
        bin_out.to_str().unwrap(),
        "--seed",
        "21",
        "--quiet",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    let mut cfg = ExperimentConfig::load(Path::new(&config)).unwrap();
    cfg.run.seed = 21;
    execute(command, &cfg, &lib_out).unwrap();
    for name in files {
        assert_eq!(
            read(&bin_out.join(name)),
            read(&lib_out.join(name)),
            "{name}"
        );
    }
}

#[test]
fn run_matches_library_call() {
    assert_same_as_library(
        Command::Run,
        "run",
        MINIMAL,
        &["trace.csv", "draws.csv", "ess.csv"],
    );
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("o");
    assert!(malt(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "21",
        "--quiet"
    ])
    .status
    .success());
    assert_eq!(report_without_runtime(&out)["seed"], 21);
}

#[test]
fn sweep_matches_library_call() {
    let text = format!("{MINIMAL}\n[sweep]\ntau = [0.5, 1.0]\ngamma = [0.0, 1.0]\nstep = 0.25\n");
    assert_same_as_library(Command::Sweep, "sweep", &text, &["surface.csv"]);
}

#[test]
fn bench_matches_library_call() {
    let text = format!("{MINIMAL}\n[bench]\nmethods = [\"malt-rho-one\", \"rhmc-uniform\"]\nrepeats = 2\nbootstrap = 20\n");
    assert_same_as_library(Command::Bench, "bench", &text, &["bench.csv"]);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["run.toml", "sweep.toml", "bench.toml"] {
        ExperimentConfig::load(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
