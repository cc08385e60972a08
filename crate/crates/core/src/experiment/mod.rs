//! Config-driven experiments: single runs, `(τ, γ)` sweeps and benchmark batteries.
//!
//! Every command writes into an output directory:
//!
//! | command | files |
//! |---------|-------|
//! | run     | `trace.csv`, `report.json`, `ess.csv`, optionally `draws.csv` |
//! | sweep   | `surface.csv` |
//! | bench   | `bench.csv` |
//!
//! A run that aborts on a non-finite tuner state writes `abort.json` instead.
//! Files are written to a temporary name and renamed into place.

pub mod config;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{BenchConfig, ExperimentConfig, Method, OutputConfig, Preset, SweepConfig};

use crate::diagnostics::{bootstrap_sem, min_ess_squared_coords, percentile, EssReport};
use crate::error::{Error, Result};
use crate::sampler::{run, KernelKind, RhoMode, RunConfig, RunRecord};
use crate::target::{make_target, BuiltinTarget, TargetDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Bench,
}

/// Runs `command` and writes its files into `out_dir`.
pub fn execute(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let result = match command {
        Command::Run => cmd_run(cfg, out_dir),
        Command::Sweep => cmd_sweep(cfg, out_dir),
        Command::Bench => cmd_bench(cfg, out_dir),
    };
    if let Err(Error::Aborted {
        iteration,
        reason,
        snapshot,
    }) = &result
    {
        let dump = serde_json::json!({
            "iteration": iteration,
            "reason": reason,
            "tuner": serde_json::from_str::<serde_json::Value>(snapshot).unwrap_or_default(),
        });
        write_atomic(&out_dir.join("abort.json"), format!("{dump}\n").as_bytes())?;
    }
    result
}

/// Summary written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub target: String,
    pub dim: usize,
    pub kernel: KernelKind,
    pub seed: u64,
    pub chains: usize,
    pub step: f64,
    pub length: f64,
    pub damping: f64,
    pub mass: Vec<f64>,
    /// Mean acceptance probability over the sampling phase.
    pub acceptance: f64,
    pub gradient_evals_total: u64,
    pub gradient_evals_sampling: u64,
    pub ess: EssReport,
    /// Wall-clock seconds; the only field that differs between identical runs.
    pub runtime_secs: f64,
}

/// Record plus summary for one configured run.
pub struct RunOutput {
    pub record: RunRecord,
    pub summary: RunSummary,
}

/// Runs the configured sampler and summarises it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let target = make_target(&cfg.target)?;
    let run_cfg = cfg.effective_run();
    let start = Instant::now();
    let record = run(&target, &run_cfg)?;
    let ess = min_ess_squared_coords(&record)?;
    let runtime_secs = start.elapsed().as_secs_f64();
    let summary = summarise(&target, &run_cfg, &record, ess, runtime_secs);
    Ok(RunOutput { record, summary })
}

fn summarise(
    target: &BuiltinTarget,
    run_cfg: &RunConfig,
    record: &RunRecord,
    ess: EssReport,
    runtime_secs: f64,
) -> RunSummary {
    let acc: Vec<f64> = record.sample_trace().map(|t| t.acceptance).collect();
    RunSummary {
        target: target.name().to_string(),
        dim: target.dim(),
        kernel: run_cfg.kernel,
        seed: run_cfg.seed,
        chains: run_cfg.chains,
        step: record.final_params.step,
        length: record.final_params.length,
        damping: record.final_params.damping,
        mass: record.final_params.mass.entries().to_vec(),
        acceptance: acc.iter().sum::<f64>() / acc.len().max(1) as f64,
        gradient_evals_total: record.gradient_evals_total,
        gradient_evals_sampling: record.gradient_evals_sampling,
        ess,
        runtime_secs,
    }
}

pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let out = run_experiment(cfg)?;
    write_trace(&out_dir.join("trace.csv"), &out.record)?;
    if cfg.output.draws {
        write_draws(&out_dir.join("draws.csv"), &out.record)?;
    }
    write_ess(&out_dir.join("ess.csv"), &out.summary.ess)?;
    let line = serde_json::to_string(&out.summary)?;
    write_atomic(&out_dir.join("report.json"), format!("{line}\n").as_bytes())?;
    log::info!(
        "min ESS {:.1} (coordinate {}), ESS/grad {:.3e}, {:.2}s",
        out.summary.ess.min_ess,
        out.summary.ess.min_coord,
        out.summary.ess.ess_per_grad,
        out.summary.runtime_secs
    );
    Ok(())
}

/// One `(τ, γ)` cell of a sweep, averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub tau: f64,
    pub gamma: f64,
    pub step: f64,
    pub n_steps: usize,
    /// Set when `τ < h`, so the trajectory was clamped to one step.
    pub clamped: bool,
    pub min_ess: f64,
    pub ess_per_grad: f64,
    pub ess_per_iter: f64,
    pub acceptance: f64,
}

/// Fixed-kernel settings for one sweep cell.
pub fn sweep_cell_config(
    base: &RunConfig,
    step: f64,
    tau: f64,
    gamma: f64,
    seed: u64,
) -> RunConfig {
    RunConfig {
        kernel: KernelKind::Malt,
        n_adapt: 0,
        n_clip: 0,
        initial_step: Some(step),
        initial_length: Some(tau),
        damping: Some(gamma),
        seed,
        ..base.clone()
    }
}

/// Evaluates every cell of the sweep grid, `τ` major.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SurfaceRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
    let target = make_target(&cfg.target)?;
    let base = cfg.effective_run();
    let cells: Vec<(f64, f64)> = sweep
        .tau
        .iter()
        .flat_map(|&t| sweep.gamma.iter().map(move |&g| (t, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(tau, gamma)| {
            let mut rows = Vec::with_capacity(sweep.repeats);
            for r in 0..sweep.repeats {
                let run_cfg =
                    sweep_cell_config(&base, sweep.step, tau, gamma, base.seed + r as u64);
                let record = run(&target, &run_cfg)?;
                let ess = min_ess_squared_coords(&record)?;
                let acc: Vec<f64> = record.sample_trace().map(|t| t.acceptance).collect();
                rows.push([
                    ess.min_ess,
                    ess.ess_per_grad,
                    ess.ess_per_iter,
                    acc.iter().sum::<f64>() / acc.len() as f64,
                ]);
            }
            let avg = |i: usize| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64;
            log::info!("cell tau={tau} gamma={gamma}: ESS/grad {:.3e}", avg(1));
            Ok(SurfaceRow {
                tau,
                gamma,
                step: sweep.step,
                n_steps: crate::dynamics::n_steps(tau, sweep.step),
                clamped: tau < sweep.step,
                min_ess: avg(0),
                ess_per_grad: avg(1),
                ess_per_iter: avg(2),
                acceptance: avg(3),
            })
        })
        .collect()
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let rows = run_sweep(cfg)?;
    write_csv(&out_dir.join("surface.csv"), &rows)
}

/// A `bench.csv` row. Raw rows carry one seed's metrics; summary rows carry
/// the percentile across seeds, its bootstrap standard error, and the
/// percentile divided by that of `malt-rho-one`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub row_type: &'static str,
    pub method: &'static str,
    pub seed: Option<u64>,
    pub min_ess: Option<f64>,
    pub ess_per_grad: Option<f64>,
    pub ess_per_iter: Option<f64>,
    pub acceptance: Option<f64>,
    pub pct_ess_per_grad: Option<f64>,
    pub sem_ess_per_grad: Option<f64>,
    pub pct_ess_per_iter: Option<f64>,
    pub sem_ess_per_iter: Option<f64>,
    pub normalized_ess_per_grad: Option<f64>,
    pub normalized_ess_per_iter: Option<f64>,
}

impl BenchRow {
    fn empty(row_type: &'static str, method: Method) -> Self {
        Self {
            row_type,
            method: method.name(),
            seed: None,
            min_ess: None,
            ess_per_grad: None,
            ess_per_iter: None,
            acceptance: None,
            pct_ess_per_grad: None,
            sem_ess_per_grad: None,
            pct_ess_per_iter: None,
            sem_ess_per_iter: None,
            normalized_ess_per_grad: None,
            normalized_ess_per_iter: None,
        }
    }
}

/// Run settings for one benchmark method.
pub fn method_config(base: &RunConfig, method: Method, seed: u64) -> RunConfig {
    let (kernel, rho_mode) = match method {
        Method::MaltAdaptiveRho => (KernelKind::Malt, RhoMode::Adaptive),
        Method::MaltRhoOne => (KernelKind::Malt, RhoMode::FixedOne),
        Method::RhmcUniform => (KernelKind::RhmcUniform, base.rho_mode),
        Method::RhmcExponential => (KernelKind::RhmcExponential, base.rho_mode),
        Method::Hmc => (KernelKind::Hmc, base.rho_mode),
    };
    RunConfig {
        kernel,
        rho_mode,
        seed,
        ..base.clone()
    }
}

/// Runs the benchmark battery; raw rows for every method come first, then summaries.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let default_bench = BenchConfig::default();
    let bench = cfg.bench.as_ref().unwrap_or(&default_bench);
    let target = make_target(&cfg.target)?;
    let base = cfg.effective_run();

    let mut raw = Vec::new();
    let mut per_method = Vec::new();
    for &method in &bench.methods {
        let mut grads = Vec::with_capacity(bench.repeats);
        let mut iters = Vec::with_capacity(bench.repeats);
        for r in 0..bench.repeats {
            let seed = base.seed + r as u64;
            let record = run(&target, &method_config(&base, method, seed))?;
            let ess = min_ess_squared_coords(&record)?;
            let acc: Vec<f64> = record.sample_trace().map(|t| t.acceptance).collect();
            log::info!(
                "{} seed {seed}: ESS/grad {:.3e}",
                method.name(),
                ess.ess_per_grad
            );
            grads.push(ess.ess_per_grad);
            iters.push(ess.ess_per_iter);
            raw.push(BenchRow {
                seed: Some(seed),
                min_ess: Some(ess.min_ess),
                ess_per_grad: Some(ess.ess_per_grad),
                ess_per_iter: Some(ess.ess_per_iter),
                acceptance: Some(acc.iter().sum::<f64>() / acc.len() as f64),
                ..BenchRow::empty("raw", method)
            });
        }
        per_method.push((method, grads, iters));
    }

    let p = bench.percentile;
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    let mut summaries = Vec::new();
    for (method, grads, iters) in &per_method {
        let mut row = BenchRow::empty("summary", *method);
        row.pct_ess_per_grad = Some(percentile(grads, p)?);
        row.pct_ess_per_iter = Some(percentile(iters, p)?);
        row.sem_ess_per_grad = Some(bootstrap_sem(grads, bench.bootstrap, &mut rng, |s| {
            percentile(s, p)
        })?);
        row.sem_ess_per_iter = Some(bootstrap_sem(iters, bench.bootstrap, &mut rng, |s| {
            percentile(s, p)
        })?);
        summaries.push(row);
    }
    let reference = summaries
        .iter()
        .find(|r| r.method == Method::MaltRhoOne.name())
        .map(|r| (r.pct_ess_per_grad.unwrap(), r.pct_ess_per_iter.unwrap()));
    if let Some((g, i)) = reference {
        for row in &mut summaries {
            row.normalized_ess_per_grad = Some(row.pct_ess_per_grad.unwrap() / g);
            row.normalized_ess_per_iter = Some(row.pct_ess_per_iter.unwrap() / i);
        }
    }
    raw.extend(summaries);
    Ok(raw)
}

pub fn cmd_bench(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let rows = run_bench(cfg)?;
    write_csv(&out_dir.join("bench.csv"), &rows)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Per-iteration trace, one row per iteration.
pub fn write_trace(path: &Path, record: &RunRecord) -> Result<()> {
    write_csv(path, &record.trace)
}

/// Sampling-phase draws: `chain, iteration, x<j>...` for each stored coordinate `j`.
pub fn write_draws(path: &Path, record: &RunRecord) -> Result<()> {
    let d = &record.draws;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(d.coords.iter().map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for c in 0..d.chains {
        for t in 0..d.iterations {
            let mut row = vec![c.to_string(), t.to_string()];
            row.extend((0..d.coords.len()).map(|s| d.get(c, t, s).to_string()));
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

#[derive(Serialize)]
struct EssRow {
    kind: &'static str,
    coord: usize,
    ess: f64,
    ess_per_grad: f64,
    ess_per_iter: f64,
}

/// One row per coordinate followed by a `min` summary row.
pub fn write_ess(path: &Path, report: &EssReport) -> Result<()> {
    let draws = (report.chains * report.n_draws) as f64;
    let grads = report.gradient_evals as f64;
    let mut rows: Vec<EssRow> = report
        .coords
        .iter()
        .zip(&report.ess)
        .map(|(&coord, &ess)| EssRow {
            kind: "coord",
            coord,
            ess,
            ess_per_grad: ess / grads,
            ess_per_iter: ess / draws,
        })
        .collect();
    rows.push(EssRow {
        kind: "min",
        coord: report.min_coord,
        ess: report.min_ess,
        ess_per_grad: report.ess_per_grad,
        ess_per_iter: report.ess_per_iter,
    });
    write_csv(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        let text = format!(
            "[target]\nkind = \"standard-gaussian\"\ndim = 2\n\
             [run]\nchains = 4\nn_adapt = 40\nn_clip = 5\nn_postadapt_warmup = 10\nn_sample = 40\nseed = 1\n{extra}"
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
        csv::Reader::from_path(path)
            .unwrap()
            .records()
            .map(|r| r.unwrap())
            .collect()
    }

    #[test]
    fn run_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[output]\ndraws = true\n");
        execute(Command::Run, &c, dir.path()).unwrap();
        assert_eq!(read_rows(&dir.path().join("trace.csv")).len(), 90);
        assert_eq!(read_rows(&dir.path().join("draws.csv")).len(), 160);
        let ess = read_rows(&dir.path().join("ess.csv"));
        assert_eq!(ess.len(), 3);
        assert_eq!(&ess[2][0], "min");
        let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert_eq!(report.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(v["chains"], 4);
        assert!(!dir.path().join("report.json.tmp").exists());
    }

    #[test]
    fn sweep_grid_cardinality_and_clamping() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[sweep]\ntau = [0.1, 0.5, 1.0]\ngamma = [0.0, 0.5, 1.0]\nstep = 0.25\n");
        execute(Command::Sweep, &c, dir.path()).unwrap();
        let rows = read_rows(&dir.path().join("surface.csv"));
        assert_eq!(rows.len(), 9);
        for r in &rows {
            let clamped = &r[0] == "0.1";
            assert_eq!(&r[4], if clamped { "true" } else { "false" });
            if clamped {
                assert_eq!(&r[3], "1");
            }
        }
    }

    #[test]
    fn bench_cardinality_and_normalisation() {
        let dir = tempfile::tempdir().unwrap();
        let c =
            cfg("[bench]\nmethods = [\"malt-rho-one\", \"hmc\"]\nrepeats = 3\nbootstrap = 50\n");
        execute(Command::Bench, &c, dir.path()).unwrap();
        let rows = run_bench(&c).unwrap();
        assert_eq!(rows.iter().filter(|r| r.row_type == "raw").count(), 6);
        let summary: Vec<_> = rows.iter().filter(|r| r.row_type == "summary").collect();
        assert_eq!(summary.len(), 2);
        let reference = summary.iter().find(|r| r.method == "malt-rho-one").unwrap();
        assert_eq!(reference.normalized_ess_per_grad, Some(1.0));
        assert_eq!(reference.normalized_ess_per_iter, Some(1.0));
        let grads: Vec<f64> = rows
            .iter()
            .filter(|r| r.row_type == "raw" && r.method == "hmc")
            .map(|r| r.ess_per_grad.unwrap())
            .collect();
        let hmc = summary.iter().find(|r| r.method == "hmc").unwrap();
        assert_eq!(
            hmc.pct_ess_per_grad,
            Some(percentile(&grads, 10.0).unwrap())
        );
        assert_eq!(read_rows(&dir.path().join("bench.csv")).len(), 8);
    }

    #[test]
    fn sweep_requires_section() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            execute(Command::Sweep, &cfg(""), dir.path()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn abort_writes_dump() {
        let dir = tempfile::tempdir().unwrap();
        // squared projections of such far-out points overflow
        let c = cfg("init_scale = 1e200\n");
        let err = execute(Command::Run, &c, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Aborted { iteration: 1, .. }), "{err}");
        let dump: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("abort.json")).unwrap())
                .unwrap();
        assert_eq!(dump["iteration"], 1);
        assert!(dump["tuner"]["moments"].is_object());
        assert!(!dir.path().join("report.json").exists());
    }
}
