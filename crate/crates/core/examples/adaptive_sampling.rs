// Fully adaptive MALT on an ill-conditioned Gaussian.
//
// Run with `cargo run --release --example adaptive_sampling`.

use malt::diagnostics::min_ess_squared_coords;
use malt::sampler::{run_adaptive, Phase, RunConfig};
use malt::target::{make_target, TargetSpec};

pub fn run_example() -> malt::Result<()> {
    let variances: Vec<f64> = (0..6).map(|i| 4f64.powi(i)).collect();
    let target = make_target(&TargetSpec::DiagGaussian {
        variances: variances.clone(),
    })?;
    let cfg = RunConfig {
        chains: 16,
        n_adapt: 600,
        n_clip: 50,
        n_postadapt_warmup: 100,
        n_sample: 400,
        seed: 2,
        ..RunConfig::default()
    };
    let record = run_adaptive(&target, &cfg)?;

    for t in record
        .trace
        .iter()
        .filter(|t| t.phase == Phase::Adapt)
        .step_by(100)
    {
        println!(
            "iter {:4}: h {:.3}, tau {:.3}, gamma {:.3}, lambda {:.2}, rho {:.2}, accept {:.2}",
            t.iteration, t.step, t.length, t.damping, t.eigenvalue, t.rho, t.acceptance
        );
    }
    let p = &record.final_params;
    println!(
        "tuned: h {:.3}, tau {:.3} ({} steps), gamma {:.3}",
        p.step,
        p.length,
        p.n_steps(),
        p.damping
    );
    println!("mass: {:.4?}", p.mass.entries());

    let d = &record.draws;
    for (j, want) in variances.iter().enumerate() {
        let all: Vec<f64> = (0..d.chains).flat_map(|c| d.series(c, j)).collect();
        let var = all.iter().map(|x| x * x).sum::<f64>() / all.len() as f64;
        println!("coordinate {j}: variance {var:8.3} (true {want})");
    }
    let report = min_ess_squared_coords(&record)?;
    println!(
        "min ESS {:.0} at coordinate {}, ESS/grad {:.4}",
        report.min_ess, report.min_coord, report.ess_per_grad
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("adaptive example failed");
}
