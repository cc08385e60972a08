//! TOML experiment configuration.
//!
//! ```toml
//! preset = "single-chain"        # optional
//!
//! [target]
//! kind = "diag-gaussian"
//! variances = [1.0, 4.0, 9.0]
//!
//! [run]                          # any RunConfig field; omitted keys take defaults
//! chains = 16
//! n_adapt = 1000
//! seed = 3
//!
//! [run.adam]
//! learning_rate = 0.05
//!
//! [output]
//! dir = "out"
//! draws = true
//!
//! [sweep]                        # used by `sweep`
//! tau = [0.5, 1.0, 2.0]
//! gamma = [0.0, 0.5, 1.0]
//! step = 0.25
//!
//! [bench]                        # used by `bench`
//! methods = ["malt-rho-one", "hmc"]
//! repeats = 5
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::RunConfig;
use crate::target::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// See [`RunConfig::single_chain`].
    SingleChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write `draws.csv` for `run`.
    pub draws: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            draws: false,
        }
    }
}

/// Fixed-kernel grid over trajectory length and damping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tau: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Step size shared by every cell.
    pub step: f64,
    /// Seeds per cell; cell metrics are averaged over them.
    #[serde(default = "one")]
    pub repeats: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MaltAdaptiveRho,
    MaltRhoOne,
    RhmcUniform,
    RhmcExponential,
    Hmc,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MaltAdaptiveRho,
        Method::MaltRhoOne,
        Method::RhmcUniform,
        Method::RhmcExponential,
        Method::Hmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MaltAdaptiveRho => "malt-adaptive-rho",
            Method::MaltRhoOne => "malt-rho-one",
            Method::RhmcUniform => "rhmc-uniform",
            Method::RhmcExponential => "rhmc-exponential",
            Method::Hmc => "hmc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    /// Seeds per method: `run.seed, run.seed + 1, ...`.
    pub repeats: usize,
    /// Bootstrap resamples for the standard error of the percentile.
    pub bootstrap: usize,
    pub percentile: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            repeats: 20,
            bootstrap: 1000,
            percentile: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub target: TargetSpec,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Run settings with the preset applied.
    pub fn effective_run(&self) -> RunConfig {
        match self.preset {
            Some(Preset::SingleChain) => self.run.clone().single_chain(),
            None => self.run.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.effective_run().validate().map_err(cfg_err)?;
        crate::target::make_target(&self.target).map_err(cfg_err)?;
        if let Some(s) = &self.sweep {
            check_grid("sweep.tau", &s.tau, false)?;
            check_grid("sweep.gamma", &s.gamma, true)?;
            if !(s.step.is_finite() && s.step > 0.0) {
                return Err(Error::Config(format!(
                    "sweep.step must be positive (got {})",
                    s.step
                )));
            }
            if s.repeats == 0 {
                return Err(Error::Config("sweep.repeats must be at least 1".into()));
            }
        }
        if let Some(b) = &self.bench {
            if b.methods.is_empty() {
                return Err(Error::Config("bench.methods is empty".into()));
            }
            if b.repeats < 2 {
                return Err(Error::Config("bench.repeats must be at least 2".into()));
            }
            if b.bootstrap < 2 {
                return Err(Error::Config("bench.bootstrap must be at least 2".into()));
            }
            if !(0.0..=100.0).contains(&b.percentile) {
                return Err(Error::Config(
                    "bench.percentile must lie in [0, 100]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Grids must be strictly increasing; `tau` strictly positive, `gamma` non-negative.
fn check_grid(name: &str, grid: &[f64], allow_zero: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    for v in grid {
        let ok = v.is_finite() && if allow_zero { *v >= 0.0 } else { *v > 0.0 };
        if !ok {
            return Err(Error::Config(format!("{name} contains invalid value {v}")));
        }
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[target]
kind = "standard-gaussian"
dim = 2
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.run, RunConfig::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert!(cfg.sweep.is_none() && cfg.bench.is_none());
    }

    #[test]
    fn full_config_round_trips() {
        let text = format!(
            "{MINIMAL}\n[run]\nchains = 3\nkernel = \"rhmc-uniform\"\n[run.adam]\nlearning_rate = 0.02\n\
             [sweep]\ntau = [0.5, 1.0]\ngamma = [0.0, 2.0]\nstep = 0.1\n[bench]\nmethods = [\"hmc\", \"malt-rho-one\"]\nrepeats = 3\n"
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.run.chains, 3);
        assert_eq!(cfg.run.adam.learning_rate, 0.02);
        assert_eq!(
            cfg.bench.as_ref().unwrap().methods,
            vec![Method::Hmc, Method::MaltRhoOne]
        );
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        for (text, key) in [
            (format!("{MINIMAL}\n[run]\nchainz = 3\n"), "chainz"),
            (format!("{MINIMAL}\nbogus = 1\n"), "bogus"),
            (format!("{MINIMAL}\n[output]\nfolder = \"x\"\n"), "folder"),
        ] {
            let err = ExperimentConfig::from_toml_str(&text)
                .unwrap_err()
                .to_string();
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn invalid_grids_rejected() {
        for grid in [
            "tau = [1.0, 0.5]\ngamma = [0.0]",
            "tau = [0.0]\ngamma = [0.0]",
            "tau = [1.0]\ngamma = []",
        ] {
            let text = format!("{MINIMAL}\n[sweep]\n{grid}\nstep = 0.1\n");
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{grid}");
        }
    }

    #[test]
    fn run_validation_surfaces_as_config_error() {
        let text = format!("{MINIMAL}\n[run]\nn_adapt = 5\nn_clip = 10\n");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
        let text = format!("{MINIMAL}\n[bench]\nrepeats = 1\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn single_chain_preset() {
        let text = format!("preset = \"single-chain\"\n{MINIMAL}");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let run = cfg.effective_run();
        assert_eq!(
            (run.chains, run.n_adapt, run.adam.learning_rate),
            (1, 20_000, 0.01)
        );
    }
}
