//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! suite_name = "paper-stationary-vs-nonstationary"
//! checkpoints = [100, 1000, 10000]
//! seeds = [1, 2, 3]
//!
//! [true_process]
//! rho0 = 0.5
//! sigma0 = 1.0
//!
//! [[models]]
//! name = "M1"
//! family = "ar1"
//! rho = [{ lo = -1.0, hi = 1.0, lo_open = true, hi_open = true }]
//! ```
//!
//! Optional tables: `[quadrature]`, `[outputs]`, `[trajectory]`, `[kl]`,
//! `[check]`, `[simulate]`. See the README for every key.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assumptions::{DEFAULT_A2_LENGTHS, DEFAULT_A2_REPLICATIONS, DEFAULT_SUP_RESOLUTION};
use crate::asymptotics::AsymptoticsOptions;
use crate::error::{Error, Result};
use crate::marginal::{QuadratureOptions, QuadratureRule, MAX_NODES_PER_DIM};
use crate::model::{make_ar1_model, Interval, ModelSpec, PriorKind, PriorSpec, SigmaSpec, TrueProcess};

/// Largest checkpoint a configuration may request.
pub const MAX_CHECKPOINT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite_name: String,
    pub checkpoints: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Worker threads; absent means all available cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub true_process: ProcessConfig,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlConfig>,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub rho0: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `sigma` known (defaults to the true `sigma0`).
    Ar1,
    /// `sigma` a parameter over `sigma_domain`.
    Ar1Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub family: FamilyKind,
    pub rho: Vec<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_domain: Option<Vec<Interval>>,
    /// One prior per parameter; absent means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<PriorKind>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rule: QuadratureRule,
    pub tol: f64,
    /// Nodes-per-dimension cap for refinement.
    pub max_resolution: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            tol: 1e-9,
            max_resolution: MAX_NODES_PER_DIM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "runs".into(),
            formats: vec![OutputFormat::Jsonl, OutputFormat::Csv],
        }
    }
}

/// Per-path acceptance for `trajectory`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    /// A path passes when its final value is within this of the limit.
    pub tolerance: f64,
    /// Fraction of passing paths a pair needs.
    pub min_pass_fraction: f64,
    pub tail_fraction: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            min_pass_fraction: 0.9,
            tail_fraction: 0.25,
        }
    }
}

/// Probe grid and Monte Carlo settings for `kl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlConfig {
    #[serde(default = "default_kl_n")]
    pub n: usize,
    #[serde(default = "default_kl_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    pub rho: Vec<f64>,
    /// Crossed with `rho` for models with unknown sigma.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<f64>,
    #[serde(default = "default_max_gap_se")]
    pub max_gap_se: f64,
    #[serde(default = "default_kl_pass_fraction")]
    pub min_pass_fraction: f64,
}

fn default_kl_n() -> usize {
    10_000
}

fn default_kl_replications() -> usize {
    50
}

fn default_max_gap_se() -> f64 {
    3.0
}

fn default_kl_pass_fraction() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SieveKind {
    /// `G_T = Theta`.
    Full,
    /// `G_T = {|rho| <= exp(beta T)} ∩ Theta`.
    RhoBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SieveConfig {
    pub kind: SieveKind,
    pub beta: f64,
    pub alpha: f64,
    pub t_list: Vec<u64>,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            kind: SieveKind::Full,
            beta: 1.0,
            alpha: 1.0,
            t_list: vec![1, 2, 5, 10],
        }
    }
}

/// Settings for `check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Path lengths for the sup-probe; absent means `checkpoints`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    pub grid_resolution: u64,
    /// Seed of the sup-probe path and the expectation probe; absent means the first seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub a2_rho1: f64,
    pub a2_n_list: Vec<usize>,
    pub a2_replications: usize,
    pub a4_threshold: f64,
    pub sieve: SieveConfig,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            n_list: None,
            grid_resolution: DEFAULT_SUP_RESOLUTION,
            seed: None,
            a2_rho1: 0.0,
            a2_n_list: DEFAULT_A2_LENGTHS.to_vec(),
            a2_replications: DEFAULT_A2_REPLICATIONS,
            a4_threshold: 1e6,
            sieve: SieveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Series length; absent means the largest checkpoint.
    pub n: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn strictly_increasing(xs: &[usize]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.suite_name.trim().is_empty() {
            return Err(config_err("suite_name is empty"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds must be non-empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(config_err("seeds must be pairwise distinct"));
        }
        if self.checkpoints.is_empty() || self.checkpoints[0] == 0 || !strictly_increasing(&self.checkpoints) {
            return Err(config_err(
                "checkpoints must be a non-empty, strictly increasing list of positive integers",
            ));
        }
        if *self.checkpoints.last().unwrap() > MAX_CHECKPOINT {
            return Err(config_err(format!("checkpoints may not exceed {MAX_CHECKPOINT}")));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }
        self.process()?;
        if self.models.is_empty() {
            return Err(config_err("at least one model is required"));
        }
        self.build_models()?;
        let q = &self.quadrature;
        if !(q.tol > 0.0) {
            return Err(config_err("quadrature.tol must be positive"));
        }
        if q.max_resolution < 2 {
            return Err(config_err("quadrature.max_resolution must be at least 2"));
        }
        if self.outputs.formats.is_empty() {
            return Err(config_err("outputs.formats must list at least one format"));
        }
        let t = &self.trajectory;
        if !(t.tolerance > 0.0)
            || !(t.min_pass_fraction > 0.0 && t.min_pass_fraction <= 1.0)
            || !(t.tail_fraction > 0.0 && t.tail_fraction < 1.0)
        {
            return Err(config_err(
                "trajectory: tolerance > 0, min_pass_fraction in (0, 1] and tail_fraction in (0, 1) required",
            ));
        }
        if let Some(kl) = &self.kl {
            if kl.rho.is_empty() {
                return Err(config_err("kl.rho must be non-empty"));
            }
            if kl.n < crate::klrate::MIN_MC_LENGTH || kl.replications < 2 {
                return Err(config_err("kl needs n >= 100 and replications >= 2"));
            }
        }
        let c = &self.check;
        if let Some(n_list) = &c.n_list {
            if n_list.is_empty() || n_list[0] == 0 || !strictly_increasing(n_list) {
                return Err(config_err("check.n_list must be strictly increasing and positive"));
            }
        }
        if c.a2_n_list.is_empty() || c.a2_n_list[0] < crate::klrate::MIN_MC_LENGTH || !strictly_increasing(&c.a2_n_list) {
            return Err(config_err("check.a2_n_list must be strictly increasing with every n >= 100"));
        }
        if c.a2_replications < 4 {
            return Err(config_err("check.a2_replications must be at least 4"));
        }
        if !(c.a4_threshold >= 0.0) {
            return Err(config_err("check.a4_threshold must be non-negative"));
        }
        if !(c.sieve.alpha > 0.0) || !(c.sieve.beta > 0.0) || c.sieve.t_list.is_empty() {
            return Err(config_err("check.sieve needs alpha > 0, beta > 0 and a non-empty t_list"));
        }
        if let Some(SimulateConfig { n: Some(0) }) = self.simulate {
            return Err(config_err("simulate.n must be positive"));
        }
        Ok(())
    }

    pub fn process(&self) -> Result<TrueProcess> {
        TrueProcess::new(self.true_process.rho0, self.true_process.sigma0).map_err(|e| config_err(e.to_string()))
    }

    pub fn build_models(&self) -> Result<Vec<ModelSpec>> {
        let sigma0 = self.true_process.sigma0;
        self.models
            .iter()
            .map(|m| {
                let sigma = match m.family {
                    FamilyKind::Ar1 => {
                        if m.sigma_domain.is_some() {
                            return Err(config_err(format!("model {}: sigma_domain needs family = \"ar1-sigma\"", m.name)));
                        }
                        SigmaSpec::Known(m.sigma.unwrap_or(sigma0))
                    }
                    FamilyKind::Ar1Sigma => {
                        if m.sigma.is_some() {
                            return Err(config_err(format!("model {}: a fixed sigma needs family = \"ar1\"", m.name)));
                        }
                        let dom = m
                            .sigma_domain
                            .clone()
                            .ok_or_else(|| config_err(format!("model {}: sigma_domain is required", m.name)))?;
                        SigmaSpec::Unknown(dom)
                    }
                };
                let prior = m.prior.clone().map_or(PriorSpec::Uniform, PriorSpec::Product);
                make_ar1_model(m.name.clone(), m.rho.clone(), sigma, prior).map_err(|e| config_err(format!("model {}: {e}", m.name)))
            })
            .collect()
    }

    pub fn asymptotics_options(&self) -> AsymptoticsOptions {
        AsymptoticsOptions {
            tol: self.quadrature.tol,
            quadrature: QuadratureOptions {
                rule: self.quadrature.rule,
                max_nodes_per_dim: self.quadrature.max_resolution,
                ..QuadratureOptions::default()
            },
            ..AsymptoticsOptions::default()
        }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.outputs.formats.contains(&format)
    }
}

impl ModelConfig {
    pub fn ar1(name: &str, rho: Vec<Interval>) -> Self {
        Self {
            name: name.into(),
            family: FamilyKind::Ar1,
            rho,
            sigma: None,
            sigma_domain: None,
            prior: None,
        }
    }

    pub fn ar1_sigma(name: &str, rho: Vec<Interval>, sigma_domain: Vec<Interval>) -> Self {
        Self {
            name: name.into(),
            family: FamilyKind::Ar1Sigma,
            rho,
            sigma: None,
            sigma_domain: Some(sigma_domain),
            prior: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
suite_name = "t"
checkpoints = [10, 20]
seeds = [1, 2]

[true_process]
rho0 = 0.5
sigma0 = 1.0

[[models]]
name = "M1"
family = "ar1"
rho = [{ lo = -1.0, hi = 1.0, lo_open = true, hi_open = true }]
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.quadrature, QuadratureConfig::default());
        assert_eq!(c.build_models().unwrap()[0].name(), "M1");
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn validation_errors() {
        let cases = [
            MINIMAL.replace("seeds = [1, 2]", "seeds = []"),
            MINIMAL.replace("seeds = [1, 2]", "seeds = [3, 3]"),
            MINIMAL.replace("checkpoints = [10, 20]", "checkpoints = [20, 10]"),
            MINIMAL.replace("checkpoints = [10, 20]", "checkpoints = [10, 2000000]"),
            MINIMAL.replace("checkpoints = [10, 20]\n", ""),
            MINIMAL.replace("rho0 = 0.5", "rho0 = 1.5"),
            MINIMAL.replace("family = \"ar1\"", "family = \"ar1-sigma\""),
            MINIMAL.replace("suite_name", "suite_nam"),
        ];
        for text in cases {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))), "{text}");
        }
    }
}
