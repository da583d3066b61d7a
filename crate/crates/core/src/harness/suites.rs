//! Built-in experiment suites.

use crate::asymptotics::DEFAULT_CHECKPOINTS;
use crate::harness::config::{
    CheckConfig, ExperimentConfig, KlConfig, ModelConfig, OutputConfig, ProcessConfig, QuadratureConfig, TrajectoryConfig,
};
use crate::model::Interval;

pub const SUITE_NAMES: [&str; 4] = [
    "paper-stationary-vs-nonstationary",
    "paper-unknown-sigma",
    "nested-both-correct",
    "three-model-selection",
];

/// Seeds shared by every built-in suite.
pub fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}

fn stationary() -> Vec<Interval> {
    vec![Interval::open(-1.0, 1.0)]
}

fn explosive() -> Vec<Interval> {
    vec![Interval::closed(-1.5, -1.0), Interval::closed(1.0, 1.5)]
}

fn sigma_range() -> Vec<Interval> {
    vec![Interval::closed(0.1, 5.0)]
}

fn base(name: &str, models: Vec<ModelConfig>, tolerance: f64) -> ExperimentConfig {
    ExperimentConfig {
        suite_name: name.into(),
        checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
        seeds: default_seeds(),
        threads: None,
        true_process: ProcessConfig { rho0: 0.5, sigma0: 1.0 },
        models,
        quadrature: QuadratureConfig::default(),
        outputs: OutputConfig::default(),
        trajectory: TrajectoryConfig {
            tolerance,
            ..TrajectoryConfig::default()
        },
        kl: None,
        check: CheckConfig::default(),
        simulate: None,
    }
}

/// Configuration of a built-in suite, by name.
pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "paper-stationary-vs-nonstationary" => {
            let mut c = base(
                name,
                vec![ModelConfig::ar1("M1", stationary()), ModelConfig::ar1("M2", explosive())],
                0.02,
            );
            c.kl = Some(KlConfig {
                n: 10_000,
                replications: 50,
                seed: 0,
                rho: vec![-1.5, -1.25, -1.0, -0.5, 0.0, 0.5, 1.0, 1.25, 1.5],
                sigma: vec![],
                max_gap_se: 3.0,
                min_pass_fraction: 0.95,
            });
            c
        }
        "paper-unknown-sigma" => {
            let mut c = base(
                name,
                vec![
                    ModelConfig::ar1_sigma("M1", stationary(), sigma_range()),
                    ModelConfig::ar1_sigma("M2", explosive(), sigma_range()),
                ],
                0.03,
            );
            c.kl = Some(KlConfig {
                n: 10_000,
                replications: 50,
                seed: 0,
                rho: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
                sigma: vec![0.5, 0.8, 1.0, 1.5, 2.0],
                max_gap_se: 3.0,
                min_pass_fraction: 0.95,
            });
            c
        }
        "nested-both-correct" => base(
            name,
            vec![
                ModelConfig::ar1("M1", stationary()),
                ModelConfig::ar1("M1prime", vec![Interval::open(0.0, 1.0)]),
            ],
            0.01,
        ),
        "three-model-selection" => {
            let mut c = base(
                name,
                vec![
                    ModelConfig::ar1("M1", stationary()),
                    ModelConfig::ar1("M2", explosive()),
                    ModelConfig::ar1("M3", vec![Interval::closed(-1.5, -1.0)]),
                ],
                0.02,
            );
            // h(M3) = 1.5, so the sieve rate must exceed 3.
            c.check.sieve.beta = 4.0;
            c
        }
        _ => return None,
    };
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        for name in SUITE_NAMES {
            let c = builtin(name).unwrap();
            c.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
        assert!(builtin("nope").is_none());
    }
}
