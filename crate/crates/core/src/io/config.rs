use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ExperimentSpec;
use crate::init::InitialCondition;
use crate::model::Params;
use crate::observables::{Integrand, TestFunction};

/// Parse TOML, reporting errors against the 1-based line they occur on.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Config { line, message: e.message().trim().to_string() }
    })
}

/// Top-level run configuration.
///
/// ```toml
/// seed = 7
///
/// [params]
/// N = 64
/// c = 1.0
/// theta = 2.0
/// alpha = 0.2
/// beta = 0.8
/// gamma = 1.0
///
/// [simulate]
/// t = 1.0
/// samples = 20
/// init = { kind = "all_occupied" }
///
/// [output]
/// dir = "out"
/// ```
///
/// An `[experiment]` table holds an experiment spec for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub params: Option<Params>,
    pub simulate: Option<SimulateConfig>,
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_samples() -> usize {
    10
}

fn default_init() -> InitialCondition {
    InitialCondition::AllOccupied
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub t: f64,
    #[serde(default = "default_init")]
    pub init: InitialCondition,
    /// Grid samples of the mean density (and pairings) on `[0, t]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub integrands: Vec<Integrand>,
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub replica: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t: 0.0,
            init: default_init(),
            samples: default_samples(),
            integrands: Vec::new(),
            test_functions: Vec::new(),
            replica: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for CSV/JSON/SVG output; nothing is written when absent.
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = parse_toml(text)?;
        if let Some(spec) = &cfg.experiment {
            spec.validate()?;
        }
        if let Some(sim) = &cfg.simulate {
            sim.init.validate()?;
            if !(sim.t >= 0.0 && sim.t.is_finite()) {
                return Err(Error::InvalidSpec(format!("simulate.t = {}, need a finite t >= 0", sim.t)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"seed = 7

[params]
N = 64
c = 1.0
theta = 2.0
alpha = 0.2
beta = 0.8
gamma = 1.0

[simulate]
t = 1.0
samples = 20
init = { kind = "all_occupied" }
integrands = ["m-target"]

[output]
dir = "out"
"#;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::from_toml(FULL).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.params.unwrap().n(), 64);
        assert_eq!(cfg.simulate.unwrap().integrands, vec![Integrand::MeanMinusTarget]);
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = FULL.replace("samples = 20", "sample = 20");
        match RunConfig::from_toml(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 13, "{message}");
                assert!(message.contains("sample"), "{message}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn physical_constraints_are_checked_at_parse_time() {
        let text = FULL.replace("alpha = 0.2", "alpha = 1.0");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config { line: 3..=10, .. })));
        let text = FULL.replace("integrands = [\"m-target\"]", "integrands = [\"eta7\"]");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config { line: 15, .. })));
    }
}
