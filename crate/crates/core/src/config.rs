//! JSON experiment and control configurations.

use crate::dists::{ClaimDistribution, OffspringDistribution, ResourceModel};
use crate::equilibrium::SearchDomain;
use crate::sim::{CapMode, SimOptions};
use crate::society::{ClaimSampling, SubPopulationSpec};
use crate::transport::DEFAULT_QUAD_POINTS;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubPopulationConfig {
    pub label: String,
    pub offspring: OffspringDistribution,
    pub resource: ResourceModel,
    pub claims: ClaimDistribution,
    #[serde(default)]
    pub initial_count: u64,
}

impl SubPopulationConfig {
    pub fn spec(&self) -> SubPopulationSpec {
        SubPopulationSpec::new(self.label.clone(), self.offspring.clone(), self.resource.clone(), self.claims.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
    #[serde(default)]
    pub equilibrium: Option<PathBuf>,
}

fn default_horizon() -> usize {
    300
}

fn default_runs() -> usize {
    1
}

fn default_cap() -> u64 {
    1_000_000
}

/// Seed is mandatory; there is no entropy fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub subpopulations: Vec<SubPopulationConfig>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_cap")]
    pub population_cap: u64,
    #[serde(default)]
    pub cap_mode: CapMode,
    #[serde(default)]
    pub sampling: ClaimSampling,
    #[serde(default)]
    pub solver: SearchDomain,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.subpopulations.is_empty() {
            return Err(ConfigError::invalid("subpopulations", "at least one sub-population is required"));
        }
        if self.horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(ConfigError::invalid("runs", "must be at least 1"));
        }
        let total: u64 = self.subpopulations.iter().map(|s| s.initial_count).sum();
        if self.population_cap < total {
            return Err(ConfigError::invalid(
                "population_cap",
                format!("{} is below the total initial count {total}", self.population_cap),
            ));
        }
        if self.solver.grid_points < 2 {
            return Err(ConfigError::invalid("solver.grid_points", "must be at least 2"));
        }
        if let Some(u) = self.solver.upper {
            if !(u > 0.0 && u.is_finite()) {
                return Err(ConfigError::invalid("solver.upper", "must be finite and > 0"));
            }
        }
        for (k, s) in self.subpopulations.iter().enumerate() {
            if self.subpopulations[..k].iter().any(|o| o.label == s.label) {
                return Err(ConfigError::invalid(format!("subpopulations[{k}].label"), format!("duplicate label {:?}", s.label)));
            }
        }
        Ok(())
    }

    pub fn specs(&self) -> Vec<SubPopulationSpec> {
        self.subpopulations.iter().map(SubPopulationConfig::spec).collect()
    }

    pub fn initial_counts(&self) -> Vec<u64> {
        self.subpopulations.iter().map(|s| s.initial_count).collect()
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            horizon: self.horizon,
            population_cap: self.population_cap,
            cap_mode: self.cap_mode,
            sampling: self.sampling,
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_quad_points() -> usize {
    DEFAULT_QUAD_POINTS
}

/// Candidate demand laws for the home population, ranked by transport cost
/// from the home population's own claim law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub home: SubPopulationConfig,
    pub immigrant: SubPopulationConfig,
    pub grid: Vec<ClaimDistribution>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default)]
    pub solver: SearchDomain,
}

impl ControlConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        if config.grid.is_empty() {
            return Err(ConfigError::invalid("grid", "must not be empty"));
        }
        if !(config.p >= 1.0 && config.p.is_finite()) {
            return Err(ConfigError::invalid("p", "must be finite and >= 1"));
        }
        if config.quad_points == 0 {
            return Err(ConfigError::invalid("quad_points", "must be positive"));
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const WORKED: &str = r#"{
        "seed": 7,
        "horizon": 50,
        "runs": 2,
        "subpopulations": [
            {"label": "home", "offspring": {"family": "poisson", "mean": 2.0},
             "resource": {"family": "deterministic", "value": 0.9},
             "claims": {"family": "uniform", "lower": 0.0, "upper": 1.0}, "initial_count": 100},
            {"label": "immigrant", "offspring": {"family": "poisson", "mean": 3.0},
             "resource": {"family": "deterministic", "value": 0.5},
             "claims": {"family": "exponential", "rate": 1.0}, "initial_count": 100}
        ]
    }"#;

    #[test]
    fn worked_config_parses() {
        let c = ExperimentConfig::from_json(WORKED).unwrap();
        assert_eq!(c.specs().len(), 2);
        assert_eq!(c.initial_counts(), vec![100, 100]);
        assert_eq!(c.population_cap, 1_000_000);
        assert_eq!(c.sim_options().horizon, 50);
        assert_eq!(c.solver, SearchDomain::default());
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = WORKED.replace("\"seed\": 7,", "");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (from, to, field) in [
            ("\"horizon\": 50", "\"horizon\": 0", "horizon"),
            ("\"runs\": 2", "\"runs\": 0", "runs"),
            ("\"label\": \"immigrant\"", "\"label\": \"home\"", "subpopulations[1].label"),
            ("\"rate\": 1.0", "\"rate\": -1.0", "rate"),
            ("\"seed\": 7", "\"seed\": 7, \"colour\": 1", "colour"),
        ] {
            let err = ExperimentConfig::from_json(&WORKED.replace(from, to)).unwrap_err().to_string();
            assert!(err.contains(field), "{field}: {err}");
        }
        let tiny_cap = WORKED.replace("\"runs\": 2", "\"runs\": 2, \"population_cap\": 10");
        assert!(ExperimentConfig::from_json(&tiny_cap).is_err());
    }

    #[test]
    fn control_config_validation() {
        let text = r#"{
            "home": {"label": "home", "offspring": {"family": "poisson", "mean": 2.0},
                     "resource": {"family": "deterministic", "value": 0.9},
                     "claims": {"family": "uniform", "lower": 0.0, "upper": 1.0}},
            "immigrant": {"label": "immigrant", "offspring": {"family": "poisson", "mean": 3.0},
                     "resource": {"family": "deterministic", "value": 0.5},
                     "claims": {"family": "exponential", "rate": 1.0}},
            "grid": [{"family": "uniform", "lower": 0.0, "upper": 0.5}]
        }"#;
        let c = ControlConfig::from_json(text).unwrap();
        assert_eq!((c.p, c.quad_points), (2.0, DEFAULT_QUAD_POINTS));
        assert!(ControlConfig::from_json(&text.replace("\"grid\": [{\"family\": \"uniform\", \"lower\": 0.0, \"upper\": 0.5}]", "\"grid\": []")).is_err());
    }
}
