use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{DaraParams, Policy};
use crate::rate_alloc::Objective;

/// How each sensor's weight profile is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileSpec {
    /// Every sensor discounts by the same factor.
    Identical(f64),
    /// Discount factors at equal intervals from `low` to `high`.
    Linspace { low: f64, high: f64 },
    /// One entry per sensor.
    PerSensor(Vec<SensorProfile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SensorProfile {
    Delta { delta: f64 },
    /// `slot,bytes` CSV; relative paths resolve against the config file.
    Histogram { histogram: PathBuf },
}

/// Distribution of MAC frames per slot, `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HDistribution {
    Constant(f64),
    Normal { mean: f64, stddev: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum AlphaRule {
    #[default]
    Uniform,
    Explicit(Vec<f64>),
}

fn default_objective() -> Objective {
    Objective::MaxMin
}

fn default_qbar() -> f64 {
    1.0
}

/// One experiment scenario. Keys in config files match these field names
/// (`N` and `T` upper-case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(rename = "N")]
    pub num_sensors: usize,
    #[serde(rename = "T")]
    pub slots: usize,
    pub profiles: ProfileSpec,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default)]
    pub dara: DaraParams,
    pub h: HDistribution,
    #[serde(default = "default_qbar")]
    pub qbar: f64,
    #[serde(default)]
    pub alpha: AlphaRule,
    pub seed: u64,
    pub policies: Vec<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when `json` is set.
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let config: ExperimentConfig = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    /// Loads a `.toml` or `.json` file and resolves histogram paths
    /// relative to its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut config = Self::parse(&text, json)?;
        if let (Some(dir), ProfileSpec::PerSensor(list)) = (path.parent(), &mut config.profiles) {
            for entry in list {
                if let SensorProfile::Histogram { histogram } = entry {
                    if histogram.is_relative() {
                        *histogram = dir.join(&*histogram);
                    }
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sensors == 0 || self.slots == 0 {
            return Err(Error::Config("N and T must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies requested".into()));
        }
        if !(self.qbar.is_finite() && self.qbar > 0.0) {
            return Err(Error::Config(format!("qbar must be positive, got {}", self.qbar)));
        }
        match self.h {
            HDistribution::Constant(v) if !(v.is_finite() && v > 0.0) => {
                return Err(Error::Config(format!("constant h must be positive, got {v}")));
            }
            HDistribution::Normal { mean, stddev }
                if !(mean.is_finite() && stddev.is_finite() && stddev >= 0.0) =>
            {
                return Err(Error::Config("normal h needs finite mean and stddev >= 0".into()));
            }
            _ => {}
        }
        if let AlphaRule::Explicit(alpha) = &self.alpha {
            if alpha.len() != self.num_sensors {
                return Err(Error::LengthMismatch {
                    what: "alpha",
                    expected: self.num_sensors,
                    actual: alpha.len(),
                });
            }
        }
        if let ProfileSpec::PerSensor(list) = &self.profiles {
            if list.len() != self.num_sensors {
                return Err(Error::LengthMismatch {
                    what: "profiles",
                    expected: self.num_sensors,
                    actual: list.len(),
                });
            }
        }
        self.dara.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
scenario = "identical"
N = 6
T = 500
profiles = { Identical = 0.99 }
objective = "MaxMin"
h = { Normal = { mean = 200.0, stddev = 20.0 } }
qbar = 1.0
alpha = "Uniform"
seed = 7
policies = ["dara", "rr", "rrr", "rdrr"]

[dara]
mu = 1.0
nu = 1.0
gamma = 1.0
"#;

    #[test]
    fn parses_toml() {
        let c = ExperimentConfig::parse(FULL, false).unwrap();
        assert_eq!(c.num_sensors, 6);
        assert_eq!(c.slots, 500);
        assert_eq!(c.profiles, ProfileSpec::Identical(0.99));
        assert_eq!(c.h, HDistribution::Normal { mean: 200.0, stddev: 20.0 });
        assert_eq!(c.policies, vec![Policy::Dara, Policy::Rr, Policy::Rrr, Policy::Rdrr]);
        assert_eq!(c.dara.tail_floor, 1e-12);
        assert_eq!(c.budget, None);
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::parse(FULL, false).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&text, true).unwrap(), c);
    }

    #[test]
    fn per_sensor_profiles() {
        let text = r#"
scenario = "mixed"
N = 2
T = 4
profiles = { PerSensor = [{ delta = 0.5 }, { histogram = "h.csv" }] }
h = { Constant = 1.0 }
alpha = { Explicit = [0.25, 0.75] }
seed = 1
policies = ["dara"]
"#;
        let c = ExperimentConfig::parse(text, false).unwrap();
        assert_eq!(
            c.profiles,
            ProfileSpec::PerSensor(vec![
                SensorProfile::Delta { delta: 0.5 },
                SensorProfile::Histogram { histogram: "h.csv".into() },
            ])
        );
        assert_eq!(c.alpha, AlphaRule::Explicit(vec![0.25, 0.75]));
    }

    #[test]
    fn seed_is_required() {
        let text = FULL.replace("seed = 7\n", "");
        assert!(matches!(ExperimentConfig::parse(&text, false), Err(Error::Config(_))));
    }

    #[test]
    fn keys_are_case_sensitive() {
        let text = FULL.replace("N = 6", "n = 6");
        assert!(ExperimentConfig::parse(&text, false).is_err());
    }

    #[test]
    fn unknown_policy_is_config_error() {
        let text = FULL.replace("\"rdrr\"", "\"edf\"");
        assert!(matches!(ExperimentConfig::parse(&text, false), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_alpha_length() {
        let text = FULL.replace("alpha = \"Uniform\"", "alpha = { Explicit = [1.0] }");
        assert!(matches!(
            ExperimentConfig::parse(&text, false),
            Err(Error::LengthMismatch { what: "alpha", .. })
        ));
    }
}
