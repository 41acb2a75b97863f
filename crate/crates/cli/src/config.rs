use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "LOOPSOUP_SEED";

/// Run settings read from a TOML file; every field has a default so an
/// empty file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every randomized suite; falls back to `LOOPSOUP_SEED`, then 42.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Samples per Monte Carlo suite.
    pub samples: usize,
    /// Below this many samples a Monte Carlo verdict is reported inconclusive.
    pub min_samples: usize,
    /// Loop length cap for enumeration checks.
    pub max_length: usize,
    /// Path length cap for loop-erased walk path sums.
    pub lerw_max_length: usize,
    /// Loop length cap for the per-loop pushforward check.
    pub pushforward_max_length: usize,
    /// Soup intensity for sampling and transform checks.
    pub intensity: f64,
    pub tolerances: Tolerances,
    /// Matrix JSON files; the built-in fixtures are used when empty.
    pub fixtures: Vec<PathBuf>,
    /// Graph JSON files for the spanning-tree checks.
    pub graphs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance for exact determinant identities.
    pub identity: f64,
    /// Absolute tolerance per loop for the pushforward identity.
    pub pushforward: f64,
    /// Monte Carlo comparisons pass within this many standard errors.
    pub sigmas: f64,
    /// Significance level of chi-square goodness-of-fit tests.
    pub chi_square_alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            pushforward: 1e-10,
            sigmas: 4.0,
            chi_square_alpha: 1e-3,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            samples: 100_000,
            min_samples: 1_000,
            max_length: 14,
            lerw_max_length: 12,
            pushforward_max_length: 8,
            intensity: 1.0,
            tolerances: Tolerances::default(),
            fixtures: Vec::new(),
            graphs: Vec::new(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        // Relative fixture paths are taken relative to the config file.
        if let Some(dir) = path.parent() {
            for p in config.fixtures.iter_mut().chain(config.graphs.iter_mut()) {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Input(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let counts = [
            ("samples", self.samples),
            ("min_samples", self.min_samples),
            ("max_length", self.max_length),
            ("lerw_max_length", self.lerw_max_length),
            ("pushforward_max_length", self.pushforward_max_length),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Input(format!("{name} must be at least 1")));
        }
        let t = &self.tolerances;
        let positive = [
            ("identity", t.identity),
            ("pushforward", t.pushforward),
            ("sigmas", t.sigmas),
            ("chi_square_alpha", t.chi_square_alpha),
            ("intensity", self.intensity),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !v.is_finite() || *v <= 0.0) {
            return Err(CliError::Input(format!("{name} must be positive")));
        }
        if t.chi_square_alpha >= 1.0 {
            return Err(CliError::Input("chi_square_alpha must be below 1".into()));
        }
        Ok(())
    }

    /// Seed precedence: explicit value, then the config file, then the
    /// environment, then the default.
    pub fn resolve_seed(&self, explicit: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = explicit.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("{SEED_ENV}={v} is not an unsigned integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig {
            seed: Some(7),
            samples: 123,
            fixtures: vec!["a.json".into()],
            out: Some("r.jsonl".into()),
            ..RunConfig::default()
        };
        c.tolerances.sigmas = 5.0;
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        assert_eq!(
            RunConfig::parse(&RunConfig::default().to_toml()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("samples = 0").is_err());
        assert!(RunConfig::parse("[tolerances]\nsigmas = -1.0").is_err());
        assert!(RunConfig::parse("unknown = 1").is_err());
    }

    #[test]
    fn explicit_seed_wins() {
        let c = RunConfig {
            seed: Some(5),
            ..RunConfig::default()
        };
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), 9);
        assert_eq!(c.resolve_seed(None).unwrap(), 5);
    }
}
