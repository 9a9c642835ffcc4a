//! Run configuration: one TOML document with optional `CAVE_<SECTION>_<KEY>`
//! environment overrides. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credit::FocusConfig;
use crate::reward::RewardConfig;
use crate::stats::{MCNEMAR_EXACT_LIMIT, Z95};

pub const ENV_PREFIX: &str = "CAVE_";
const SECTIONS: [&str; 6] = ["reward", "focus", "scorer", "tokenizer", "generate", "stats"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerSettings {
    /// Base URL of a remote scorer; `remote:` without a URL falls back to it.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        Self { endpoint: None, timeout_ms: 60_000, max_in_flight: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizerSettings {
    pub vocab_size: u32,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        Self { vocab_size: 32_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSettings {
    pub seed_base: u64,
    /// Per-stratum sample counts (easy, medium, hard); even split if unset.
    pub quotas: Option<Vec<usize>>,
    pub texture_threshold: f64,
    /// Directory of remote-sensing source images, relative to the root.
    pub sources: String,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self { seed_base: 0, quotas: None, texture_threshold: 12.0, sources: "sources".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSettings {
    pub z: f64,
    pub mcnemar_exact_limit: u64,
    pub credit_quantiles: usize,
}

impl Default for StatsSettings {
    fn default() -> Self {
        Self { z: Z95, mcnemar_exact_limit: MCNEMAR_EXACT_LIMIT, credit_quantiles: 4 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub reward: RewardConfig,
    pub focus: FocusConfig,
    pub scorer: ScorerSettings,
    pub tokenizer: TokenizerSettings,
    pub generate: GenerateSettings,
    pub stats: StatsSettings,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

impl RunConfig {
    /// Builds a config from optional TOML text plus `CAVE_` overrides taken
    /// from `env`. Variables naming an unknown section are ignored; unknown
    /// keys in a known section are errors.
    pub fn from_sources<I>(text: Option<&str>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| ConfigError::Parse(e.to_string()))?,
            None => toml::Table::new(),
        };
        let mut overrides: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (var, raw) in overrides {
            let rest = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            let Some(section) = SECTIONS.iter().find(|s| rest.starts_with(&format!("{s}_"))) else { continue };
            let key = &rest[section.len() + 1..];
            let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(ConfigError::Parse(format!("[{section}] is not a table")));
            };
            sec.insert(key.to_owned(), parse_value(&raw));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if given) and applies overrides from the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?,
            ),
            None => None,
        };
        Self::from_sources(text.as_deref(), std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.reward.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.focus.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.tokenizer.vocab_size == 0 {
            return Err(ConfigError::Invalid("tokenizer.vocab_size must be positive".into()));
        }
        if self.scorer.max_in_flight == 0 || self.scorer.timeout_ms == 0 {
            return Err(ConfigError::Invalid("scorer.max_in_flight and scorer.timeout_ms must be positive".into()));
        }
        if !(self.stats.z > 0.0) || self.stats.credit_quantiles == 0 {
            return Err(ConfigError::Invalid("stats.z and stats.credit_quantiles must be positive".into()));
        }
        if !(self.generate.texture_threshold >= 0.0) {
            return Err(ConfigError::Invalid("generate.texture_threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_without_input() {
        let c = RunConfig::from_sources(None, Vec::new()).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.reward.lambda_bu, 0.4);
        assert_eq!(c.focus.rho_max, 0.30);
    }

    #[test]
    fn file_values_and_env_overrides() {
        let text = "[reward]\nlambda_bu = 0.5\nlambda_ea = 0.25\nlambda_af = 0.25\n[generate]\nquotas = [80, 80, 85]\n";
        let c = RunConfig::from_sources(
            Some(text),
            env(&[
                ("CAVE_FOCUS_RHO_MAX", "0.5"),
                ("CAVE_SCORER_ENDPOINT", "http://h:1"),
                ("CAVE_ROOT", "/x"),
                ("HOME", "/"),
            ]),
        )
        .unwrap();
        assert_eq!(c.reward.lambda_bu, 0.5);
        assert_eq!(c.focus.rho_max, 0.5);
        assert_eq!(c.scorer.endpoint.as_deref(), Some("http://h:1"));
        assert_eq!(c.generate.quotas, Some(vec![80, 80, 85]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::from_sources(Some("[reward]\nlambda = 1\n"), Vec::new()),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_sources(Some("[paths]\nout = 'x'\n"), Vec::new()),
            Err(ConfigError::Parse(_))
        ));
        assert!(RunConfig::from_sources(None, env(&[("CAVE_FOCUS_RHO", "0.1")])).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            RunConfig::from_sources(None, env(&[("CAVE_FOCUS_RHO_MIN", "0.5"), ("CAVE_FOCUS_RHO_MAX", "0.4")])),
            Err(ConfigError::Invalid(_))
        ));
    }
}
