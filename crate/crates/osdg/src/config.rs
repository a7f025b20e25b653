//! Service configuration: a TOML file plus `OSDG_*` environment overrides.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use osdg_core::AggregationConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::translate::HttpBackendConfig;

pub const MIN_BODY_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {key}: {value:?}")]
    Env { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum TranslatorConfig {
    /// Non-English requests fail with a translator error.
    None,
    Dictionary { path: PathBuf },
    Http(HttpBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub model_path: PathBuf,
    pub ontology_path: PathBuf,
    #[serde(default = "default_translator")]
    pub translator: TranslatorConfig,
    #[serde(default = "default_cache")]
    pub translation_cache_capacity: usize,
    /// External PDF-to-text command template, see [`crate::extract`].
    #[serde(default)]
    pub pdf_extractor_command: Option<String>,
    pub feedback_dir: PathBuf,
    /// Labeling-platform store; community endpoints are disabled without it.
    #[serde(default)]
    pub community_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub community_seed: u64,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default = "default_min_hits")]
    pub min_hits: usize,
    #[serde(default = "default_body_limit")]
    pub max_body_bytes: usize,
    #[serde(default)]
    pub cors_origins: Vec<String>,
}

fn default_translator() -> TranslatorConfig {
    TranslatorConfig::None
}

fn default_cache() -> usize {
    4096
}

fn default_seed() -> u64 {
    42
}

fn default_min_hits() -> usize {
    1
}

fn default_body_limit() -> usize {
    2 * 1024 * 1024
}

impl ServiceConfig {
    /// Reads `path`, applies environment overrides and validates the result.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: ServiceConfig = toml::from_str(&text)?;
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `OSDG_*` overrides from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let bad = || ConfigError::Env {
                key: key.clone(),
                value: value.clone(),
            };
            match key.as_str() {
                "OSDG_LISTEN" => self.listen = value.parse().map_err(|_| bad())?,
                "OSDG_MODEL_PATH" => self.model_path = value.into(),
                "OSDG_ONTOLOGY_PATH" => self.ontology_path = value.into(),
                "OSDG_FEEDBACK_DIR" => self.feedback_dir = value.into(),
                "OSDG_COMMUNITY_DIR" => self.community_dir = Some(value.into()),
                "OSDG_COMMUNITY_SEED" => self.community_seed = value.parse().map_err(|_| bad())?,
                "OSDG_PDF_EXTRACTOR" => self.pdf_extractor_command = Some(value),
                "OSDG_MAX_BODY_BYTES" => self.max_body_bytes = value.parse().map_err(|_| bad())?,
                "OSDG_MIN_HITS" => self.min_hits = value.parse().map_err(|_| bad())?,
                "OSDG_CORS_ORIGINS" => {
                    self.cors_origins = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                "OSDG_TRANSLATOR_ENDPOINT" => match &mut self.translator {
                    TranslatorConfig::Http(h) => h.endpoint = value,
                    _ => {
                        self.translator = TranslatorConfig::Http(HttpBackendConfig {
                            endpoint: value,
                            ..HttpBackendConfig::default()
                        })
                    }
                },
                "OSDG_TRANSLATOR_TOKEN" => {
                    if let TranslatorConfig::Http(h) = &mut self.translator {
                        h.auth_token = Some(value);
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist("model_path", &self.model_path)?;
        must_exist("ontology_path", &self.ontology_path)?;
        if let Some(dir) = &self.community_dir {
            must_exist("community_dir", dir)?;
        }
        match &self.translator {
            TranslatorConfig::Dictionary { path } => must_exist("translator dictionary", path)?,
            TranslatorConfig::Http(h) if h.endpoint.trim().is_empty() => {
                return Err(ConfigError::Invalid("translator endpoint is empty".into()))
            }
            _ => {}
        }
        if self.max_body_bytes < MIN_BODY_LIMIT {
            return Err(ConfigError::Invalid(format!(
                "max_body_bytes must be at least {MIN_BODY_LIMIT}, got {}",
                self.max_body_bytes
            )));
        }
        if self.min_hits == 0 {
            return Err(ConfigError::Invalid("min_hits must be at least 1".into()));
        }
        if let Some(cmd) = &self.pdf_extractor_command {
            if cmd.trim().is_empty() {
                return Err(ConfigError::Invalid("pdf_extractor_command is empty".into()));
            }
        }
        self.aggregation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, extra: &str) -> PathBuf {
        fs::write(dir.join("model.json"), "{}").unwrap();
        fs::write(dir.join("onto.csv"), "sdg,term\n").unwrap();
        let path = dir.join("osdg.toml");
        let text = format!(
            "listen = \"127.0.0.1:0\"\nmodel_path = {:?}\nontology_path = {:?}\nfeedback_dir = {:?}\n{extra}",
            dir.join("model.json"),
            dir.join("onto.csv"),
            dir.join("feedback"),
        );
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn defaults_and_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "max_body_bytes = 4096\n[aggregation]\nrelevance_threshold = 0.2\n[translator]\nbackend = \"http\"\nendpoint = \"http://x\"\nmax_retries = 5\n",
        );
        let c = ServiceConfig::load(&path).unwrap();
        assert_eq!(c.aggregation.relevance_threshold, 0.2);
        assert_eq!(c.aggregation.sdg_share_threshold, 0.10);
        assert_eq!(c.max_body_bytes, 4096);
        let TranslatorConfig::Http(h) = &c.translator else { panic!() };
        assert_eq!((h.max_retries, h.timeout_ms), (5, 10_000));
    }

    #[test]
    fn env_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "");
        let text = fs::read_to_string(&path).unwrap();
        let mut c: ServiceConfig = toml::from_str(&text).unwrap();
        c.apply_env([
            ("OSDG_LISTEN".to_string(), "0.0.0.0:9000".to_string()),
            ("OSDG_MAX_BODY_BYTES".to_string(), "2048".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ])
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.max_body_bytes, 2048);
        assert!(c.apply_env([("OSDG_LISTEN".to_string(), "nope".to_string())]).is_err());
    }

    #[test]
    fn validation_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "max_body_bytes = 100\n");
        assert!(matches!(ServiceConfig::load(&path), Err(ConfigError::Invalid(_))));
        let path = write_config(dir.path(), "");
        fs::remove_file(dir.path().join("model.json")).unwrap();
        assert!(matches!(ServiceConfig::load(&path), Err(ConfigError::Invalid(_))));
        fs::write(&path, "listen = 5").unwrap();
        assert!(matches!(ServiceConfig::load(&path), Err(ConfigError::Parse(_))));
    }
}
