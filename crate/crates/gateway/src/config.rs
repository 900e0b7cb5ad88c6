//! Service configuration file.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! transcript_dir = "transcripts"
//!
//! [provider]
//! kind = "oracle"            # or "remote"
//!
//! [packs.drink]
//! guidelines = "drink/guidelines.txt"
//! skills = "drink/skills.toml"
//! world = "drink/world.toml"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! The API key of a remote provider is read from the environment variable
//! named by `api_key_env`; the file never holds the key itself.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use interplan::guidelines::TaskFamily;
use interplan::llm::RemoteConfig;
use interplan::pack::{PackError, PackPaths, TaskPack};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("configured path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("config needs at least one [packs.<domain>] table")]
    NoPacks,
    #[error("remote provider needs `endpoint` and `model`")]
    IncompleteRemote,
    #[error(transparent)]
    Pack(#[from] PackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Oracle,
    Remote,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    #[serde(default)]
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
}

impl ProviderSection {
    pub fn remote_config(&self) -> Result<RemoteConfig, ConfigError> {
        let (Some(endpoint), Some(model)) = (&self.endpoint, &self.model) else {
            return Err(ConfigError::IncompleteRemote);
        };
        Ok(RemoteConfig {
            endpoint: endpoint.clone(),
            model: model.clone(),
            api_key_env: self
                .api_key_env
                .clone()
                .unwrap_or_else(|| interplan::llm::DEFAULT_API_KEY_ENV.to_string()),
            timeout_secs: self.timeout_secs.unwrap_or(60),
        })
    }
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_listen")]
    listen: SocketAddr,
    transcript_dir: PathBuf,
    #[serde(default)]
    provider: ProviderSection,
    #[serde(default)]
    packs: BTreeMap<TaskFamily, PackPaths>,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub transcript_dir: PathBuf,
    pub provider: ProviderSection,
    pub packs: BTreeMap<TaskFamily, TaskPack>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { reason, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::new(),
            reason: e.to_string(),
        })?;
        if raw.packs.is_empty() {
            return Err(ConfigError::NoPacks);
        }
        if raw.provider.kind == ProviderKind::Remote {
            raw.provider.remote_config()?;
        }
        let transcript_dir = base.join(&raw.transcript_dir);
        if !transcript_dir.is_dir() {
            return Err(ConfigError::MissingPath(transcript_dir));
        }
        let mut packs = BTreeMap::new();
        for (domain, paths) in raw.packs {
            let paths = paths.relative_to(base);
            if let Some(missing) = paths.iter().find(|p| !p.exists()) {
                return Err(ConfigError::MissingPath(missing.to_path_buf()));
            }
            packs.insert(domain, TaskPack::from_paths(domain, &paths)?);
        }
        Ok(ServiceConfig {
            listen: raw.listen,
            transcript_dir,
            provider: raw.provider,
            packs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_builtin_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("t")).unwrap();
        let cfg = ServiceConfig::from_toml_str(
            "transcript_dir = \"t\"\n[packs.drink]\n",
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.listen, default_listen());
        assert_eq!(cfg.provider.kind, ProviderKind::Oracle);
        assert!(cfg.packs.contains_key(&TaskFamily::Drink));
    }

    #[test]
    fn missing_guidelines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("t")).unwrap();
        let err = ServiceConfig::from_toml_str(
            "transcript_dir = \"t\"\n[packs.drink]\nguidelines = \"nope.txt\"\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::MissingPath(p) if p.ends_with("nope.txt")));
    }

    #[test]
    fn missing_transcript_dir_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = ServiceConfig::from_toml_str("transcript_dir = \"t\"\n[packs.drink]\n", dir.path())
            .unwrap_err();
        assert!(matches!(err, ConfigError::MissingPath(_)));
    }

    #[test]
    fn remote_needs_endpoint_and_model() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("t")).unwrap();
        let err = ServiceConfig::from_toml_str(
            "transcript_dir = \"t\"\n[provider]\nkind = \"remote\"\n[packs.drink]\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::IncompleteRemote));
    }

    #[test]
    fn sample_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/service.toml");
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.packs.len(), 2);
        assert_eq!(cfg.provider.kind, ProviderKind::Oracle);
    }

    #[test]
    fn keys_are_not_accepted_in_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("t")).unwrap();
        let err = ServiceConfig::from_toml_str(
            "transcript_dir = \"t\"\n[provider]\nkind = \"remote\"\nendpoint = \"http://x\"\nmodel = \"m\"\napi_key = \"sk-1\"\n[packs.drink]\n",
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
    }
}
