//! Operator configuration, read from a TOML file:
//!
//! ```toml
//! [pseudonymization]
//! secret_env = "MONITOR_SECRET"    # or: secret_file = "secret.key", or: secret = "..."
//!
//! [thresholds]
//! image_hamming = 10
//! text_jaccard = 0.7
//!
//! [api]
//! bind = "127.0.0.1:8080"
//! accounts_file = "accounts.json"
//! cors_origin = "http://localhost:5173"
//! public_base_url = "http://127.0.0.1:8080"
//! token_ttl_secs = 28800
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cluster::Thresholds;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub pseudonymization: SecretSource,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub api: ApiConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Where the pseudonymization key comes from. Exactly one must be set.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretSource {
    pub secret: Option<String>,
    pub secret_env: Option<String>,
    pub secret_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApiConfig {
    pub bind: String,
    pub accounts_file: Option<PathBuf>,
    pub cors_origin: Option<String>,
    pub public_base_url: Option<String>,
    pub token_ttl_secs: u64,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            bind: "127.0.0.1:8080".into(),
            accounts_file: None,
            cors_origin: None,
            public_base_url: None,
            token_ttl_secs: 8 * 3600,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&cfg.thresholds.text_jaccard) || cfg.thresholds.image_hamming > 64 {
            return Err(Error::Config("thresholds out of range".into()));
        }
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolves the pseudonymization key. Missing or empty keys are errors.
    pub fn secret(&self) -> Result<Vec<u8>> {
        let src = &self.pseudonymization;
        let set = [src.secret.is_some(), src.secret_env.is_some(), src.secret_file.is_some()];
        if set.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config(
                "set exactly one of pseudonymization.secret, secret_env, secret_file".into(),
            ));
        }
        let secret = if let Some(s) = &src.secret {
            s.clone().into_bytes()
        } else if let Some(var) = &src.secret_env {
            std::env::var(var)
                .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?
                .into_bytes()
        } else {
            let path = self.resolve(src.secret_file.as_deref().expect("checked above"));
            let mut bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            while bytes.last().is_some_and(|b| b.is_ascii_whitespace()) {
                bytes.pop();
            }
            bytes
        };
        if secret.is_empty() {
            return Err(Error::Config("pseudonymization secret is empty".into()));
        }
        Ok(secret)
    }

    pub fn accounts_path(&self) -> Option<PathBuf> {
        self.api.accounts_file.as_deref().map(|p| self.resolve(p))
    }

    /// Externally visible origin of the API, defaulting to the bind address.
    pub fn public_base_url(&self) -> String {
        self.api
            .public_base_url
            .clone()
            .unwrap_or_else(|| format!("http://{}", self.api.bind))
    }
}
