//! Layered CLI configuration: flags > environment > `verisolve.toml` > defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_FILE: &str = "verisolve.toml";
pub const ENV_ENDPOINT: &str = "VERISOLVE_ENDPOINT";
pub const ENV_API_KEY: &str = "VERISOLVE_API_KEY";
pub const ENV_MODEL: &str = "VERISOLVE_MODEL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("a scripted transcript and an endpoint were both given by {0}")]
    BackendConflict(&'static str),
    #[error("no LLM backend configured: set an endpoint or a scripted transcript")]
    NoBackend,
}

/// One configuration layer; unset fields defer to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub tools_dir: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub runs_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub k: Option<usize>,
    pub generations: Option<usize>,
    pub capacity: Option<usize>,
    pub max_debug: Option<usize>,
    pub max_cycles: Option<usize>,
    pub max_referee: Option<usize>,
    /// Seconds.
    pub timeout: Option<u64>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub scripted: Option<PathBuf>,
}

impl ConfigLayer {
    /// Reads `path`; a missing file is an empty layer.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut layer: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        // paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut layer.tools_dir, &mut layer.prompts_dir, &mut layer.runs_dir, &mut layer.scripted]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(layer)
    }

    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Self {
        Self {
            endpoint: get(ENV_ENDPOINT).filter(|s| !s.is_empty()),
            api_key: get(ENV_API_KEY).filter(|s| !s.is_empty()),
            model: get(ENV_MODEL).filter(|s| !s.is_empty()),
            ..Self::default()
        }
    }

    pub fn from_env() -> Self {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    fn backend(&self) -> Option<Backend> {
        match (&self.scripted, &self.endpoint) {
            (Some(_), Some(_)) => Some(Backend::Conflict),
            (Some(p), None) => Some(Backend::Scripted(p.clone())),
            (None, Some(e)) => Some(Backend::Endpoint(e.clone())),
            (None, None) => None,
        }
    }
}

enum Backend {
    Scripted(PathBuf),
    Endpoint(String),
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub tools_dir: PathBuf,
    pub prompts_dir: PathBuf,
    pub runs_dir: PathBuf,
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub k: usize,
    pub generations: usize,
    pub capacity: usize,
    pub max_debug: usize,
    pub max_cycles: usize,
    pub max_referee: usize,
    pub timeout: u64,
    pub parallelism: usize,
    pub seed: u64,
    pub scripted: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            tools_dir: "tools".into(),
            prompts_dir: "prompts".into(),
            runs_dir: "runs".into(),
            endpoint: None,
            model: "default".into(),
            api_key: None,
            k: 15,
            generations: 10,
            capacity: 5,
            max_debug: 3,
            max_cycles: 3,
            max_referee: 3,
            timeout: 600,
            parallelism: 4,
            seed: 0,
            scripted: None,
        }
    }
}

impl CliConfig {
    /// Merges `layers`, highest precedence first, over the defaults.
    ///
    /// The backend is chosen by the highest layer that names one; a layer
    /// naming both a scripted transcript and an endpoint is a conflict.
    pub fn resolve(layers: &[&ConfigLayer]) -> Result<Self, ConfigError> {
        const NAMES: [&str; 3] = ["flags", "environment", "config file"];
        let mut cfg = Self::default();
        macro_rules! pick {
            ($field:ident) => {
                if let Some(v) = layers.iter().find_map(|l| l.$field.clone()) {
                    cfg.$field = v;
                }
            };
        }
        pick!(tools_dir);
        pick!(prompts_dir);
        pick!(runs_dir);
        pick!(model);
        pick!(k);
        pick!(generations);
        pick!(capacity);
        pick!(max_debug);
        pick!(max_cycles);
        pick!(max_referee);
        pick!(timeout);
        pick!(parallelism);
        pick!(seed);
        cfg.api_key = layers.iter().find_map(|l| l.api_key.clone());
        for (i, layer) in layers.iter().enumerate() {
            match layer.backend() {
                None => continue,
                Some(Backend::Conflict) => {
                    return Err(ConfigError::BackendConflict(NAMES.get(i).copied().unwrap_or("a layer")))
                }
                Some(Backend::Scripted(p)) => cfg.scripted = Some(p),
                Some(Backend::Endpoint(e)) => cfg.endpoint = Some(e),
            }
            break;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standard resolution: flags, then the environment, then `config_file`.
    pub fn load(flags: &ConfigLayer, config_file: &Path) -> Result<Self, ConfigError> {
        let env = ConfigLayer::from_env();
        let file = ConfigLayer::from_file(config_file)?;
        Self::resolve(&[flags, &env, &file])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            ("k", self.k as u64),
            ("generations", self.generations as u64),
            ("capacity", self.capacity as u64),
            ("max_debug", self.max_debug as u64),
            ("max_cycles", self.max_cycles as u64),
            ("max_referee", self.max_referee as u64),
            ("timeout", self.timeout),
            ("parallelism", self.parallelism as u64),
        ];
        for (name, v) in checks {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.scripted.is_some() && self.endpoint.is_some() {
            return Err(ConfigError::BackendConflict("resolution"));
        }
        Ok(())
    }
}
