//! Defaults read from `stpr.toml`.
//!
//! Every key is optional, and command-line flags win over the file:
//!
//! ```toml
//! seed = 42
//! output_dir = "out"
//! format = "md"             # md | csv | json
//! runs = 10
//! methods = ["stpr_astar", "stpr_rrtstar"]
//! densities = [100, 1000, 10000]
//! validation_step = 0.01
//! bridge_cmd = "python3 -m stpr_bridge"
//! fixture_mode = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const CONFIG_FILE: &str = "stpr.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<String>,
    pub runs: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub densities: Option<Vec<usize>>,
    pub validation_step: Option<f64>,
    pub bridge_cmd: Option<String>,
    pub fixture_mode: Option<bool>,
}

impl Config {
    pub fn parse(source: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// The explicit file if given, else `./stpr.toml` when present, else
    /// empty defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::from_path(p),
            None if Path::new(CONFIG_FILE).is_file() => Self::from_path(Path::new(CONFIG_FILE)),
            None => Ok(Config::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let c = Config::parse(
            r#"
            seed = 7
            output_dir = "results"
            format = "csv"
            runs = 3
            methods = ["stpr_astar"]
            densities = [100, 1000]
            validation_step = 0.02
            bridge_cmd = "fake-bridge"
            fixture_mode = true
            "#,
            Path::new("t.toml"),
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.densities, Some(vec![100, 1000]));
        assert_eq!(c.bridge_cmd.as_deref(), Some("fake-bridge"));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Config::parse("sead = 1", Path::new("t.toml")).is_err());
        assert_eq!(Config::parse("", Path::new("t.toml")).unwrap(), Config::default());
    }
}
