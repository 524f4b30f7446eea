use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::eval::Grid;
use crate::learners::{HyperValue, ModelKind};

/// Settings that may come from a TOML configuration file. Every field is
/// optional; a command-line flag overrides the file, and the file overrides
/// the built-in default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub idle_timeout: Option<f64>,
    pub active_timeout: Option<f64>,
    pub honor_tcp_close: Option<bool>,
    pub ratios: Option<String>,
    pub stratify: Option<String>,
    pub task: Option<String>,
    pub models: Option<Vec<String>>,
    /// Path of a grid file, relative to the configuration file.
    pub grid: Option<PathBuf>,
    pub folds: Option<usize>,
    pub scoring: Option<String>,
    pub positive_class: Option<String>,
    pub averaging: Option<String>,
    /// Fixed hyperparameters per model kind, e.g. `[hyperparameters.ADAB]`.
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, BTreeMap<String, HyperValue>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        if let (Some(grid), Some(dir)) = (&config.grid, path.parent()) {
            if grid.is_relative() {
                config.grid = Some(dir.join(grid));
            }
        }
        for kind in config.hyperparameters.keys() {
            kind.parse::<ModelKind>().map_err(CliError::Invalid)?;
        }
        Ok(config)
    }

    /// Fixed hyperparameters configured for `kind`.
    pub fn hyperparameters_for(&self, kind: ModelKind) -> BTreeMap<String, HyperValue> {
        self.hyperparameters
            .iter()
            .filter(|(k, _)| k.parse::<ModelKind>().ok() == Some(kind))
            .flat_map(|(_, v)| v.clone())
            .collect()
    }
}

/// Per-kind search spaces read from a grid file:
///
/// ```toml
/// [RF]
/// n_estimators = [100, 300]
/// max_depth = [8, "inf"]
/// ```
///
/// Kinds absent from the file keep their default grid.
pub fn load_grid_file(path: &Path) -> Result<BTreeMap<ModelKind, Grid>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw: BTreeMap<String, Grid> =
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    raw.into_iter()
        .map(|(k, g)| Ok((k.parse::<ModelKind>().map_err(CliError::Invalid)?, g)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let c: FileConfig = toml::from_str(
            r#"
            seed = 7
            idle_timeout = 60
            ratios = "0.6,0.2,0.2"
            models = ["RF", "KNN"]
            [hyperparameters.ADAB]
            max_depth = 2
            [hyperparameters.DT]
            max_depth = "inf"
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.idle_timeout, Some(60.0));
        assert_eq!(c.hyperparameters_for(ModelKind::AdaB)["max_depth"], HyperValue::Finite(2.0));
        assert_eq!(c.hyperparameters_for(ModelKind::Dt)["max_depth"], HyperValue::Unbounded);
        assert!(c.hyperparameters_for(ModelKind::Nb).is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("sed = 7").is_err());
    }
}
