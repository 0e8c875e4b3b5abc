use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::report::CliError;

/// Defaults read from `--config`. Every key is optional and mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub report: Option<PathBuf>,
    pub exact: Option<bool>,
    pub slack: Option<f64>,
    pub compacts: Option<usize>,
    pub eps_support: Option<f64>,
    pub max_atoms: Option<usize>,
    pub species: Option<String>,
    pub mass: Option<f64>,
    pub n_particles: Option<usize>,
    pub grid: Option<usize>,
    #[serde(rename = "box")]
    pub box_length: Option<f64>,
    pub c: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub coarsen: Option<usize>,
    pub modes: Option<PathBuf>,
    pub coeffs: Option<PathBuf>,
    pub emit_density: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub certify: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("bad config {}: {e}", path.display())))
    }
}

/// Flag value if given, else the config value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
