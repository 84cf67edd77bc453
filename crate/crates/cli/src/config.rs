//! Optional TOML configuration file. Command-line flags take precedence
//! over file values, which take precedence over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hierfuse::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub split: SplitSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub slot_inner: Option<String>,
    pub slot_outer: Option<String>,
    pub slot_final: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub optimizer: Option<String>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub variant: Option<String>,
    pub dropout: Option<f64>,
    pub hidden1: Option<usize>,
    pub hidden2: Option<usize>,
    pub mask: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_coarse: Option<usize>,
    pub n_fine: Option<usize>,
    pub samples_per_class: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub d_text: Option<usize>,
    pub d_image_raw: Option<usize>,
    pub n_regions: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: Option<f64>,
}

impl FileConfig {
    /// Reads `path`; relative paths inside the file are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.dataset, &mut config.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Parses an optional string from the config file.
pub fn parse_opt<T: FromStr<Err = Error>>(value: Option<&String>) -> Result<Option<T>> {
    value.map(|s| s.parse()).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 1\n[train]\nepochz = 3\n").unwrap();
        assert!(matches!(FileConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "dataset = \"data\"\n[plan]\nslot_final = \"concat\"\n").unwrap();
        let config = FileConfig::load(&path).unwrap();
        assert_eq!(config.dataset.unwrap(), dir.path().join("data"));
        let kind: Option<hierfuse::FusionOpKind> = parse_opt(config.plan.slot_final.as_ref()).unwrap();
        assert_eq!(kind, Some(hierfuse::FusionOpKind::Concatenation));
    }
}
