//! Pipeline configuration file.

use dogm_core::cluster::ExtractParams;
use dogm_core::corrector::OracleNoise;
use dogm_core::{FilterParams, FusionParams, GridSpec, IsmParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let s = GridSpec::default();
        Self {
            width_cells: s.width_cells,
            height_cells: s.height_cells,
            resolution: s.resolution,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec::centered(self.width_cells, self.height_cells, self.resolution)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CorrectorChoice {
    #[default]
    None,
    Oracle(OracleNoise),
    /// Path pattern with a `{frame}` placeholder, or a directory of `frame_NNNNNN.dogc`.
    File(String),
}

impl CorrectorChoice {
    /// Parses the command-line form `none`, `oracle` or `file:PATTERN`.
    /// `oracle` keeps the noise configured in `current` when it is already an oracle.
    pub fn from_flag(flag: &str, current: &CorrectorChoice) -> Result<Self, ConfigError> {
        match flag {
            "none" => Ok(CorrectorChoice::None),
            "oracle" => Ok(match current {
                CorrectorChoice::Oracle(n) => CorrectorChoice::Oracle(*n),
                _ => CorrectorChoice::Oracle(OracleNoise::default()),
            }),
            f => match f.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(CorrectorChoice::File(p.to_string())),
                _ => Err(ConfigError::Invalid(format!(
                    "corrector must be none, oracle or file:PATTERN, got {f:?}"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Scenario file, relative to the configuration file.
    pub scenario: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub ism: IsmParams,
    /// Free evidence over the unobstructed field of view.
    #[serde(default = "yes")]
    pub free_sweep: bool,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub fusion: FusionParams,
    #[serde(default)]
    pub corrector: CorrectorChoice,
    #[serde(default)]
    pub extract: ExtractParams,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub render: bool,
    #[serde(default)]
    pub dump_particles: bool,
    /// Overrides the filter, oracle and scenario seeds when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_decay")]
    pub transition_decay: f64,
    #[serde(default = "default_label_speed")]
    pub label_speed_threshold: f64,
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_decay() -> f64 {
    0.02
}

fn default_label_speed() -> f64 {
    0.5
}

impl PipelineConfig {
    /// Configuration with every default and the given scenario path.
    pub fn with_scenario(scenario: PathBuf) -> Self {
        serde_json::from_value(serde_json::json!({ "scenario": scenario })).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: dogm_core::DogmError| ConfigError::Invalid(e.to_string());
        self.grid.spec().validate().map_err(wrap)?;
        self.ism.validate().map_err(wrap)?;
        self.filter.validate().map_err(wrap)?;
        self.fusion.validate().map_err(wrap)?;
        if let CorrectorChoice::Oracle(n) = &self.corrector {
            n.validate().map_err(wrap)?;
        }
        if !(self.extract.eps > 0.0 && self.extract.min_pts > 0 && self.extract.tau_age > 0.0) {
            return Err(ConfigError::Invalid("extract parameters must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.transition_decay) {
            return Err(ConfigError::Invalid("transition_decay must lie in [0, 1]".into()));
        }
        if !(self.label_speed_threshold >= 0.0) {
            return Err(ConfigError::Invalid("label_speed_threshold must be non-negative".into()));
        }
        if !self.scenario.is_file() {
            return Err(ConfigError::Invalid(format!(
                "scenario {} does not exist",
                self.scenario.display()
            )));
        }
        Ok(())
    }
}

/// Reads a configuration file and resolves the scenario path against it.
pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    if cfg.scenario.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.scenario = dir.join(&cfg.scenario);
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrector_variants_parse() {
        let c: CorrectorChoice = serde_json::from_str(r#""none""#).unwrap();
        assert_eq!(c, CorrectorChoice::None);
        let c: CorrectorChoice = serde_json::from_str(r#"{"oracle": {"miss_rate": 0.2}}"#).unwrap();
        assert!(matches!(c, CorrectorChoice::Oracle(n) if n.miss_rate == 0.2));
        let c: CorrectorChoice = serde_json::from_str(r#"{"file": "x/{frame}.dogc"}"#).unwrap();
        assert_eq!(c, CorrectorChoice::File("x/{frame}.dogc".into()));
    }

    #[test]
    fn flag_forms() {
        let cur = CorrectorChoice::None;
        assert_eq!(CorrectorChoice::from_flag("file:a", &cur).unwrap(), CorrectorChoice::File("a".into()));
        assert!(CorrectorChoice::from_flag("magic", &cur).is_err());
        assert!(CorrectorChoice::from_flag("file:", &cur).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"scenario": "s.json", "bogus": 1}"#).is_err());
    }
}
