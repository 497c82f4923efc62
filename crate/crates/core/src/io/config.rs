//! Run configuration: the tunable parameters of the whole pipeline, with
//! defaults matching the masonry-arch setup (tunnel-class scenes typically
//! shrink `voxel_size` to 0.01 and `feature_radius` to 0.6).

use crate::error::{Error, Result};
use std::path::Path;

/// Which descriptor the pipeline builds and scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Geometric histograms only.
    Fpfh,
    /// Intensity-difference histogram only.
    Intensity,
    /// Geometric and intensity blocks fused into one row.
    Multi,
}

impl FeatureMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fpfh" => Ok(FeatureMode::Fpfh),
            "intensity" => Ok(FeatureMode::Intensity),
            "multi" => Ok(FeatureMode::Multi),
            other => Err(Error::Config(format!(
                "unknown feature mode '{other}' (expected fpfh, intensity or multi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub voxel_size: f64,
    pub normal_radius: f64,
    pub feature_radius: f64,
    pub intensity_radius: f64,
    pub bins: usize,
    pub bank_size: usize,
    pub seed: u64,
    pub thresholds: Vec<f64>,
    pub feature_mode: FeatureMode,
    /// Scale on the intensity block when fusing (multi mode).
    pub intensity_weight: f64,
    /// Scanner position used to orient normals; `None` flips toward +z.
    pub normal_viewpoint: Option<[f64; 3]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            voxel_size: 0.02,
            normal_radius: 0.12,
            feature_radius: 1.0,
            intensity_radius: 1.0,
            bins: 30,
            bank_size: 4000,
            seed: 7,
            thresholds: vec![0.3, 0.5],
            feature_mode: FeatureMode::Multi,
            intensity_weight: 1.0,
            normal_viewpoint: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 5] = [
            ("voxel_size", self.voxel_size),
            ("normal_radius", self.normal_radius),
            ("feature_radius", self.feature_radius),
            ("intensity_radius", self.intensity_radius),
            ("intensity_weight", self.intensity_weight),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be >= 1".to_string()));
        }
        if self.bank_size == 0 {
            return Err(Error::Config("bank_size must be >= 1".to_string()));
        }
        if self.thresholds.is_empty() {
            return Err(Error::Config("thresholds must not be empty".to_string()));
        }
        for &t in &self.thresholds {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!(
                    "thresholds are fractions of the max score and must lie in (0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
