//! Run configuration: every tunable of the pipeline in one serializable
//! record with a content digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::geometry::{CameraIntrinsics, TemplateParams, TubeModel, ViewSampling};
use crate::matching::MatchParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    /// Bins of the pose-error histogram plot.
    pub histogram_bins: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { histogram_bins: 18 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tube: TubeModel,
    pub camera: CameraIntrinsics,
    pub sampling: ViewSampling,
    pub features: FeatureParams,
    pub templates: TemplateParams,
    pub matching: MatchParams,
    pub eval: EvalParams,
    /// Seed for anything random (scene synthesis, crops).
    pub seed: u64,
}

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.tube.validate()?;
        self.camera.validate()?;
        let f = &self.features;
        if f.n0 < 2 || f.n0 > crate::features::MAX_LOOKUP_BINS {
            return Err(Error::BinCountExceedsLookup(f.n0));
        }
        let m = &self.matching;
        if !(0.0..=1.0).contains(&m.score_threshold) || !(0.0..=1.0).contains(&m.nms_iou) {
            return Err(Error::invalid("score_threshold and nms_iou must lie in [0, 1]"));
        }
        if m.stride == 0 || m.stride > f.spread.max(1) {
            return Err(Error::invalid(format!("stride {} must lie in [1, {}]", m.stride, f.spread.max(1))));
        }
        if self.templates.min_features > self.templates.max_features {
            return Err(Error::invalid("min_features exceeds max_features"));
        }
        if self.templates.max_features > 256 {
            return Err(Error::invalid("max_features must be at most 256"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Changes whenever any field
    /// changes.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
