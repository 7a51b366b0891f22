//! Run configuration: one JSON document with a section per stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::ClassifierConfig;
use crate::dataset::VideoSpec;
use crate::error::{Error, Result};
use crate::hmi::HmiConfig;
use crate::segmentation::SegmentationConfig;
use crate::tracking::TrackingConfig;

/// Version of the run-configuration schema.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Input and output locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Dataset directory holding `manifest.csv`.
    pub dataset: PathBuf,
    pub weights: PathBuf,
    /// Directory for reports, logs and traces.
    pub out_dir: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            weights: "weights.gkw".into(),
            out_dir: "out".into(),
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Folds the evaluated subset is cut into for the per-fold accuracy t-test.
    pub folds: usize,
    /// Test value of the t-test, in percent accuracy.
    pub t_mu: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { folds: 10, t_mu: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub segmentation: SegmentationConfig,
    pub classifier: ClassifierConfig,
    pub tracking: TrackingConfig,
    pub hmi: HmiConfig,
    pub eval: EvalConfig,
    /// Synthetic footage used by `segment`, `track`, `run` and `bench`
    /// when no recorded input is given.
    pub video: VideoSpec,
    pub io: IoConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("{context}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.classifier.validate()?;
        self.tracking.validate()?;
        self.hmi.validate()?;
        self.video.validate().map_err(|e| Error::Config(format!("video: {e}")))?;
        if self.classifier.input_side != self.segmentation.input_side {
            return Err(Error::Config(format!(
                "classifier.input_side {} differs from segmentation.input_side {}",
                self.classifier.input_side, self.segmentation.input_side
            )));
        }
        if self.eval.folds < 2 || !self.eval.t_mu.is_finite() {
            return Err(Error::Config("eval.folds must be >= 2 and eval.t_mu finite".into()));
        }
        Ok(())
    }

    /// Apply `section.key=value` overrides. Values parse as JSON and fall
    /// back to plain strings; the result is re-validated.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut doc = serde_json::to_value(&self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(format!("after overrides: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not a section", parts[..i].join("."))))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key `{}`", parts[..=i].join("."))))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(Error::Config("empty override key".into()))
}
