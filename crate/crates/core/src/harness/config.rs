//! Experiment configuration: one JSON document with a `version` field.
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::ImdConfig;
use crate::error::{ImdError, Result};
use crate::occlusion::OcclusionSpec;
use crate::segmenter::SegmenterKind;
use crate::shape_world::{OracleParams, WorldParams};
use crate::toy::train::{ConditionKind, TrainConfig};
use crate::voting::VotingKind;

pub const CONFIG_VERSION: u32 = 1;

/// The swept parameter and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Steps(Vec<u32>),
    Samples(Vec<u32>),
    /// Target occlusion rates; the benchmark is rebuilt for each.
    OcclusionRate(Vec<f64>),
    /// Segmentation noise as a fraction of mask area.
    NoiseDegree(Vec<f64>),
    Voting(Vec<VotingKind>),
    /// Which mask conditions the first step.
    MaskType(Vec<ConditionKind>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Steps(_) => "steps",
            SweepAxis::Samples(_) => "samples",
            SweepAxis::OcclusionRate(_) => "occlusion_rate",
            SweepAxis::NoiseDegree(_) => "noise_degree",
            SweepAxis::Voting(_) => "voting",
            SweepAxis::MaskType(_) => "mask_type",
        }
    }

    pub fn len(&self) -> usize {
        self.labels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value labels as written to CSV.
    pub fn labels(&self) -> Vec<String> {
        match self {
            SweepAxis::Steps(v) | SweepAxis::Samples(v) => v.iter().map(u32::to_string).collect(),
            SweepAxis::OcclusionRate(v) | SweepAxis::NoiseDegree(v) => v.iter().map(f64::to_string).collect(),
            SweepAxis::Voting(v) => v.iter().map(|k| k.name().to_string()).collect(),
            SweepAxis::MaskType(v) => v.iter().map(|k| k.name().to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub world: WorldParams,
    /// Occlusion family used to build intermediate masks.
    #[serde(default)]
    pub occlusion: OcclusionSpec,
    #[serde(default = "default_target_rate")]
    pub target_rate: f64,
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
    #[serde(default)]
    pub oracle: OracleParams,
    #[serde(default)]
    pub segmenter: SegmenterKind,
    #[serde(default)]
    pub imd: ImdConfig,
    #[serde(default)]
    pub sweep: Option<SweepAxis>,
    #[serde(default = "default_scene_count")]
    pub scene_count: usize,
    #[serde(default)]
    pub root_seed: u64,
    /// A step counts as converged once `iou(M_t, M_{t-1}) >= 1 - conv_eps`.
    #[serde(default = "default_conv_eps")]
    pub conv_eps: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub toy: TrainConfig,
}

fn default_target_rate() -> f64 {
    0.4
}

fn default_rate_tol() -> f64 {
    0.02
}

fn default_scene_count() -> usize {
    50
}

fn default_conv_eps() -> f64 {
    0.05
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            world: WorldParams::default(),
            occlusion: OcclusionSpec::default(),
            target_rate: default_target_rate(),
            rate_tol: default_rate_tol(),
            oracle: OracleParams::default(),
            segmenter: SegmenterKind::default(),
            imd: ImdConfig::default(),
            sweep: None,
            scene_count: default_scene_count(),
            root_seed: 0,
            conv_eps: default_conv_eps(),
            output_dir: None,
            toy: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(ImdError::invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.world.validate()?;
        self.occlusion.validate()?;
        self.oracle.validate()?;
        self.segmenter.validate()?;
        self.imd.validate()?;
        self.toy.validate()?;
        check_rate(self.target_rate)?;
        if !(self.rate_tol >= 0.0 && self.rate_tol < 0.5) {
            return Err(ImdError::invalid(format!("rate_tol {} not in [0, 0.5)", self.rate_tol)));
        }
        if self.scene_count < 1 {
            return Err(ImdError::invalid("scene_count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.conv_eps) {
            return Err(ImdError::invalid(format!("conv_eps {} not in [0,1]", self.conv_eps)));
        }
        if let Some(axis) = &self.sweep {
            if axis.is_empty() {
                return Err(ImdError::invalid(format!("sweep axis {} has no values", axis.name())));
            }
            match axis {
                SweepAxis::Steps(v) | SweepAxis::Samples(v) if v.contains(&0) => {
                    return Err(ImdError::invalid(format!("{} values must be >= 1", axis.name())));
                }
                SweepAxis::OcclusionRate(v) => v.iter().try_for_each(|&r| check_rate(r))?,
                SweepAxis::NoiseDegree(v) if v.iter().any(|&p| !(p >= 0.0 && p.is_finite())) => {
                    return Err(ImdError::invalid("noise degrees must be finite and >= 0"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parse and validate. Every failure, including a missing file, is
    /// reported as [`ImdError::Config`] naming `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let err = |message: String| ImdError::Config {
            path: path.to_path_buf(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        cfg.validate().map_err(|e| err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ImdError::invalid(format!("occlusion rate {r} must lie in (0,1)")));
    }
    Ok(())
}
