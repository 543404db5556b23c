//! JSON checkpoints: a header with dimensions and schedule, then one array
//! per parameter group with its shape.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ToyDenoiser, ToyDims};
use super::schedule::{make_schedule, NoiseSchedule, ScheduleKind};
use crate::error::{ImdError, Result};

pub const CHECKPOINT_FORMAT: &str = "imd-toy-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub kind: ScheduleKind,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_schedule(self.steps, self.kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: ToyDims,
    pub schedule: ScheduleSpec,
    pub groups: Vec<GroupRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &ToyDenoiser, schedule: ScheduleSpec) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dims: *model.dims(),
            schedule,
            groups: model
                .groups()
                .iter()
                .map(|g| GroupRecord {
                    name: g.name.to_string(),
                    shape: [g.rows, g.cols],
                    data: model.params()[g.range()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<ToyDenoiser> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(ImdError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let empty = ToyDenoiser::zeros(self.dims)?;
        if empty.groups().len() != self.groups.len() {
            return Err(ImdError::Checkpoint(format!(
                "expected {} groups, found {}",
                empty.groups().len(),
                self.groups.len()
            )));
        }
        let mut params = Vec::with_capacity(empty.params().len());
        for (want, got) in empty.groups().iter().zip(&self.groups) {
            if want.name != got.name || [want.rows, want.cols] != got.shape || got.data.len() != want.len() {
                return Err(ImdError::Checkpoint(format!(
                    "group {} shape {:?} does not match expected {} {:?}",
                    got.name,
                    got.shape,
                    want.name,
                    [want.rows, want.cols]
                )));
            }
            params.extend_from_slice(&got.data);
        }
        ToyDenoiser::from_params(self.dims, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| ImdError::Checkpoint(format!("{}: {e}", path.display())))
    }
}
