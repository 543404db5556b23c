//! Fusion of N per-sample masks into the next condition mask.
//!
//! Four strategies. Only `mask_mean` is the thresholded per-pixel average in
//! its literal form; the other three are our reading of the strategy names:
//!
//! | kind          | pixel is foreground iff                     |
//! |---------------|---------------------------------------------|
//! | `mask_mean`   | `sum_k masks_k / N >= tau`                  |
//! | `mask_vote`   | `sum_k masks_k > N / 2` (strict majority)   |
//! | `logits_mean` | `sum_k logits_k / N >= tau`                 |
//! | `logits_vote` | `#{k : logits_k >= 0.5} / N >= tau`         |

use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};
use crate::mask::{BinaryMask, ProbMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingKind {
    LogitsVote,
    LogitsMean,
    MaskVote,
    MaskMean,
}

impl VotingKind {
    pub fn name(self) -> &'static str {
        match self {
            VotingKind::LogitsVote => "logits_vote",
            VotingKind::LogitsMean => "logits_mean",
            VotingKind::MaskVote => "mask_vote",
            VotingKind::MaskMean => "mask_mean",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VotingStrategy {
    pub kind: VotingKind,
    pub tau: f64,
}

impl Default for VotingStrategy {
    fn default() -> Self {
        VotingStrategy {
            kind: VotingKind::LogitsVote,
            tau: 0.5,
        }
    }
}

impl VotingStrategy {
    pub fn new(kind: VotingKind, tau: f64) -> Self {
        VotingStrategy { kind, tau }
    }
}

pub fn fuse(masks: &[BinaryMask], logits: &[ProbMask], strategy: &VotingStrategy) -> Result<BinaryMask> {
    let first = masks.first().ok_or(ImdError::Empty("no masks to fuse"))?;
    if logits.len() != masks.len() {
        return Err(ImdError::LengthMismatch {
            expected: masks.len(),
            actual: logits.len(),
        });
    }
    if !(0.0..=1.0).contains(&strategy.tau) {
        return Err(ImdError::invalid(format!("tau {} outside [0,1]", strategy.tau)));
    }
    let dims = first.dims();
    for d in masks
        .iter()
        .map(BinaryMask::dims)
        .chain(logits.iter().map(ProbMask::dims))
    {
        if d != dims {
            return Err(ImdError::DimensionMismatch {
                left_w: dims.0,
                left_h: dims.1,
                right_w: d.0,
                right_h: d.1,
            });
        }
    }
    let n = masks.len();
    let nf = n as f64;
    let tau = strategy.tau;
    let data: Vec<u8> = (0..first.len())
        .map(|i| {
            let on = match strategy.kind {
                VotingKind::MaskMean => {
                    let c = masks.iter().filter(|m| m.get_index(i)).count();
                    c as f64 / nf >= tau
                }
                VotingKind::MaskVote => {
                    let c = masks.iter().filter(|m| m.get_index(i)).count();
                    2 * c > n
                }
                VotingKind::LogitsMean => {
                    let s: f64 = logits.iter().map(|l| l.as_slice()[i]).sum();
                    s / nf >= tau
                }
                VotingKind::LogitsVote => {
                    let c = logits.iter().filter(|l| l.as_slice()[i] >= 0.5).count();
                    c as f64 / nf >= tau
                }
            };
            on as u8
        })
        .collect();
    BinaryMask::from_vec(dims.0, dims.1, data)
}
