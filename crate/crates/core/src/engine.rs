//! The iterative mask denoising loop.
//!
//! Starting from `M_0` (normally the visible mask), each step draws N images
//! from the generator conditioned on `M_{t-1}`, segments each with the
//! visible mask as prompt, fuses the N masks and unions the result with the
//! visible mask to get `M_t`. After the last step one more image is generated
//! from `M_T` as the final completion.
//!
//! Seeds: sample `k` of step `t` uses `seed_derive(root, t, k)` for both the
//! generator and the segmenter (in that order on one stream); the final image
//! uses `seed_derive(root, FINAL_STREAM, 0)`. Results do not depend on
//! whether samples run in parallel.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};
use crate::mask::{iou, mean_masks, BinaryMask, ProbMask};
use crate::par::{try_map_indexed, Execution};
use crate::pgm;
use crate::seed::{rng_from_seed, seed_derive, SeededRng, FINAL_STREAM};
use crate::segmenter::{segment, SegmenterKind};
use crate::shape_world::{GrayImage, Scene};
use crate::voting::{fuse, VotingStrategy};

/// Visible part of the object: its image and mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialObject {
    pub image: GrayImage,
    pub mask: BinaryMask,
}

/// The generation stage. Implementations only see the partial object and the
/// condition; nothing else about the scene.
pub trait Generator: Sync {
    fn generate(&self, partial: &PartialObject, condition: &BinaryMask, rng: &mut SeededRng) -> Result<GrayImage>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImdConfig {
    pub steps: u32,
    pub samples: u32,
    pub strategy: VotingStrategy,
    /// Stop once `iou(M_t, M_{t-1}) >= 1 - eps`. Zero disables early stopping.
    pub convergence_eps: f64,
    pub root_seed: u64,
}

impl Default for ImdConfig {
    fn default() -> Self {
        ImdConfig {
            steps: 5,
            samples: 5,
            strategy: VotingStrategy::default(),
            convergence_eps: 0.0,
            root_seed: 0,
        }
    }
}

impl ImdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(ImdError::invalid("steps must be >= 1"));
        }
        if self.samples < 1 {
            return Err(ImdError::invalid("samples must be >= 1"));
        }
        if !(self.convergence_eps >= 0.0 && self.convergence_eps <= 1.0) {
            return Err(ImdError::invalid(format!(
                "convergence_eps {} not in [0,1]",
                self.convergence_eps
            )));
        }
        if !(0.0..=1.0).contains(&self.strategy.tau) {
            return Err(ImdError::invalid(format!("tau {} not in [0,1]", self.strategy.tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub fused: BinaryMask,
    pub mean_prob: ProbMask,
    pub sample_masks: Vec<BinaryMask>,
    pub delta_iou: f64,
    pub fused_iou_truth: Option<f64>,
    pub mean_sample_iou_truth: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImdTrace {
    pub initial: BinaryMask,
    pub steps: Vec<StepRecord>,
    pub final_image: GrayImage,
    /// Step at which early stopping fired, if it did.
    pub converged_at: Option<u32>,
}

impl ImdTrace {
    pub fn final_mask(&self) -> &BinaryMask {
        self.steps.last().map(|s| &s.fused).unwrap_or(&self.initial)
    }

    pub fn steps_run(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn final_iou(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.fused_iou_truth)
    }
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(ImdError::DimensionMismatch {
            left_w: a.width(),
            left_h: a.height(),
            right_w: b.width(),
            right_h: b.height(),
        });
    }
    Ok(())
}

/// One application of the mask denoiser. `delta_iou` in the record compares
/// the fused mask with `condition`; truth metrics are left empty.
pub fn imd_step<G: Generator + ?Sized>(
    partial: &PartialObject,
    condition: &BinaryMask,
    gen: &G,
    seg: &SegmenterKind,
    cfg: &ImdConfig,
    t: u32,
    exec: Execution,
) -> Result<(BinaryMask, StepRecord)> {
    let inner = || -> Result<(BinaryMask, StepRecord)> {
        cfg.validate()?;
        if t < 1 {
            return Err(ImdError::invalid("step index must be >= 1"));
        }
        if condition.is_empty() {
            return Err(ImdError::Empty("condition mask"));
        }
        check_dims(&partial.mask, condition)?;
        let n = cfg.samples as usize;
        let outputs = try_map_indexed(n, exec, |k| {
            let mut rng = rng_from_seed(seed_derive(cfg.root_seed, t as u64, k as u64 + 1));
            let image = gen.generate(partial, condition, &mut rng)?;
            segment(&image, &partial.mask, seg, &mut rng)
        })?;
        let (masks, logits): (Vec<BinaryMask>, Vec<ProbMask>) = outputs.into_iter().unzip();
        let voted = fuse(&masks, &logits, &cfg.strategy)?;
        let (base, warning) = if voted.is_empty() {
            (
                condition.clone(),
                Some(format!("step {t}: fused mask empty, kept previous condition")),
            )
        } else {
            (voted, None)
        };
        let fused = base.union(&partial.mask)?;
        let record = StepRecord {
            step: t,
            delta_iou: iou(&fused, condition)?,
            mean_prob: mean_masks(&masks)?,
            fused: fused.clone(),
            sample_masks: masks,
            fused_iou_truth: None,
            mean_sample_iou_truth: None,
            warning,
        };
        Ok((fused, record))
    };
    inner().map_err(|e| e.at_step(t))
}

/// Run the loop from an explicit initial condition. `truth`, when given, is
/// used only to fill in metrics.
pub fn run_imd_from<G: Generator + ?Sized>(
    partial: &PartialObject,
    initial: &BinaryMask,
    truth: Option<&BinaryMask>,
    gen: &G,
    seg: &SegmenterKind,
    cfg: &ImdConfig,
    exec: Execution,
) -> Result<ImdTrace> {
    cfg.validate()?;
    if partial.mask.is_empty() {
        return Err(ImdError::Empty("partial mask"));
    }
    check_dims(&partial.mask, initial)?;
    if let Some(t) = truth {
        check_dims(&partial.mask, t)?;
    }
    let mut condition = initial.clone();
    let mut steps = Vec::with_capacity(cfg.steps as usize);
    let mut converged_at = None;
    for t in 1..=cfg.steps {
        let (fused, mut record) = imd_step(partial, &condition, gen, seg, cfg, t, exec)?;
        if let Some(truth) = truth {
            record.fused_iou_truth = Some(iou(&fused, truth)?);
            let total: f64 = record.sample_masks.iter().map(|m| iou(m, truth)).sum::<Result<f64>>()?;
            record.mean_sample_iou_truth = Some(total / record.sample_masks.len() as f64);
        }
        let stop = cfg.convergence_eps > 0.0 && record.delta_iou >= 1.0 - cfg.convergence_eps;
        steps.push(record);
        condition = fused;
        if stop {
            converged_at = Some(t);
            break;
        }
    }
    let mut rng = rng_from_seed(seed_derive(cfg.root_seed, FINAL_STREAM, 0));
    let final_image = gen
        .generate(partial, &condition, &mut rng)
        .map_err(|e| e.at_step(FINAL_STREAM as u32))?;
    Ok(ImdTrace {
        initial: initial.clone(),
        steps,
        final_image,
        converged_at,
    })
}

/// Run the loop on a scene, starting from its visible mask.
pub fn run_imd<G: Generator + ?Sized>(
    scene: &Scene,
    gen: &G,
    seg: &SegmenterKind,
    cfg: &ImdConfig,
    exec: Execution,
) -> Result<ImdTrace> {
    run_imd_from(
        &scene.partial_object(),
        &scene.partial_mask,
        Some(&scene.complete_mask),
        gen,
        seg,
        cfg,
        exec,
    )
}

/// First step whose fused mask agrees with its condition to within `eps`
/// (IoU at least `1 - eps`), or the number of steps run if none did.
pub fn convergence_step(trace: &ImdTrace, eps: f64) -> u32 {
    trace
        .steps
        .iter()
        .find(|s| s.delta_iou >= 1.0 - eps)
        .map(|s| s.step)
        .unwrap_or(trace.steps_run())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn trace_csv(trace: &ImdTrace) -> String {
    let mut s = String::from("step,delta_iou,fused_iou_truth,mean_sample_iou_truth\n");
    for r in &trace.steps {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.step,
            r.delta_iou,
            opt(r.fused_iou_truth),
            opt(r.mean_sample_iou_truth)
        );
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSummary {
    pub config: ImdConfig,
    pub steps_run: u32,
    pub converged_at: Option<u32>,
    pub initial_iou_truth: Option<f64>,
    pub final_iou_truth: Option<f64>,
    pub final_delta_iou: f64,
    pub final_area: usize,
    pub warnings: Vec<String>,
}

pub fn summarize(trace: &ImdTrace, cfg: &ImdConfig, truth: Option<&BinaryMask>) -> Result<TraceSummary> {
    Ok(TraceSummary {
        config: *cfg,
        steps_run: trace.steps_run(),
        converged_at: trace.converged_at,
        initial_iou_truth: truth.map(|t| iou(&trace.initial, t)).transpose()?,
        final_iou_truth: trace.final_iou(),
        final_delta_iou: trace.steps.last().map(|s| s.delta_iou).unwrap_or(1.0),
        final_area: trace.final_mask().area(),
        warnings: trace.steps.iter().filter_map(|s| s.warning.clone()).collect(),
    })
}

/// Write per-step PGMs, `trace.csv`, `summary.json` and `final.pgm` into `dir`.
pub fn export_trace(trace: &ImdTrace, cfg: &ImdConfig, truth: Option<&BinaryMask>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in &trace.steps {
        pgm::write_binary(&dir.join(format!("step{:02}_fused.pgm", r.step)), &r.fused)?;
        pgm::write_prob(&dir.join(format!("step{:02}_meanprob.pgm", r.step)), &r.mean_prob)?;
    }
    fs::write(dir.join("final.pgm"), trace.final_image.to_pgm())?;
    fs::write(dir.join("trace.csv"), trace_csv(trace))?;
    let summary = summarize(trace, cfg, truth)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}
