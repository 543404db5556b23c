//! Training data, the training loop and a conditioning evaluation for the
//! toy model.
//!
//! Each training example is one ellipse on a small canvas. The complete mask
//! is the target; two independent occlusions give the partial and
//! intermediate masks, and the condition is drawn uniformly from partial,
//! intermediate and complete.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint::ScheduleSpec;
use super::model::{condition_input, Example, LossParts, Noise, ToyDenoiser, ToyDims};
use super::sample::ddpm_sample;
use super::schedule::{NoiseSchedule, ScheduleKind};
use crate::error::{ImdError, Result};
use crate::mask::{iou, BinaryMask};
use crate::occlusion::{double_occlude, OcclusionSpec};
use crate::seed::{rng_from_seed, seed_derive, SeededRng, AUX_STREAM};
use crate::shape_world::{realize_image, render, sample_shape};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Canvas side; the model sees `resolution^2` pixels.
    pub resolution: usize,
    pub cond_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
    pub schedule_steps: usize,
    pub schedule: ScheduleKind,
    pub lambda_ce: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub semi_axis_range: [f64; 2],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            resolution: 16,
            cond_dim: 64,
            time_dim: 32,
            hidden: 256,
            schedule_steps: 100,
            schedule: ScheduleKind::Linear,
            lambda_ce: 1.0,
            lr: 1e-3,
            batch: 8,
            epochs: 100,
            steps_per_epoch: 50,
            semi_axis_range: [2.5, 6.0],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn dims(&self) -> ToyDims {
        ToyDims {
            pixels: self.resolution * self.resolution,
            cond_dim: self.cond_dim,
            time_dim: self.time_dim,
            hidden: self.hidden,
        }
    }

    pub fn schedule_spec(&self) -> ScheduleSpec {
        ScheduleSpec {
            steps: self.schedule_steps,
            kind: self.schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims().validate()?;
        if self.resolution < 4 {
            return Err(ImdError::invalid("toy resolution must be >= 4"));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(ImdError::invalid(format!("learning rate {} must be > 0", self.lr)));
        }
        if self.batch < 1 {
            return Err(ImdError::invalid("batch must be >= 1"));
        }
        if self.lambda_ce.is_nan() || self.lambda_ce < 0.0 {
            return Err(ImdError::invalid("lambda_ce must be >= 0"));
        }
        if self.schedule_steps < 1 {
            return Err(ImdError::invalid("schedule_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Which mask the model is conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Partial,
    Intermediate,
    Complete,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 3] = [
        ConditionKind::Partial,
        ConditionKind::Intermediate,
        ConditionKind::Complete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionKind::Partial => "partial",
            ConditionKind::Intermediate => "intermediate",
            ConditionKind::Complete => "complete",
        }
    }
}

/// One toy scene with all three candidate conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyCase {
    pub complete: BinaryMask,
    pub intermediate: BinaryMask,
    pub partial: BinaryMask,
    pub partial_image: Vec<f64>,
}

impl ToyCase {
    pub fn condition(&self, kind: ConditionKind) -> &BinaryMask {
        match kind {
            ConditionKind::Partial => &self.partial,
            ConditionKind::Intermediate => &self.intermediate,
            ConditionKind::Complete => &self.complete,
        }
    }

    pub fn example(&self, kind: ConditionKind) -> Example {
        Example {
            x0: as_f64(&self.complete),
            cond_input: condition_input(&self.partial_image, &as_f64(self.condition(kind))),
        }
    }
}

fn as_f64(m: &BinaryMask) -> Vec<f64> {
    m.as_slice().iter().map(|&v| v as f64).collect()
}

pub fn sample_case(cfg: &TrainConfig, rng: &mut SeededRng) -> Result<ToyCase> {
    let n = cfg.resolution;
    let spec = OcclusionSpec::default();
    for _ in 0..1000 {
        let shape = sample_shape(rng, n, n, [1, 1], cfg.semi_axis_range)?;
        let complete = render(&shape, n, n);
        let appearance = rng.random_range(0.6..=1.0);
        let d = double_occlude(&complete, &spec, rng)?;
        if d.partial.is_empty() || d.partial == complete {
            continue;
        }
        return Ok(ToyCase {
            partial_image: realize_image(&d.partial, appearance).as_slice().to_vec(),
            complete,
            intermediate: d.intermediate,
            partial: d.partial,
        });
    }
    Err(ImdError::RetryExhausted(
        "toy case with a nonempty, proper partial mask".into(),
    ))
}

fn draw_noise(pixels: usize, steps: usize, rng: &mut SeededRng) -> Noise {
    Noise {
        tau: rng.random_range(1..=steps),
        eps: (0..pixels).map(|_| StandardNormal.sample(rng)).collect(),
    }
}

fn draw_batch(cfg: &TrainConfig, n: usize, rng: &mut SeededRng) -> Result<(Vec<Example>, Vec<Noise>)> {
    let mut ex = Vec::with_capacity(n);
    let mut nz = Vec::with_capacity(n);
    for _ in 0..n {
        let case = sample_case(cfg, rng)?;
        let kind = ConditionKind::ALL[rng.random_range(0..3)];
        ex.push(case.example(kind));
        nz.push(draw_noise(cfg.resolution * cfg.resolution, cfg.schedule_steps, rng));
    }
    Ok((ex, nz))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_eps: f64,
    pub loss_mask: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    /// Held-out loss before the first update.
    pub initial: LossParts,
    /// Held-out loss after the last update.
    pub final_loss: LossParts,
    pub epochs: Vec<EpochLog>,
}

pub fn log_csv(epochs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss_eps,loss_mask,total\n");
    for e in epochs {
        let _ = writeln!(s, "{},{},{},{}", e.epoch, e.loss_eps, e.loss_mask, e.total);
    }
    s
}

pub const EVAL_BATCH: usize = 64;

/// Train from a fresh initialisation. Deterministic in `cfg.seed`.
pub fn train(cfg: &TrainConfig) -> Result<(ToyDenoiser, NoiseSchedule, TrainReport)> {
    cfg.validate()?;
    let sched = cfg.schedule_spec().build()?;
    let mut model = ToyDenoiser::init(cfg.dims(), &mut rng_from_seed(seed_derive(cfg.seed, AUX_STREAM, 0)))?;
    let (eval_x, eval_n) = draw_batch(
        cfg,
        EVAL_BATCH,
        &mut rng_from_seed(seed_derive(cfg.seed, AUX_STREAM, 1)),
    )?;
    let initial = model.loss(&eval_x, &eval_n, &sched, cfg.lambda_ce)?;
    let mut rng = rng_from_seed(seed_derive(cfg.seed, AUX_STREAM, 2));
    let mut opt = Adam::new(model.params().len(), cfg.lr);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut acc = LossParts::default();
        for _ in 0..cfg.steps_per_epoch {
            let (x, n) = draw_batch(cfg, cfg.batch, &mut rng)?;
            let (parts, grads) = model.loss_and_grad(&x, &n, &sched, cfg.lambda_ce)?;
            opt.step(model.params_mut(), &grads)?;
            acc.eps += parts.eps;
            acc.mask += parts.mask;
            acc.total += parts.total;
        }
        let k = cfg.steps_per_epoch.max(1) as f64;
        epochs.push(EpochLog {
            epoch,
            loss_eps: acc.eps / k,
            loss_mask: acc.mask / k,
            total: acc.total / k,
        });
    }
    let final_loss = model.loss(&eval_x, &eval_n, &sched, cfg.lambda_ce)?;
    Ok((
        model,
        sched,
        TrainReport {
            initial,
            final_loss,
            epochs,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditioningEval {
    pub samples: usize,
    /// Mean IoU to the complete mask of thresholded samples, per condition.
    pub mean_iou: Vec<(ConditionKind, f64)>,
}

impl ConditioningEval {
    pub fn get(&self, kind: ConditionKind) -> Option<f64> {
        self.mean_iou.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v)
    }
}

/// Sample once per case and condition, threshold at 0.5 and score against
/// the complete mask. Every condition sees the same cases and noise seeds.
pub fn evaluate_conditioning(
    model: &ToyDenoiser,
    sched: &NoiseSchedule,
    cfg: &TrainConfig,
    cases: usize,
    seed: u64,
) -> Result<ConditioningEval> {
    let mut case_rng = rng_from_seed(seed_derive(seed, AUX_STREAM, 3));
    let list: Vec<ToyCase> = (0..cases)
        .map(|_| sample_case(cfg, &mut case_rng))
        .collect::<Result<_>>()?;
    let n = cfg.resolution;
    let mut mean_iou = Vec::new();
    for kind in ConditionKind::ALL {
        let mut total = 0.0;
        for (i, case) in list.iter().enumerate() {
            let ex = case.example(kind);
            let mut rng = rng_from_seed(seed_derive(seed, 4, i as u64));
            let x = ddpm_sample(model, &ex.cond_input, sched, &mut rng)?;
            let m = BinaryMask::from_vec(n, n, x.iter().map(|&v| (v >= 0.5) as u8).collect())?;
            total += iou(&m, &case.complete)?;
        }
        mean_iou.push((kind, total / cases.max(1) as f64));
    }
    Ok(ConditioningEval {
        samples: cases,
        mean_iou,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_are_nested() {
        let cfg = TrainConfig::default();
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let c = sample_case(&cfg, &mut rng).unwrap();
            assert!(c.partial.is_subset_of(&c.intermediate));
            assert!(c.intermediate.is_subset_of(&c.complete));
            assert!(!c.partial.is_empty());
            assert_eq!(c.partial_image.len(), 256);
        }
    }

    #[test]
    fn tiny_training_run_is_deterministic() {
        let cfg = TrainConfig {
            resolution: 8,
            cond_dim: 6,
            time_dim: 4,
            hidden: 12,
            schedule_steps: 10,
            epochs: 2,
            steps_per_epoch: 3,
            semi_axis_range: [1.5, 3.0],
            ..Default::default()
        };
        let (a, _, ra) = train(&cfg).unwrap();
        let (b, _, rb) = train(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.epochs.len(), 2);
        assert!(log_csv(&ra.epochs).starts_with("epoch,loss_eps,loss_mask,total\n"));
    }
}
