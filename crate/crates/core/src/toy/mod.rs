//! A tiny conditional diffusion model on flattened masks: DDPM forward
//! process, epsilon objective, a time-gated condition path, an auxiliary
//! mask head trained with dice + BCE, and hand-written gradients.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod sample;
pub mod schedule;
pub mod train;

pub use adam::{adam_step, Adam};
pub use checkpoint::{Checkpoint, ScheduleSpec};
pub use loss::{loss_eps, loss_mask, loss_mask_grad};
pub use model::{condition_input, Example, LossParts, Noise, ToyDenoiser, ToyDims};
pub use sample::{ddpm_sample, ddpm_sample_with, ToyGenerator};
pub use schedule::{forward_noise, make_schedule, time_embedding, NoiseSchedule, ScheduleKind};
pub use train::{evaluate_conditioning, train, ConditionKind, TrainConfig, TrainReport};
