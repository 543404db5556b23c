//! Ancestral DDPM sampling and the adapter that lets a trained toy model act
//! as the generator in the denoising loop.

use rand_distr::{Distribution, StandardNormal};

use super::model::{condition_input, ToyDenoiser};
use super::schedule::NoiseSchedule;
use crate::engine::{Generator, PartialObject};
use crate::error::{ImdError, Result};
use crate::mask::BinaryMask;
use crate::seed::SeededRng;
use crate::shape_world::GrayImage;

/// Run the reverse chain from `x_Tg ~ N(0, I)` using `predict(x, tau)` as the
/// noise estimate. Each step forms the implied `x0`, clamps it to `[0, 1]`
/// when `clip_x0` is set, and moves to the posterior mean of
/// `q(x_{tau-1} | x_tau, x0)`. With `zero_variance` no noise is injected
/// between steps. The result is clamped to `[0, 1]`.
pub fn ddpm_sample_with<F>(
    sched: &NoiseSchedule,
    dim: usize,
    mut predict: F,
    rng: &mut SeededRng,
    zero_variance: bool,
    clip_x0: bool,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], usize) -> Result<Vec<f64>>,
{
    let ab = sched.alpha_bar();
    let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    for tau in (1..=sched.steps()).rev() {
        let eps = predict(&x, tau)?;
        if eps.len() != dim {
            return Err(ImdError::LengthMismatch {
                expected: dim,
                actual: eps.len(),
            });
        }
        let (a, a_prev) = (ab[tau], ab[tau - 1]);
        let c0 = a_prev.sqrt() * sched.beta(tau) / (1.0 - a);
        let ct = sched.alpha(tau).sqrt() * (1.0 - a_prev) / (1.0 - a);
        let sigma = if zero_variance {
            0.0
        } else {
            sched.posterior_variance(tau).sqrt()
        };
        for (xi, ei) in x.iter_mut().zip(&eps) {
            let mut x0 = (*xi - (1.0 - a).sqrt() * ei) / a.sqrt();
            if clip_x0 {
                x0 = x0.clamp(0.0, 1.0);
            }
            let mean = c0 * x0 + ct * *xi;
            *xi = if sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                mean + sigma * z
            } else {
                mean
            };
        }
    }
    Ok(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

pub fn ddpm_sample(
    model: &ToyDenoiser,
    cond_input: &[f64],
    sched: &NoiseSchedule,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let dim = model.dims().pixels;
    ddpm_sample_with(
        sched,
        dim,
        |x, tau| Ok(model.forward(x, cond_input, tau)?.eps_hat),
        rng,
        false,
        true,
    )
}

/// A trained toy model used as the generator. The canvas must have
/// `model.dims().pixels` pixels.
#[derive(Clone, Debug)]
pub struct ToyGenerator {
    pub model: ToyDenoiser,
    pub schedule: NoiseSchedule,
}

impl Generator for ToyGenerator {
    fn generate(&self, partial: &PartialObject, condition: &BinaryMask, rng: &mut SeededRng) -> Result<GrayImage> {
        let (w, h) = partial.mask.dims();
        if w * h != self.model.dims().pixels || condition.dims() != (w, h) {
            return Err(ImdError::invalid(format!(
                "toy generator expects {} pixels, got {}x{}",
                self.model.dims().pixels,
                w,
                h
            )));
        }
        let cond: Vec<f64> = condition.as_slice().iter().map(|&v| v as f64).collect();
        let u = condition_input(partial.image.as_slice(), &cond);
        let x = ddpm_sample(&self.model, &u, &self.schedule, rng)?;
        GrayImage::from_vec(w, h, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::toy::model::ToyDims;
    use crate::toy::schedule::{make_schedule, ScheduleKind};

    #[test]
    fn single_step_schedule_is_finite() {
        let sched = make_schedule(1, ScheduleKind::Linear).unwrap();
        let m = ToyDenoiser::init(
            ToyDims {
                pixels: 16,
                cond_dim: 4,
                time_dim: 4,
                hidden: 8,
            },
            &mut rng_from_seed(0),
        )
        .unwrap();
        let out = ddpm_sample(&m, &[0.5; 32], &sched, &mut rng_from_seed(1)).unwrap();
        assert_eq!(out.len(), 16);
        assert!(out.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ideal_noise_oracle_recovers_target() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
            let sched = make_schedule(50, kind).unwrap();
            let x0: Vec<f64> = (0..12).map(|i| (i % 3) as f64 / 2.0).collect();
            let ab = sched.alpha_bar().to_vec();
            // The true noise consistent with the current x and the known x0.
            let oracle = |x: &[f64], tau: usize| {
                let a = ab[tau];
                Ok(x.iter()
                    .zip(&x0)
                    .map(|(xi, x0i)| (xi - a.sqrt() * x0i) / (1.0 - a).sqrt())
                    .collect())
            };
            let out = ddpm_sample_with(&sched, 12, oracle, &mut rng_from_seed(4), true, false).unwrap();
            for (a, b) in out.iter().zip(&x0) {
                assert!((a - b).abs() < 1e-9, "{kind:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sampler_checks_predictor_width() {
        let sched = make_schedule(3, ScheduleKind::Linear).unwrap();
        let bad = |_: &[f64], _: usize| Ok(vec![0.0; 2]);
        assert!(ddpm_sample_with(&sched, 4, bad, &mut rng_from_seed(0), false, true).is_err());
    }
}
