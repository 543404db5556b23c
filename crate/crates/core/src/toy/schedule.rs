//! DDPM noise schedules, the closed-form forward process and sinusoidal
//! time embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Betas linear from `1e-4` to `0.02`, both scaled by `1000 / Tg` so
    /// short schedules still reach near-zero `alpha_bar`.
    Linear,
    /// Squared-cosine `alpha_bar` with offset 0.008.
    Cosine,
}

/// Largest beta allowed; keeps `alpha_bar` strictly positive.
pub const MAX_BETA: f64 = 0.999;

/// Index `tau` runs over `0..=steps`; entry 0 is the clean signal.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    steps: usize,
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Build from `betas[1..=Tg]` (a leading zero is prepended).
    pub fn from_betas(betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(ImdError::invalid("schedule needs at least one step"));
        }
        let mut all = Vec::with_capacity(betas.len() + 1);
        all.push(0.0);
        let mut alpha_bar = Vec::with_capacity(betas.len() + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for &b in betas {
            if !(b > 0.0 && b < 1.0) {
                return Err(ImdError::invalid(format!("beta {b} not in (0,1)")));
            }
            acc *= 1.0 - b;
            all.push(b);
            alpha_bar.push(acc);
        }
        Ok(NoiseSchedule {
            steps: betas.len(),
            betas: all,
            alpha_bar,
        })
    }

    /// Build from `alpha_bar[1..=Tg]`, which must be strictly decreasing in (0, 1).
    pub fn from_alpha_bar(alpha_bar: &[f64]) -> Result<Self> {
        let mut prev = 1.0;
        let mut betas = Vec::with_capacity(alpha_bar.len());
        for &a in alpha_bar {
            if !(a > 0.0 && a < prev) {
                return Err(ImdError::invalid(format!(
                    "alpha_bar must decrease strictly within (0,1); got {a} after {prev}"
                )));
            }
            betas.push(1.0 - a / prev);
            prev = a;
        }
        let mut s = Self::from_betas(&betas)?;
        // Keep the caller's values exactly rather than the re-multiplied ones.
        s.alpha_bar[1..].copy_from_slice(alpha_bar);
        Ok(s)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn beta(&self, tau: usize) -> f64 {
        self.betas[tau]
    }

    pub fn alpha(&self, tau: usize) -> f64 {
        1.0 - self.betas[tau]
    }

    /// Variance of the ancestral posterior `q(x_{tau-1} | x_tau, x_0)`.
    pub fn posterior_variance(&self, tau: usize) -> f64 {
        if tau <= 1 {
            return 0.0;
        }
        (1.0 - self.alpha_bar[tau - 1]) / (1.0 - self.alpha_bar[tau]) * self.betas[tau]
    }
}

pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if steps < 1 {
        return Err(ImdError::invalid("schedule steps must be >= 1"));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::Linear => {
            let scale = 1000.0 / steps as f64;
            let (lo, hi) = ((1e-4 * scale).min(MAX_BETA), (0.02 * scale).min(MAX_BETA));
            (1..=steps)
                .map(|t| {
                    if steps == 1 {
                        hi
                    } else {
                        lo + (hi - lo) * (t - 1) as f64 / (steps - 1) as f64
                    }
                })
                .collect()
        }
        ScheduleKind::Cosine => {
            let s = 0.008;
            let f = |t: usize| {
                ((t as f64 / steps as f64 + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2)
                    .cos()
                    .powi(2)
            };
            (1..=steps)
                .map(|t| (1.0 - f(t) / f(t - 1)).clamp(1e-8, MAX_BETA))
                .collect()
        }
    };
    NoiseSchedule::from_betas(&betas)
}

/// `x_tau = sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps`.
pub fn forward_noise(x0: &[f64], tau: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    if x0.len() != eps.len() {
        return Err(ImdError::LengthMismatch {
            expected: x0.len(),
            actual: eps.len(),
        });
    }
    if tau > sched.steps() {
        return Err(ImdError::OutOfRange {
            index: tau,
            limit: sched.steps(),
        });
    }
    let a = sched.alpha_bar[tau];
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| sa * x + sb * e).collect())
}

/// Interleaved `[sin(tau w_0), cos(tau w_0), sin(tau w_1), ...]` with
/// `w_i = 10000^(-i / (dim/2))`.
pub fn time_embedding(tau: f64, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(ImdError::invalid(format!(
            "time embedding dim {dim} must be even and positive"
        )));
    }
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let w = 10000f64.powf(-(i as f64) / half as f64);
        let (s, c) = (tau * w).sin_cos();
        out.push(s);
        out.push(c);
    }
    Ok(out)
}
