//! Central finite-difference check of the toy model's analytic gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::model::{Example, Noise, ToyDenoiser, ToyDims};
use super::schedule::{make_schedule, ScheduleKind};
use crate::error::Result;
use crate::seed::rng_from_seed;

pub const DEFAULT_H: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Dimensions used for the exhaustive check: every weight is perturbed, so
/// the model is kept small.
pub fn check_dims() -> ToyDims {
    ToyDims {
        pixels: 16,
        cond_dim: 6,
        time_dim: 8,
        hidden: 10,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub count: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub h: f64,
    pub tol: f64,
    pub groups: Vec<GroupCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_err < self.tol)
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs() + 1e-12)
}

/// A random model and batch for gradient checks. Inputs are continuous so no
/// gradient is structurally zero.
pub fn random_problem(
    dims: ToyDims,
    batch: usize,
    seed: u64,
) -> Result<(ToyDenoiser, Vec<Example>, Vec<Noise>, usize)> {
    let mut rng = rng_from_seed(seed);
    let mut model = ToyDenoiser::init(dims, &mut rng)?;
    // Nonzero biases exercise every bias path.
    for v in model.params_mut() {
        *v += 0.05 * rng.random_range(-1.0..1.0);
    }
    let p = dims.pixels;
    let examples = (0..batch)
        .map(|_| Example {
            x0: (0..p).map(|_| rng.random_bool(0.5) as u8 as f64).collect(),
            cond_input: (0..2 * p).map(|_| rng.random_range(0.0..1.0)).collect(),
        })
        .collect();
    let steps = 20;
    let noise = (0..batch)
        .map(|_| Noise {
            tau: rng.random_range(1..=steps),
            eps: (0..p).map(|_| StandardNormal.sample(&mut rng)).collect(),
        })
        .collect();
    Ok((model, examples, noise, steps))
}

pub fn gradcheck(dims: ToyDims, seed: u64, h: f64, tol: f64, lambda_ce: f64) -> Result<GradcheckReport> {
    let (model, batch, noise, steps) = random_problem(dims, 3, seed)?;
    let sched = make_schedule(steps, ScheduleKind::Linear)?;
    let (_, grads) = model.loss_and_grad(&batch, &noise, &sched, lambda_ce)?;
    let mut probe = model.clone();
    let mut groups = Vec::new();
    for g in model.groups() {
        let mut worst = GroupCheck {
            name: g.name.to_string(),
            count: g.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in g.range() {
            let w = model.params()[i];
            probe.params_mut()[i] = w + h;
            let up = probe.loss(&batch, &noise, &sched, lambda_ce)?.total;
            probe.params_mut()[i] = w - h;
            let dn = probe.loss(&batch, &noise, &sched, lambda_ce)?.total;
            probe.params_mut()[i] = w;
            let numeric = (up - dn) / (2.0 * h);
            let err = rel_err(grads[i], numeric);
            if i == g.offset || err > worst.max_rel_err {
                worst.max_rel_err = err;
                worst.worst_index = i - g.offset;
                worst.analytic = grads[i];
                worst.numeric = numeric;
            }
        }
        groups.push(worst);
    }
    Ok(GradcheckReport { h, tol, groups })
}

pub fn default_gradcheck() -> Result<GradcheckReport> {
    gradcheck(check_dims(), 0, DEFAULT_H, DEFAULT_TOL, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_err_is_symmetric_and_zero_safe() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert_eq!(rel_err(1.0, 2.0), rel_err(2.0, 1.0));
    }
}
