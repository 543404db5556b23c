//! Bias-corrected Adam.

use crate::error::{ImdError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        adam_step(params, grads, self)
    }
}

/// One update: `w -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut Adam) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(ImdError::LengthMismatch {
            expected: state.m.len(),
            actual: grads.len().min(params.len()),
        });
    }
    if state.lr.is_nan() || state.lr <= 0.0 {
        return Err(ImdError::invalid(format!("learning rate {} must be > 0", state.lr)));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut w = vec![1.0, -2.0, 3.5];
        let mut opt = Adam::new(3, 1e-3);
        for _ in 0..5 {
            opt.step(&mut w, &[0.0; 3]).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_is_bounded_by_lr() {
        let lr = 0.01;
        let g = [3.0, -1e-4, 250.0, -7.0];
        let mut w = vec![0.0; 4];
        let mut opt = Adam::new(4, lr);
        opt.step(&mut w, &g).unwrap();
        for (dw, gi) in w.iter().zip(g) {
            assert!(dw.abs() <= lr * (1.0 + 1e-6));
            assert!(dw.signum() == -gi.signum());
        }
    }

    #[test]
    fn quadratic_trajectory_matches_hand_steps() {
        // f(w) = (w - 3)^2, grad 2(w - 3), w0 = 0, lr = 0.1.
        let mut w = vec![0.0];
        let mut opt = Adam::new(1, 0.1);
        let mut got = Vec::new();
        for _ in 0..3 {
            let g = [2.0 * (w[0] - 3.0)];
            opt.step(&mut w, &g).unwrap();
            got.push(w[0]);
        }
        // Reference, stepped by hand with plain scalars.
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        let mut want = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * (x - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
            want.push(x);
        }
        assert_eq!(got, want);
        // First step is lr exactly (up to eps), and all steps move toward 3.
        assert!((got[0] - 0.1).abs() < 1e-8);
        assert!(got.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn length_checked() {
        let mut opt = Adam::new(2, 0.1);
        assert!(opt.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
