//! A small MLP epsilon-predictor with a time-gated condition path and an
//! auxiliary mask head.
//!
//! ```text
//! u      = [partial image, condition mask]              (2P)
//! c      = tanh(We u + be)                               (D)
//! e      = time_embedding(tau)                           (E)
//! g      = wf . e + bf                                   (scalar gate)
//! z      = [x_tau, g c, e]                               (P + D + E)
//! h1     = tanh(W1 z + b1),  h2 = tanh(W2 h1 + b2)       (H)
//! eps^   = W3 h2 + b3 + s * x_tau                        (P, s per pixel)
//! M_pre  = Wm c + bm                                     (P, logits)
//! ```
//!
//! All parameters live in one flat vector; [`ToyDenoiser::groups`] gives the
//! layout. Matrices are row-major `rows x cols` acting on column vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_eps, loss_mask_grad, loss_mask_parts};
use super::schedule::{forward_noise, time_embedding, NoiseSchedule};
use crate::error::{ImdError, Result};
use crate::seed::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyDims {
    /// Flattened mask length P.
    pub pixels: usize,
    /// Condition embedding size D.
    pub cond_dim: usize,
    /// Time embedding size E (even).
    pub time_dim: usize,
    /// Trunk width H.
    pub hidden: usize,
}

impl Default for ToyDims {
    fn default() -> Self {
        ToyDims {
            pixels: 256,
            cond_dim: 64,
            time_dim: 32,
            hidden: 256,
        }
    }
}

impl ToyDims {
    pub fn validate(&self) -> Result<()> {
        if self.pixels == 0 || self.cond_dim == 0 || self.hidden == 0 {
            return Err(ImdError::invalid("toy dimensions must be positive"));
        }
        if self.time_dim == 0 || !self.time_dim.is_multiple_of(2) {
            return Err(ImdError::invalid(format!(
                "time_dim {} must be even and positive",
                self.time_dim
            )));
        }
        Ok(())
    }

    pub fn trunk_input(&self) -> usize {
        self.pixels + self.cond_dim + self.time_dim
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Group {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

pub const ENC_W: usize = 0;
pub const ENC_B: usize = 1;
pub const GATE_W: usize = 2;
pub const GATE_B: usize = 3;
pub const T1_W: usize = 4;
pub const T1_B: usize = 5;
pub const T2_W: usize = 6;
pub const T2_B: usize = 7;
pub const T3_W: usize = 8;
pub const T3_B: usize = 9;
pub const MASK_W: usize = 10;
pub const MASK_B: usize = 11;
pub const SKIP_W: usize = 12;

pub fn layout(d: &ToyDims) -> Vec<Group> {
    let shapes: [(&'static str, usize, usize); 13] = [
        ("encoder.weight", d.cond_dim, 2 * d.pixels),
        ("encoder.bias", d.cond_dim, 1),
        ("gate.weight", 1, d.time_dim),
        ("gate.bias", 1, 1),
        ("trunk1.weight", d.hidden, d.trunk_input()),
        ("trunk1.bias", d.hidden, 1),
        ("trunk2.weight", d.hidden, d.hidden),
        ("trunk2.bias", d.hidden, 1),
        ("trunk_out.weight", d.pixels, d.hidden),
        ("trunk_out.bias", d.pixels, 1),
        ("mask_head.weight", d.pixels, d.cond_dim),
        ("mask_head.bias", d.pixels, 1),
        ("trunk_skip.weight", d.pixels, 1),
    ];
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(name, rows, cols)| {
            let g = Group {
                name,
                rows,
                cols,
                offset,
            };
            offset += rows * cols;
            g
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDenoiser {
    dims: ToyDims,
    groups: Vec<Group>,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub e: Vec<f64>,
    pub g: f64,
    pub z: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub eps_hat: Vec<f64>,
    pub logits: Vec<f64>,
}

/// `y = W x + b` with `W` rows x cols row-major.
fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * cols..(r + 1) * cols];
            bias + dot(row, x)
        })
        .collect()
}

/// Dot product with four independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Accumulate `dW += dy x^T`, `db += dy`; return `W^T dy`.
fn affine_back(w: &[f64], x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let cols = x.len();
    let mut dx = vec![0.0; cols];
    for (r, &d) in dy.iter().enumerate() {
        db[r] += d;
        if d == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        let drow = &mut dw[r * cols..(r + 1) * cols];
        for ((g, xi), (o, wi)) in drow.iter_mut().zip(x).zip(dx.iter_mut().zip(row)) {
            *g += d * xi;
            *o += d * wi;
        }
    }
    dx
}

/// Concatenate a partial image and a condition mask into the encoder input.
pub fn condition_input(partial_image: &[f64], condition: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(partial_image.len() + condition.len());
    u.extend_from_slice(partial_image);
    u.extend_from_slice(condition);
    u
}

/// Loss values of a batch, each averaged over the batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossParts {
    pub eps: f64,
    pub mask: f64,
    pub total: f64,
}

/// One training pair: target mask `x0` and encoder input `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x0: Vec<f64>,
    pub cond_input: Vec<f64>,
}

/// Noise draw for one example: diffusion step and Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Noise {
    pub tau: usize,
    pub eps: Vec<f64>,
}

impl ToyDenoiser {
    pub fn zeros(dims: ToyDims) -> Result<Self> {
        dims.validate()?;
        let groups = layout(&dims);
        let n = groups.last().map(|g| g.offset + g.len()).unwrap_or(0);
        Ok(ToyDenoiser {
            dims,
            groups,
            params: vec![0.0; n],
        })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases and skip zero, gate
    /// bias one.
    pub fn init(dims: ToyDims, rng: &mut SeededRng) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        for gi in [ENC_W, GATE_W, T1_W, T2_W, T3_W, MASK_W] {
            let g = m.groups[gi].clone();
            let bound = 1.0 / (g.cols as f64).sqrt();
            for v in &mut m.params[g.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        m.params[m.groups[GATE_B].offset] = 1.0;
        Ok(m)
    }

    pub fn from_params(dims: ToyDims, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        if params.len() != m.params.len() {
            return Err(ImdError::LengthMismatch {
                expected: m.params.len(),
                actual: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(ImdError::invalid("non-finite weight"));
        }
        m.params = params;
        Ok(m)
    }

    pub fn dims(&self) -> &ToyDims {
        &self.dims
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn group(&self, i: usize) -> &[f64] {
        &self.params[self.groups[i].range()]
    }

    pub fn group_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.groups[i].range();
        &mut self.params[r]
    }

    /// Zero the gate so `f(e) = 0` at every step.
    pub fn disable_gate(&mut self) {
        self.group_mut(GATE_W).fill(0.0);
        self.group_mut(GATE_B).fill(0.0);
    }

    pub fn gate(&self, tau: usize) -> Result<f64> {
        let e = time_embedding(tau as f64, self.dims.time_dim)?;
        Ok(self.group(GATE_B)[0] + self.group(GATE_W).iter().zip(&e).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn forward(&self, x_tau: &[f64], cond_input: &[f64], tau: usize) -> Result<ForwardCache> {
        let d = &self.dims;
        if x_tau.len() != d.pixels {
            return Err(ImdError::LengthMismatch {
                expected: d.pixels,
                actual: x_tau.len(),
            });
        }
        if cond_input.len() != 2 * d.pixels {
            return Err(ImdError::LengthMismatch {
                expected: 2 * d.pixels,
                actual: cond_input.len(),
            });
        }
        let c: Vec<f64> = affine(self.group(ENC_W), self.group(ENC_B), cond_input)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let e = time_embedding(tau as f64, d.time_dim)?;
        let g = self.group(GATE_B)[0] + self.group(GATE_W).iter().zip(&e).map(|(a, b)| a * b).sum::<f64>();
        let mut z = Vec::with_capacity(d.trunk_input());
        z.extend_from_slice(x_tau);
        z.extend(c.iter().map(|v| g * v));
        z.extend_from_slice(&e);
        let h1: Vec<f64> = affine(self.group(T1_W), self.group(T1_B), &z)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h2: Vec<f64> = affine(self.group(T2_W), self.group(T2_B), &h1)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let mut eps_hat = affine(self.group(T3_W), self.group(T3_B), &h2);
        for ((o, s), x) in eps_hat.iter_mut().zip(self.group(SKIP_W)).zip(x_tau) {
            *o += s * x;
        }
        let logits = affine(self.group(MASK_W), self.group(MASK_B), &c);
        Ok(ForwardCache {
            u: cond_input.to_vec(),
            c,
            e,
            g,
            z,
            h1,
            h2,
            eps_hat,
            logits,
        })
    }

    /// `(eps_hat, mask logits)`.
    pub fn denoiser_forward(&self, x_tau: &[f64], cond_input: &[f64], tau: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.forward(x_tau, cond_input, tau)?;
        Ok((f.eps_hat, f.logits))
    }

    /// Accumulate parameter gradients for upstream `d_eps` and `d_logits`
    /// into `grads`. Returns the gradient reaching the gated condition
    /// `g * c` through the trunk.
    pub fn backward(&self, cache: &ForwardCache, d_eps: &[f64], d_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let d = &self.dims;
        let gr = &self.groups;
        let p = &self.params;
        let (head, rest) = grads.split_at_mut(gr[T3_W].offset);
        let (t3w, rest) = rest.split_at_mut(gr[T3_W].len());
        let (t3b, mask_part) = rest.split_at_mut(gr[T3_B].len());
        let (mw, rest) = mask_part.split_at_mut(gr[MASK_W].len());
        let (mb, skip) = rest.split_at_mut(gr[MASK_B].len());
        for ((gs, d), x) in skip.iter_mut().zip(d_eps).zip(&cache.z[..d.pixels]) {
            *gs += d * x;
        }

        let dh2 = affine_back(&p[gr[T3_W].range()], &cache.h2, d_eps, t3w, t3b);
        let da2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(g, h)| g * (1.0 - h * h)).collect();

        let (enc_gate_t1, t2) = head.split_at_mut(gr[T2_W].offset);
        let (t2w, t2b) = t2.split_at_mut(gr[T2_W].len());
        let dh1 = affine_back(&p[gr[T2_W].range()], &cache.h1, &da2, t2w, t2b);
        let da1: Vec<f64> = dh1.iter().zip(&cache.h1).map(|(g, h)| g * (1.0 - h * h)).collect();

        let (enc_gate, t1) = enc_gate_t1.split_at_mut(gr[T1_W].offset);
        let (t1w, t1b) = t1.split_at_mut(gr[T1_W].len());
        let dz = affine_back(&p[gr[T1_W].range()], &cache.z, &da1, t1w, t1b);
        let d_gated = dz[d.pixels..d.pixels + d.cond_dim].to_vec();

        // Gate: g = wf . e + bf, gated = g * c.
        let dg: f64 = d_gated.iter().zip(&cache.c).map(|(a, b)| a * b).sum();
        let (enc, gate) = enc_gate.split_at_mut(gr[GATE_W].offset);
        for (gw, e) in gate[..d.time_dim].iter_mut().zip(&cache.e) {
            *gw += dg * e;
        }
        gate[d.time_dim] += dg;

        let dc_mask = affine_back(&p[gr[MASK_W].range()], &cache.c, d_logits, mw, mb);
        let da_e: Vec<f64> = (0..d.cond_dim)
            .map(|i| (cache.g * d_gated[i] + dc_mask[i]) * (1.0 - cache.c[i] * cache.c[i]))
            .collect();
        let (ew, eb) = enc.split_at_mut(gr[ENC_W].len());
        affine_back(&p[gr[ENC_W].range()], &cache.u, &da_e, ew, eb);
        d_gated
    }

    /// Batch loss (each term averaged over the batch) without gradients.
    pub fn loss(&self, batch: &[Example], noise: &[Noise], sched: &NoiseSchedule, lambda_ce: f64) -> Result<LossParts> {
        self.loss_impl(batch, noise, sched, lambda_ce, None)
    }

    /// Batch loss and its exact gradient with respect to every parameter.
    /// Examples are accumulated in index order.
    pub fn loss_and_grad(
        &self,
        batch: &[Example],
        noise: &[Noise],
        sched: &NoiseSchedule,
        lambda_ce: f64,
    ) -> Result<(LossParts, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let parts = self.loss_impl(batch, noise, sched, lambda_ce, Some(&mut grads))?;
        Ok((parts, grads))
    }

    fn loss_impl(
        &self,
        batch: &[Example],
        noise: &[Noise],
        sched: &NoiseSchedule,
        lambda_ce: f64,
        mut grads: Option<&mut Vec<f64>>,
    ) -> Result<LossParts> {
        if batch.is_empty() {
            return Err(ImdError::Empty("batch"));
        }
        if batch.len() != noise.len() {
            return Err(ImdError::LengthMismatch {
                expected: batch.len(),
                actual: noise.len(),
            });
        }
        let scale = 1.0 / batch.len() as f64;
        let mut out = LossParts::default();
        for (ex, nz) in batch.iter().zip(noise) {
            if nz.tau < 1 {
                return Err(ImdError::invalid("training step tau must be >= 1"));
            }
            let x_tau = forward_noise(&ex.x0, nz.tau, &nz.eps, sched)?;
            let cache = self.forward(&x_tau, &ex.cond_input, nz.tau)?;
            let le = loss_eps(&cache.eps_hat, &nz.eps)?;
            let lm = loss_mask_parts(&cache.logits, &ex.x0, lambda_ce)?;
            out.eps += scale * le;
            out.mask += scale * lm.total;
            if let Some(g) = grads.as_deref_mut() {
                let d_eps: Vec<f64> = cache
                    .eps_hat
                    .iter()
                    .zip(&nz.eps)
                    .map(|(a, b)| 2.0 * scale * (a - b))
                    .collect();
                let d_logits: Vec<f64> = loss_mask_grad(&cache.logits, &ex.x0, lambda_ce)?
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
                self.backward(&cache, &d_eps, &d_logits, g);
            }
        }
        out.total = out.eps + out.mask;
        Ok(out)
    }
}
