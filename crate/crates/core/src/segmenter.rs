//! Segmentation stage: generated image plus the visible region as a prompt
//! in, object mask and soft map out.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};
use crate::mask::{largest_component_containing, BinaryMask, ProbMask};
use crate::seed::SeededRng;
use crate::shape_world::GrayImage;

/// Intensity threshold of the default segmenter. Appearances are drawn from
/// [0.6, 1.0] so this separates object from background for every scene.
pub const DEFAULT_LEVEL: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmenterKind {
    /// Threshold at `level`, keep the component best covering the prompt.
    Threshold { level: f64 },
    /// Run `inner`, then flip boundary blobs totalling `level * |mask|`
    /// pixels in expectation, half adding and half removing.
    Noisy { level: f64, inner: Box<SegmenterKind> },
}

impl Default for SegmenterKind {
    fn default() -> Self {
        SegmenterKind::Threshold { level: DEFAULT_LEVEL }
    }
}

impl SegmenterKind {
    pub fn noisy(level: f64) -> Self {
        SegmenterKind::Noisy {
            level,
            inner: Box::new(SegmenterKind::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SegmenterKind::Threshold { level } => {
                if !(*level > 0.0 && *level < 1.0) {
                    return Err(ImdError::invalid(format!("threshold level {level} not in (0,1)")));
                }
                Ok(())
            }
            SegmenterKind::Noisy { level, inner } => {
                if !(*level >= 0.0 && level.is_finite()) {
                    return Err(ImdError::invalid(format!("noise fraction {level} must be >= 0")));
                }
                inner.validate()
            }
        }
    }
}

/// Mean disc area for radii 1, 2, 3 (5, 13 and 29 pixels).
const MEAN_BLOB_AREA: f64 = (5.0 + 13.0 + 29.0) / 3.0;

fn paint_disc(mask: &mut BinaryMask, centre: usize, radius: isize, value: bool) {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let (cx, cy) = ((centre % mask.width()) as isize, (centre / mask.width()) as isize);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (x, y) = (cx + dx, cy + dy);
            if dx * dx + dy * dy <= radius * radius && x >= 0 && y >= 0 && x < w && y < h {
                mask.set(x as usize, y as usize, value);
            }
        }
    }
}

/// Flip disc-shaped blobs centred on boundary pixels. Each blob either grows
/// the mask from an outer-boundary pixel or cuts it from an inner-boundary
/// pixel, with equal probability.
pub fn perturb_boundary(mask: &BinaryMask, fraction: f64, rng: &mut SeededRng) -> Result<BinaryMask> {
    if fraction <= 0.0 || mask.is_empty() {
        return Ok(mask.clone());
    }
    let lambda = fraction * mask.area() as f64 / MEAN_BLOB_AREA;
    let blobs = Poisson::new(lambda)
        .map_err(|e| ImdError::invalid(format!("noise rate: {e}")))?
        .sample(rng) as usize;
    let outer: Vec<usize> = mask.outer_boundary().foreground().collect();
    let inner: Vec<usize> = mask.inner_boundary().foreground().collect();
    let mut out = mask.clone();
    for _ in 0..blobs {
        let radius = rng.random_range(1i64..=3) as isize;
        let grow = rng.random_bool(0.5);
        let pool = if grow { &outer } else { &inner };
        if pool.is_empty() {
            continue;
        }
        let centre = pool[rng.random_range(0..pool.len())];
        paint_disc(&mut out, centre, radius, grow);
    }
    Ok(out)
}

/// Segment `image` using `prompt_region` (the visible object) as the prompt.
///
/// The soft map scores intensity `v` as `v / (2 * level)`, clamped to
/// `[0, 1]`, and zeroes foreground components other than the selected one,
/// so `logits >= 0.5` reproduces the returned mask for the threshold kind.
pub fn segment(
    image: &GrayImage,
    prompt_region: &BinaryMask,
    seg: &SegmenterKind,
    rng: &mut SeededRng,
) -> Result<(BinaryMask, ProbMask)> {
    if image.dims() != prompt_region.dims() {
        return Err(ImdError::DimensionMismatch {
            left_w: image.width(),
            left_h: image.height(),
            right_w: prompt_region.width(),
            right_h: prompt_region.height(),
        });
    }
    if prompt_region.is_empty() {
        return Err(ImdError::Empty("segmentation prompt"));
    }
    seg.validate()?;
    match seg {
        SegmenterKind::Threshold { level } => {
            let raw = image.threshold(*level);
            let mask = largest_component_containing(&raw, prompt_region)?;
            let logits = image
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if raw.get_index(i) && !mask.get_index(i) {
                        0.0
                    } else {
                        (v / (2.0 * level)).clamp(0.0, 1.0)
                    }
                })
                .collect();
            Ok((mask, ProbMask::from_vec(image.width(), image.height(), logits)?))
        }
        SegmenterKind::Noisy { level, inner } => {
            let (mask, logits) = segment(image, prompt_region, inner, rng)?;
            if *level == 0.0 {
                return Ok((mask, logits));
            }
            let noisy = perturb_boundary(&mask, *level, rng)?;
            let blended = noisy
                .as_slice()
                .iter()
                .zip(logits.as_slice())
                .map(|(&m, &l)| 0.9 * m as f64 + 0.1 * l)
                .collect();
            Ok((noisy, ProbMask::from_vec(image.width(), image.height(), blended)?))
        }
    }
}
