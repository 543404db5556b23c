//! Binary and probabilistic masks.
//!
//! Pixels are stored row-major with `x` to the right and `y` downward; the
//! pixel `(x, y)` lives at index `y * width + x`. Connectivity is 4-neighbour
//! everywhere in the crate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};

const NEIGHBOURS_4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// A `width x height` grid of {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// A `width x height` grid of reals in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMask {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Axis-aligned box; `x0, y0` inclusive, `x1, y1` exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

fn check_dims(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(ImdError::invalid(format!(
            "mask dimensions must be positive, got {w}x{h}"
        )));
    }
    Ok(())
}

fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(ImdError::DimensionMismatch {
            left_w: a.0,
            left_h: a.1,
            right_w: b.0,
            right_h: b.1,
        });
    }
    Ok(())
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        BinaryMask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::empty(width, height);
        m.data.fill(1);
        m
    }

    /// Build from row-major {0,1} data.
    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(ImdError::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(ImdError::invalid(format!("binary mask value {v} not in {{0,1}}")));
        }
        Ok(BinaryMask { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y) as u8;
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn get_index(&self, i: usize) -> bool {
        self.data[i] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v as u8;
    }

    pub fn set_index(&mut self, i: usize, v: bool) {
        self.data[i] = v as u8;
    }

    pub fn area(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Foreground pixel indices in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> Result<BinaryMask> {
        same_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    /// `self \ other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn symmetric_difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a ^ b)
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize> {
        same_dims(self.dims(), other.dims())?;
        Ok(self.data.iter().zip(&other.data).filter(|(&a, &b)| a & b != 0).count())
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    /// Shift by `(dx, dy)`; pixels moved off the canvas are dropped.
    pub fn translate(&self, dx: isize, dy: isize) -> BinaryMask {
        let mut out = BinaryMask::empty(self.width, self.height);
        for y in 0..self.height {
            let ny = y as isize + dy;
            if ny < 0 || ny >= self.height as isize {
                continue;
            }
            for x in 0..self.width {
                let nx = x as isize + dx;
                if nx < 0 || nx >= self.width as isize || !self.get(x, y) {
                    continue;
                }
                out.set(nx as usize, ny as usize, true);
            }
        }
        out
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
        NEIGHBOURS_4.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
                .then(|| ny as usize * self.width + nx as usize)
        })
    }

    /// One-layer 4-neighbour dilation.
    pub fn dilate(&self) -> BinaryMask {
        let mut out = self.clone();
        for i in 0..self.data.len() {
            if self.data[i] == 0 && self.neighbours(i).any(|j| self.data[j] != 0) {
                out.data[i] = 1;
            }
        }
        out
    }

    /// One-layer 4-neighbour erosion; the canvas border counts as background.
    pub fn erode(&self) -> BinaryMask {
        let mut out = self.clone();
        for i in 0..self.data.len() {
            if self.data[i] == 0 {
                continue;
            }
            let x = i % self.width;
            let y = i / self.width;
            let on_border = x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height;
            if on_border || self.neighbours(i).any(|j| self.data[j] == 0) {
                out.data[i] = 0;
            }
        }
        out
    }

    /// Pixels within Chebyshev distance `r` of the foreground.
    pub fn dilate_chebyshev(&self, r: usize) -> BinaryMask {
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let mut horiz = BinaryMask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) {
                    let lo = x.saturating_sub(r);
                    let hi = (x + r).min(w - 1);
                    for xx in lo..=hi {
                        horiz.set(xx, y, true);
                    }
                }
            }
        }
        let mut out = BinaryMask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                if horiz.get(x, y) {
                    let lo = y.saturating_sub(r);
                    let hi = (y + r).min(h - 1);
                    for yy in lo..=hi {
                        out.set(x, yy, true);
                    }
                }
            }
        }
        out
    }

    /// Foreground pixels with at least one 4-neighbour in the background
    /// (the canvas edge counts as background).
    pub fn inner_boundary(&self) -> BinaryMask {
        let eroded = self.erode();
        self.difference(&eroded).expect("same dims")
    }

    /// Background pixels with at least one foreground 4-neighbour.
    pub fn outer_boundary(&self) -> BinaryMask {
        self.dilate().difference(self).expect("same dims")
    }

    /// 4-connected component labels (0 = background, labels from 1 in scan
    /// order) and the area of each component (index `label - 1`).
    pub fn label_components(&self) -> (Vec<u32>, Vec<usize>) {
        let mut labels = vec![0u32; self.data.len()];
        let mut areas = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.data.len() {
            if self.data[start] == 0 || labels[start] != 0 {
                continue;
            }
            let label = areas.len() as u32 + 1;
            labels[start] = label;
            queue.push_back(start);
            let mut area = 0;
            while let Some(i) = queue.pop_front() {
                area += 1;
                for j in self.neighbours(i) {
                    if self.data[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
            areas.push(area);
        }
        (labels, areas)
    }

    pub fn component_count(&self) -> usize {
        self.label_components().1.len()
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Breadth-first 4-neighbour distance from `sources`, travelling only
    /// through pixels of `self` (sources need not lie in `self`).
    /// Unreachable pixels get `u32::MAX`; sources get 0.
    pub fn geodesic_distance(&self, sources: &BinaryMask) -> Result<Vec<u32>> {
        same_dims(self.dims(), sources.dims())?;
        let mut dist = vec![u32::MAX; self.data.len()];
        let mut queue = VecDeque::new();
        for i in sources.foreground() {
            dist[i] = 0;
            queue.push_back(i);
        }
        while let Some(i) = queue.pop_front() {
            let d = dist[i] + 1;
            for j in self.neighbours(i) {
                if self.data[j] != 0 && dist[j] == u32::MAX {
                    dist[j] = d;
                    queue.push_back(j);
                }
            }
        }
        Ok(dist)
    }

    pub fn to_prob(&self) -> ProbMask {
        ProbMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl ProbMask {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(ImdError::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImdError::invalid(format!("probability {v} outside [0,1]")));
        }
        Ok(ProbMask { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        ProbMask {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

fn check_same(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    same_dims(a.dims(), b.dims())
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_same(a, b)?;
    let (mut inter, mut uni) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x & y) as usize;
        uni += (x | y) as usize;
    }
    Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
}

/// Dice coefficient; 1.0 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_same(a, b)?;
    let inter = a.intersection_area(b)?;
    let total = a.area() + b.area();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    })
}

/// Per-pixel arithmetic mean of equally sized masks.
pub fn mean_masks(masks: &[BinaryMask]) -> Result<ProbMask> {
    let first = masks.first().ok_or(ImdError::Empty("mask list"))?;
    let mut counts = vec![0u32; first.len()];
    for m in masks {
        check_same(first, m)?;
        for (c, &v) in counts.iter_mut().zip(&m.data) {
            *c += v as u32;
        }
    }
    let n = masks.len() as f64;
    Ok(ProbMask {
        width: first.width,
        height: first.height,
        data: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Foreground where `p >= tau` (inclusive, so ties land on foreground).
pub fn threshold(p: &ProbMask, tau: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(ImdError::invalid(format!("threshold {tau} outside [0,1]")));
    }
    Ok(BinaryMask {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|&v| (v >= tau) as u8).collect(),
    })
}

pub fn bbox_of(mask: &BinaryMask) -> Result<BBox> {
    let mut bb: Option<BBox> = None;
    for i in mask.foreground() {
        let (x, y) = (i % mask.width, i / mask.width);
        bb = Some(match bb {
            None => BBox {
                x0: x,
                y0: y,
                x1: x + 1,
                y1: y + 1,
            },
            Some(b) => BBox {
                x0: b.x0.min(x),
                y0: b.y0.min(y),
                x1: b.x1.max(x + 1),
                y1: b.y1.max(y + 1),
            },
        });
    }
    bb.ok_or(ImdError::Empty("mask has no foreground"))
}

pub fn cross_section(p: &ProbMask, row: usize) -> Result<Vec<f64>> {
    if row >= p.height {
        return Err(ImdError::OutOfRange {
            index: row,
            limit: p.height,
        });
    }
    Ok(p.data[row * p.width..(row + 1) * p.width].to_vec())
}

/// True iff `v` rises (non-decreasing) to some peak and then falls
/// (non-increasing), where each step may go the wrong way by at most `tol`.
pub fn is_unimodal(v: &[f64], tol: f64) -> bool {
    unimodal_violations(v, tol) == 0
}

/// Fewest steps that go the wrong way by more than `tol`, over all choices
/// of peak position. Zero exactly when [`is_unimodal`] holds.
pub fn unimodal_violations(v: &[f64], tol: f64) -> usize {
    let n = v.len();
    if n <= 2 {
        return 0;
    }
    // rising[p]: falls within v[0..=p]; falling[p]: rises within v[p..].
    let mut rising = vec![0; n];
    for i in 1..n {
        rising[i] = rising[i - 1] + usize::from(v[i] - v[i - 1] < -tol);
    }
    let mut falling = vec![0; n];
    for i in (0..n - 1).rev() {
        falling[i] = falling[i + 1] + usize::from(v[i + 1] - v[i] > tol);
    }
    (0..n).map(|p| rising[p] + falling[p]).min().unwrap_or(0)
}

/// The 4-connected component of `mask` overlapping `seed_region` the most
/// (ties: larger area, then first in scan order). Falls back to the largest
/// component when nothing overlaps.
pub fn largest_component_containing(mask: &BinaryMask, seed_region: &BinaryMask) -> Result<BinaryMask> {
    check_same(mask, seed_region)?;
    let (labels, areas) = mask.label_components();
    if areas.is_empty() {
        return Ok(BinaryMask::empty(mask.width, mask.height));
    }
    let mut overlap = vec![0usize; areas.len()];
    for i in seed_region.foreground() {
        if labels[i] != 0 {
            overlap[labels[i] as usize - 1] += 1;
        }
    }
    let best = (0..areas.len())
        .max_by(|&a, &b| (overlap[a], areas[a]).cmp(&(overlap[b], areas[b])).then(b.cmp(&a)))
        .expect("nonempty");
    let keep = best as u32 + 1;
    Ok(BinaryMask {
        width: mask.width,
        height: mask.height,
        data: labels.iter().map(|&l| (l == keep) as u8).collect(),
    })
}
