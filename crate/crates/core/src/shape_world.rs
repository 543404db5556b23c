//! Synthetic ground-truth world and the oracle generator.
//!
//! Objects are unions of rotated ellipses rendered without anti-aliasing on a
//! black background. [`OracleGenerator`] samples completions conditioned on a
//! partial object and a condition mask. It knows the true shape, and the
//! quality of what it produces depends on how complete the condition is:
//!
//! * the condition is morphed toward the truth by a random fraction whose
//!   mean is `beta^(1 + coupling * q)`, where `q` is the fraction of the true
//!   object missing from the condition. Missing pixels are filled in order of
//!   geodesic distance from the condition (through the object); spurious
//!   condition pixels are peeled in order of distance from the object. One
//!   uniform draw per sample sets the fraction, so within a sample the fill
//!   is nested and sample means fall off monotonically away from the
//!   visible evidence;
//! * the boundary is displaced by `L ~ Poisson(0.25 * sigma * (1 + q))`
//!   one-pixel layers, dilating or eroding with equal probability;
//! * visible pixels are always foreground;
//! * detached artifact blobs with expected total area `gain * q * |truth|`
//!   are scattered away from the object.
//!
//! With `sigma = gain = 0` and a condition equal to the truth, the sample is
//! exactly the truth.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::engine::{Generator, PartialObject};
use crate::error::{ImdError, Result};
use crate::mask::{BinaryMask, ProbMask};
use crate::seed::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_a: f64,
    pub semi_b: f64,
    /// Radians, counter-clockwise from the x axis.
    pub rotation: f64,
}

impl Ellipse {
    fn contains(&self, px: f64, py: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (px - self.cx, py - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_a).powi(2) + (v / self.semi_b).powi(2) <= 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub ellipses: Vec<Ellipse>,
}

/// A real-valued image in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        ProbMask::from_vec(width, height, data.clone())?;
        Ok(GrayImage { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage {
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

    /// Foreground where the intensity is at least `level`.
    pub fn threshold(&self, level: f64) -> BinaryMask {
        BinaryMask::from_vec(
            self.width,
            self.height,
            self.data.iter().map(|&v| (v >= level) as u8).collect(),
        )
        .expect("consistent dims")
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let px: Vec<u8> = self.data.iter().map(|&v| crate::pgm::unit_to_u8(v)).collect();
        crate::pgm::encode_gray8(self.width, self.height, &px)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Mean fraction of the way from condition to truth per sample, for a
    /// complete condition. In (0, 1].
    pub fidelity_beta: f64,
    /// Boundary jitter scale in pixels.
    pub boundary_sigma: f64,
    /// Artifact area per unit incompleteness, relative to the object area.
    pub artifact_gain: f64,
    /// How strongly condition incompleteness weakens the pull toward truth.
    pub condition_coupling: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            fidelity_beta: 0.5,
            boundary_sigma: 1.0,
            artifact_gain: 0.15,
            condition_coupling: 2.0,
        }
    }
}

impl OracleParams {
    pub fn noiseless(fidelity_beta: f64) -> Self {
        OracleParams {
            fidelity_beta,
            boundary_sigma: 0.0,
            artifact_gain: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fidelity_beta > 0.0 && self.fidelity_beta <= 1.0) {
            return Err(ImdError::invalid(format!(
                "fidelity_beta {} not in (0,1]",
                self.fidelity_beta
            )));
        }
        for (name, v) in [
            ("boundary_sigma", self.boundary_sigma),
            ("artifact_gain", self.artifact_gain),
            ("condition_coupling", self.condition_coupling),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ImdError::invalid(format!("{name} {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Parameters of the shape family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub width: usize,
    pub height: usize,
    pub k_range: [usize; 2],
    /// Semi-axis lengths in pixels.
    pub semi_axis_range: [f64; 2],
    pub appearance_range: [f64; 2],
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            width: 64,
            height: 64,
            k_range: [1, 3],
            semi_axis_range: [7.0, 15.0],
            appearance_range: [0.6, 1.0],
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        let [kmin, kmax] = self.k_range;
        let [smin, smax] = self.semi_axis_range;
        let [amin, amax] = self.appearance_range;
        if self.width == 0 || self.height == 0 {
            return Err(ImdError::invalid("world dimensions must be positive"));
        }
        if kmin < 1 || kmin > kmax {
            return Err(ImdError::invalid(format!(
                "k_range [{kmin}, {kmax}] must satisfy 1 <= min <= max"
            )));
        }
        if !(smin > 0.0 && smin <= smax) {
            return Err(ImdError::invalid(format!("semi_axis_range [{smin}, {smax}] invalid")));
        }
        if !(amin > 0.0 && amin <= amax && amax <= 1.0) {
            return Err(ImdError::invalid(format!(
                "appearance_range [{amin}, {amax}] must lie in (0,1]"
            )));
        }
        Ok(())
    }
}

/// Pixel `(x, y)` is foreground iff its centre lies inside some ellipse.
pub fn render(shape: &Shape, width: usize, height: usize) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        shape.ellipses.iter().any(|e| e.contains(px, py))
    })
}

const SHAPE_RETRIES: usize = 1000;

/// Draw a 4-connected union of `K ~ U[kmin, kmax]` ellipses that stays off the
/// canvas border. Later ellipses are centred inside earlier ones so the union
/// usually connects on the first try.
pub fn sample_shape(
    rng: &mut SeededRng,
    width: usize,
    height: usize,
    k_range: [usize; 2],
    scale_range: [f64; 2],
) -> Result<Shape> {
    let [kmin, kmax] = k_range;
    if kmin < 1 || kmin > kmax {
        return Err(ImdError::invalid(format!(
            "k_range [{kmin}, {kmax}] must satisfy 1 <= min <= max"
        )));
    }
    let [smin, smax] = scale_range;
    if !(smin > 0.0 && smin <= smax) {
        return Err(ImdError::invalid(format!("scale_range [{smin}, {smax}] invalid")));
    }
    let draw_scale = |rng: &mut SeededRng| {
        if smax > smin {
            rng.random_range(smin..=smax)
        } else {
            smin
        }
    };
    let (w, h) = (width as f64, height as f64);
    for _ in 0..SHAPE_RETRIES {
        let k = rng.random_range(kmin..=kmax);
        let mut ellipses: Vec<Ellipse> = Vec::with_capacity(k);
        for i in 0..k {
            let semi_a = draw_scale(rng);
            let semi_b = draw_scale(rng);
            let rotation = rng.random_range(0.0..std::f64::consts::PI);
            let (cx, cy) = if i == 0 {
                (
                    rng.random_range(0.35 * w..=0.65 * w),
                    rng.random_range(0.35 * h..=0.65 * h),
                )
            } else {
                let anchor = ellipses[rng.random_range(0..ellipses.len())];
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let reach = 0.8 * anchor.semi_a.min(anchor.semi_b) * rng.random::<f64>();
                (anchor.cx + reach * angle.cos(), anchor.cy + reach * angle.sin())
            };
            ellipses.push(Ellipse {
                cx,
                cy,
                semi_a,
                semi_b,
                rotation,
            });
        }
        let shape = Shape { ellipses };
        let m = render(&shape, width, height);
        if m.is_empty() || !m.is_connected() {
            continue;
        }
        let bb = crate::mask::bbox_of(&m)?;
        if bb.x0 == 0 || bb.y0 == 0 || bb.x1 == width || bb.y1 == height {
            continue;
        }
        return Ok(shape);
    }
    Err(ImdError::RetryExhausted(format!(
        "no connected in-canvas shape after {SHAPE_RETRIES} draws"
    )))
}

/// `appearance` on the foreground, 0 elsewhere.
pub fn realize_image(mask: &BinaryMask, appearance: f64) -> GrayImage {
    GrayImage {
        width: mask.width(),
        height: mask.height(),
        data: mask.as_slice().iter().map(|&v| v as f64 * appearance).collect(),
    }
}

/// A ground-truth instance with its occluded view.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: usize,
    pub seed: u64,
    pub shape: Shape,
    pub appearance: f64,
    pub complete_mask: BinaryMask,
    pub partial_mask: BinaryMask,
    pub occluder: BinaryMask,
}

impl Scene {
    pub fn new(
        id: usize,
        seed: u64,
        shape: Shape,
        appearance: f64,
        complete_mask: BinaryMask,
        occluder: &BinaryMask,
    ) -> Result<Self> {
        let occluder = occluder.intersection(&complete_mask)?;
        let partial_mask = complete_mask.difference(&occluder)?;
        if partial_mask.is_empty() {
            return Err(ImdError::Empty("scene has no visible pixels"));
        }
        Ok(Scene {
            id,
            seed,
            shape,
            appearance,
            complete_mask,
            partial_mask,
            occluder,
        })
    }

    pub fn width(&self) -> usize {
        self.complete_mask.width()
    }

    pub fn height(&self) -> usize {
        self.complete_mask.height()
    }

    pub fn occlusion_rate(&self) -> f64 {
        self.occluder.area() as f64 / self.complete_mask.area() as f64
    }

    pub fn partial_object(&self) -> PartialObject {
        PartialObject {
            image: realize_image(&self.partial_mask, self.appearance),
            mask: self.partial_mask.clone(),
        }
    }

    pub fn oracle(&self, params: OracleParams) -> OracleGenerator {
        OracleGenerator {
            truth: self.complete_mask.clone(),
            appearance: self.appearance,
            params,
        }
    }

    pub fn to_record(&self) -> SceneRecord {
        SceneRecord {
            id: self.id,
            seed: self.seed,
            width: self.width(),
            height: self.height(),
            shape: self.shape.clone(),
            appearance: self.appearance,
            occluder_runs: encode_runs(&self.occluder),
            occlusion_rate: self.occlusion_rate(),
        }
    }

    pub fn from_record(r: &SceneRecord) -> Result<Self> {
        let complete = render(&r.shape, r.width, r.height);
        let occluder = decode_runs(r.width, r.height, &r.occluder_runs)?;
        Scene::new(r.id, r.seed, r.shape.clone(), r.appearance, complete, &occluder)
    }
}

/// Serialized scene. The occluder is stored as `[start, length]` runs over
/// row-major pixel indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub id: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub shape: Shape,
    pub appearance: f64,
    pub occluder_runs: Vec<[usize; 2]>,
    pub occlusion_rate: f64,
}

fn encode_runs(mask: &BinaryMask) -> Vec<[usize; 2]> {
    let mut runs: Vec<[usize; 2]> = Vec::new();
    for i in mask.foreground() {
        match runs.last_mut() {
            Some(run) if run[0] + run[1] == i => run[1] += 1,
            _ => runs.push([i, 1]),
        }
    }
    runs
}

fn decode_runs(width: usize, height: usize, runs: &[[usize; 2]]) -> Result<BinaryMask> {
    let mut m = BinaryMask::empty(width, height);
    for &[start, len] in runs {
        if start + len > m.len() {
            return Err(ImdError::OutOfRange {
                index: start + len,
                limit: m.len(),
            });
        }
        for i in start..start + len {
            m.set_index(i, true);
        }
    }
    Ok(m)
}

/// Generator with access to the true object.
#[derive(Clone, Debug)]
pub struct OracleGenerator {
    pub truth: BinaryMask,
    pub appearance: f64,
    pub params: OracleParams,
}

const JITTER_RATE: f64 = 0.25;
const PIXEL_NOISE: f64 = 0.05;

fn fill_fraction(rng: &mut SeededRng, mean: f64) -> f64 {
    let u: f64 = rng.random();
    if mean <= 0.5 {
        2.0 * mean * u
    } else {
        (2.0 * mean - 1.0) + (2.0 - 2.0 * mean) * u
    }
}

/// Indices of the `fraction` of `candidates` with the smallest key; all
/// candidates tied with the last selected one are included too.
fn nearest_fraction(candidates: &[usize], key: &[u32], fraction: f64) -> Vec<usize> {
    let n = candidates.len();
    let take = (fraction * n as f64).ceil() as usize;
    if take == 0 {
        return Vec::new();
    }
    let mut keys: Vec<u32> = candidates.iter().map(|&i| key[i]).collect();
    keys.sort_unstable();
    let cutoff = keys[take.min(n) - 1];
    candidates.iter().copied().filter(|&i| key[i] <= cutoff).collect()
}

fn disc_offsets(r: isize) -> Vec<(isize, isize)> {
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

impl OracleGenerator {
    /// Incompleteness of `cond` relative to the truth.
    pub fn incompleteness(&self, cond: &BinaryMask) -> f64 {
        let t = self.truth.area();
        if t == 0 {
            return 0.0;
        }
        1.0 - cond.intersection_area(&self.truth).unwrap_or(0) as f64 / t as f64
    }

    /// The sampled object mask (before image realisation).
    pub fn sample_mask(
        &self,
        partial: &PartialObject,
        condition: &BinaryMask,
        rng: &mut SeededRng,
    ) -> Result<BinaryMask> {
        self.params.validate()?;
        let dims = self.truth.dims();
        for m in [&partial.mask, condition] {
            if m.dims() != dims {
                return Err(ImdError::DimensionMismatch {
                    left_w: dims.0,
                    left_h: dims.1,
                    right_w: m.width(),
                    right_h: m.height(),
                });
            }
        }
        if partial.mask.is_empty() {
            return Err(ImdError::Empty("partial mask"));
        }
        let truth = &self.truth;
        let cond = condition.union(&partial.mask)?;
        let q = self.incompleteness(&cond);
        let p = &self.params;

        // (a) coupled morph from the condition toward the truth
        let pull = p.fidelity_beta.powf(1.0 + p.condition_coupling * q);
        let frac = fill_fraction(rng, pull);
        let missing: Vec<usize> = truth.difference(&cond)?.foreground().collect();
        let spurious: Vec<usize> = cond.difference(truth)?.foreground().collect();
        let mut sample = cond.intersection(truth)?;
        let kept_spurious: Vec<usize> = if spurious.is_empty() {
            Vec::new()
        } else {
            // Peel spurious pixels farthest from the object first.
            let dist = cond.geodesic_distance(truth)?;
            let inv: Vec<u32> = dist.iter().map(|&d| u32::MAX - d).collect();
            let mut gone = vec![false; cond.len()];
            for i in nearest_fraction(&spurious, &inv, frac) {
                gone[i] = true;
            }
            spurious.iter().copied().filter(|&i| !gone[i]).collect()
        };
        for i in kept_spurious {
            sample.set_index(i, true);
        }
        if !missing.is_empty() {
            let dist = truth.geodesic_distance(&cond)?;
            for i in nearest_fraction(&missing, &dist, frac) {
                sample.set_index(i, true);
            }
        }

        // (b) zero-mean boundary displacement
        let lambda = JITTER_RATE * p.boundary_sigma * (1.0 + q);
        if lambda > 0.0 {
            let layers = Poisson::new(lambda)
                .map_err(|e| ImdError::invalid(format!("jitter rate: {e}")))?
                .sample(rng) as usize;
            let grow = rng.random_bool(0.5);
            for _ in 0..layers {
                sample = if grow { sample.dilate() } else { sample.erode() };
            }
        }

        // (c) visible evidence is always kept
        let mut sample = sample.union(&partial.mask)?;

        // (d) detached artifacts
        let budget = p.artifact_gain * q * truth.area() as f64;
        if budget > 0.0 {
            let radius = rng.random_range(1i64..=3) as isize;
            let disc = disc_offsets(radius);
            let count = Poisson::new(budget / disc.len() as f64)
                .map_err(|e| ImdError::invalid(format!("artifact rate: {e}")))?
                .sample(rng) as usize;
            let keep_out = sample.union(truth)?.dilate_chebyshev(radius as usize + 2);
            let free: Vec<usize> = (0..keep_out.len()).filter(|&i| !keep_out.get_index(i)).collect();
            if !free.is_empty() {
                let (w, h) = (dims.0 as isize, dims.1 as isize);
                for _ in 0..count {
                    let c = free[rng.random_range(0..free.len())];
                    let (cx, cy) = ((c % dims.0) as isize, (c / dims.0) as isize);
                    for &(dx, dy) in &disc {
                        let (x, y) = (cx + dx, cy + dy);
                        if x >= 0 && y >= 0 && x < w && y < h && !keep_out.get(x as usize, y as usize) {
                            sample.set(x as usize, y as usize, true);
                        }
                    }
                }
            }
        }
        Ok(sample)
    }
}

impl Generator for OracleGenerator {
    fn generate(&self, partial: &PartialObject, condition: &BinaryMask, rng: &mut SeededRng) -> Result<GrayImage> {
        let mask = self.sample_mask(partial, condition, rng)?;
        let amp = PIXEL_NOISE.min(self.appearance / 4.0);
        let data = mask
            .as_slice()
            .iter()
            .map(|&v| {
                if v == 0 {
                    0.0
                } else {
                    let n: f64 = rng.random_range(-amp..=amp);
                    (self.appearance + n).clamp(0.0, 1.0)
                }
            })
            .collect();
        Ok(GrayImage {
            width: mask.width(),
            height: mask.height(),
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{iou, mean_masks, threshold};
    use crate::occlusion::occlude_to_rate;
    use crate::seed::rng_from_seed;

    fn circle(cx: f64, cy: f64, r: f64) -> Shape {
        Shape {
            ellipses: vec![Ellipse {
                cx,
                cy,
                semi_a: r,
                semi_b: r,
                rotation: 0.0,
            }],
        }
    }

    #[test]
    fn circle_area() {
        let m = render(&circle(32.0, 32.0, 10.0), 64, 64);
        let analytic = std::f64::consts::PI * 100.0;
        assert!((m.area() as f64 - analytic).abs() / analytic < 0.05);
    }

    #[test]
    fn offcanvas_and_rotation() {
        assert!(render(&circle(-50.0, -50.0, 5.0), 32, 32).is_empty());
        let mut s = Shape {
            ellipses: vec![Ellipse {
                cx: 20.0,
                cy: 18.0,
                semi_a: 11.0,
                semi_b: 4.0,
                rotation: 0.4,
            }],
        };
        let a = render(&s, 40, 40);
        s.ellipses[0].rotation += std::f64::consts::PI;
        assert_eq!(render(&s, 40, 40), a);
    }

    #[test]
    fn sampled_shapes_are_connected_and_reproducible() {
        let mut rng = rng_from_seed(21);
        for _ in 0..100 {
            let s = sample_shape(&mut rng, 64, 64, [1, 3], [7.0, 15.0]).unwrap();
            let m = render(&s, 64, 64);
            assert!(!m.is_empty());
            assert!(m.is_connected());
        }
        let one = sample_shape(&mut rng_from_seed(4), 64, 64, [1, 1], [7.0, 15.0]).unwrap();
        assert_eq!(one.ellipses.len(), 1);
        assert!(render(&one, 64, 64).is_connected());
        let again = sample_shape(&mut rng_from_seed(4), 64, 64, [1, 1], [7.0, 15.0]).unwrap();
        assert_eq!(one, again);
        assert!(sample_shape(&mut rng, 64, 64, [2, 1], [7.0, 15.0]).is_err());
    }

    #[test]
    fn realize_cases() {
        let e = BinaryMask::empty(5, 5);
        assert!(realize_image(&e, 0.7).as_slice().iter().all(|&v| v == 0.0));
        let m = render(&circle(8.0, 8.0, 5.0), 16, 16);
        let img = realize_image(&m, 1.0);
        assert_eq!(img.as_slice(), m.to_prob().as_slice());
        assert_eq!(realize_image(&m, 0.8).threshold(0.4), m);
    }

    fn scene_at(rate: f64, seed: u64) -> Scene {
        let mut rng = rng_from_seed(seed);
        let shape = sample_shape(&mut rng, 64, 64, [1, 3], [7.0, 15.0]).unwrap();
        let complete = render(&shape, 64, 64);
        let occ = occlude_to_rate(&complete, rate, 0.02, &mut rng, 16).unwrap();
        Scene::new(0, seed, shape, 0.8, complete, &occ.occluder).unwrap()
    }

    #[test]
    fn noiseless_fixed_point() {
        let scene = scene_at(0.4, 3);
        let gen = scene.oracle(OracleParams::noiseless(0.5));
        let partial = scene.partial_object();
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let img = gen.generate(&partial, &scene.complete_mask, &mut rng).unwrap();
            assert_eq!(img.threshold(scene.appearance / 2.0), scene.complete_mask);
        }
    }

    #[test]
    fn full_pull_reaches_truth() {
        let scene = scene_at(0.5, 8);
        let gen = scene.oracle(OracleParams::noiseless(1.0));
        let partial = scene.partial_object();
        let mut rng = rng_from_seed(2);
        let m = gen.sample_mask(&partial, &scene.partial_mask, &mut rng).unwrap();
        assert_eq!(m, scene.complete_mask);
    }

    #[test]
    fn samples_contain_visible_part() {
        let scene = scene_at(0.6, 12);
        let gen = scene.oracle(OracleParams {
            boundary_sigma: 4.0,
            ..Default::default()
        });
        let partial = scene.partial_object();
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let img = gen.generate(&partial, &scene.partial_mask, &mut rng).unwrap();
            assert!(scene.partial_mask.is_subset_of(&img.threshold(0.4)));
        }
    }

    #[test]
    fn mean_sample_moves_toward_truth() {
        let scene = scene_at(0.4, 17);
        let gen = scene.oracle(OracleParams::default());
        let partial = scene.partial_object();
        let mut rng = rng_from_seed(6);
        let masks: Vec<_> = (0..200)
            .map(|_| {
                gen.generate(&partial, &scene.partial_mask, &mut rng)
                    .unwrap()
                    .threshold(0.4)
            })
            .collect();
        let fused = threshold(&mean_masks(&masks).unwrap(), 0.5).unwrap();
        let before = iou(&scene.partial_mask, &scene.complete_mask).unwrap();
        let after = iou(&fused, &scene.complete_mask).unwrap();
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn deterministic_and_validated() {
        let scene = scene_at(0.4, 1);
        let gen = scene.oracle(OracleParams::default());
        let partial = scene.partial_object();
        let a = gen
            .generate(&partial, &scene.partial_mask, &mut rng_from_seed(9))
            .unwrap();
        let b = gen
            .generate(&partial, &scene.partial_mask, &mut rng_from_seed(9))
            .unwrap();
        assert_eq!(a, b);
        assert!(gen
            .generate(&partial, &BinaryMask::empty(8, 8), &mut rng_from_seed(0))
            .is_err());
        let empty = PartialObject {
            image: GrayImage::zeros(64, 64),
            mask: BinaryMask::empty(64, 64),
        };
        assert!(gen
            .generate(&empty, &scene.partial_mask, &mut rng_from_seed(0))
            .is_err());
    }

    #[test]
    fn scene_record_round_trip() {
        let scene = scene_at(0.3, 44);
        let json = serde_json::to_string(&scene.to_record()).unwrap();
        let back = Scene::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, scene);
    }
}
