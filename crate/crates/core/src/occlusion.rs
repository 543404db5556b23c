//! Occlusion synthesis: partial objects from complete ones.
//!
//! Rectangle and oval occluders are centred on a foreground pixel and sized
//! relative to the mask's bounding box. Shift occluders translate the mask
//! itself by a bbox-relative offset (random sign per axis) and remove the
//! overlap. All operations are deterministic functions of their inputs and
//! the random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ImdError, Result};
use crate::mask::{bbox_of, BinaryMask};
use crate::seed::SeededRng;

/// Ratio range used for rectangle occluders during training.
pub const DEFAULT_RATIO_RANGE: [f64; 2] = [0.2, 0.9];
/// Shift range used for shift (and object) occluders.
pub const DEFAULT_SHIFT_RANGE: [f64; 2] = [0.17, 0.25];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionKind {
    Rectangle,
    Shift,
    Oval,
    Object,
    /// Rectangle or shift with equal probability (the training mix).
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionSpec {
    pub kind: OcclusionKind,
    #[serde(default = "default_ratio")]
    pub ratio_range: [f64; 2],
    #[serde(default = "default_shift")]
    pub shift_range: [f64; 2],
}

fn default_ratio() -> [f64; 2] {
    DEFAULT_RATIO_RANGE
}

fn default_shift() -> [f64; 2] {
    DEFAULT_SHIFT_RANGE
}

impl Default for OcclusionSpec {
    fn default() -> Self {
        OcclusionSpec {
            kind: OcclusionKind::Mixed,
            ratio_range: DEFAULT_RATIO_RANGE,
            shift_range: DEFAULT_SHIFT_RANGE,
        }
    }
}

impl OcclusionSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("ratio_range", self.ratio_range)?;
        check_range("shift_range", self.shift_range)
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2]) -> Result<()> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(ImdError::invalid(format!(
            "{name} [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionResult {
    pub occluded_mask: BinaryMask,
    /// The removed foreground: `original \ occluded_mask`.
    pub occluder: BinaryMask,
    /// `|occluder| / |original|`.
    pub achieved_rate: f64,
}

impl OcclusionResult {
    fn from_region(mask: &BinaryMask, region: &BinaryMask) -> Self {
        let occluder = region.intersection(mask).expect("same dims");
        let occluded_mask = mask.difference(&occluder).expect("same dims");
        let achieved_rate = occluder.area() as f64 / mask.area() as f64;
        OcclusionResult {
            occluded_mask,
            occluder,
            achieved_rate,
        }
    }
}

/// Rectangle (or inscribed ellipse) in continuous image coordinates.
/// A pixel is covered when its centre lies strictly inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occluder {
    pub cx: f64,
    pub cy: f64,
    pub half_w: f64,
    pub half_h: f64,
    pub oval: bool,
}

impl Occluder {
    pub fn render(&self, width: usize, height: usize) -> BinaryMask {
        if self.half_w <= 0.0 || self.half_h <= 0.0 {
            return BinaryMask::empty(width, height);
        }
        BinaryMask::from_fn(width, height, |x, y| {
            let dx = (x as f64 + 0.5 - self.cx) / self.half_w;
            let dy = (y as f64 + 0.5 - self.cy) / self.half_h;
            if self.oval {
                dx * dx + dy * dy < 1.0
            } else {
                dx.abs() < 1.0 && dy.abs() < 1.0
            }
        })
    }
}

fn require_nonempty(mask: &BinaryMask) -> Result<()> {
    if mask.is_empty() {
        return Err(ImdError::Empty("mask to occlude has no foreground"));
    }
    Ok(())
}

/// Pixel centre of a uniformly drawn foreground pixel.
fn sample_centroid(mask: &BinaryMask, rng: &mut SeededRng) -> (f64, f64) {
    let fg: Vec<usize> = mask.foreground().collect();
    let i = fg[rng.random_range(0..fg.len())];
    ((i % mask.width()) as f64 + 0.5, (i / mask.width()) as f64 + 0.5)
}

fn uniform(rng: &mut SeededRng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Apply a fixed occluder shape to `mask`.
pub fn occlude_with(mask: &BinaryMask, occluder: &Occluder) -> Result<OcclusionResult> {
    require_nonempty(mask)?;
    let region = occluder.render(mask.width(), mask.height());
    Ok(OcclusionResult::from_region(mask, &region))
}

fn sized_occlude(mask: &BinaryMask, ratio_range: [f64; 2], oval: bool, rng: &mut SeededRng) -> Result<OcclusionResult> {
    require_nonempty(mask)?;
    check_range("ratio_range", ratio_range)?;
    let bb = bbox_of(mask)?;
    let (cx, cy) = sample_centroid(mask, rng);
    let rw = uniform(rng, ratio_range) * bb.width() as f64;
    let rh = uniform(rng, ratio_range) * bb.height() as f64;
    occlude_with(
        mask,
        &Occluder {
            cx,
            cy,
            half_w: rw / 2.0,
            half_h: rh / 2.0,
            oval,
        },
    )
}

/// Rectangle centred on a random foreground pixel, each side an independent
/// ratio of the corresponding bbox side.
pub fn rect_occlude(mask: &BinaryMask, ratio_range: [f64; 2], rng: &mut SeededRng) -> Result<OcclusionResult> {
    sized_occlude(mask, ratio_range, false, rng)
}

/// Axis-aligned ellipse inscribed in the rectangle [`rect_occlude`] would draw.
pub fn oval_occlude(mask: &BinaryMask, ratio_range: [f64; 2], rng: &mut SeededRng) -> Result<OcclusionResult> {
    sized_occlude(mask, ratio_range, true, rng)
}

/// Overlap of the mask with a translated copy of itself. The offset per axis
/// is a uniform fraction of the bbox side with a random sign.
pub fn shift_occlude(mask: &BinaryMask, shift_range: [f64; 2], rng: &mut SeededRng) -> Result<OcclusionResult> {
    require_nonempty(mask)?;
    check_range("shift_range", shift_range)?;
    let bb = bbox_of(mask)?;
    let mut offset = |side: usize| {
        let mag = (uniform(rng, shift_range) * side as f64).round() as isize;
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let dx = offset(bb.width());
    let dy = offset(bb.height());
    Ok(OcclusionResult::from_region(mask, &mask.translate(dx, dy)))
}

/// Occlusion by the object's own (shifted) silhouette.
pub fn object_occlude(mask: &BinaryMask, rng: &mut SeededRng) -> Result<OcclusionResult> {
    shift_occlude(mask, DEFAULT_SHIFT_RANGE, rng)
}

/// One random occlusion drawn according to `spec`.
pub fn occlude(mask: &BinaryMask, spec: &OcclusionSpec, rng: &mut SeededRng) -> Result<OcclusionResult> {
    spec.validate()?;
    match spec.kind {
        OcclusionKind::Rectangle => rect_occlude(mask, spec.ratio_range, rng),
        OcclusionKind::Oval => oval_occlude(mask, spec.ratio_range, rng),
        OcclusionKind::Shift => shift_occlude(mask, spec.shift_range, rng),
        OcclusionKind::Object => object_occlude(mask, rng),
        OcclusionKind::Mixed => {
            if rng.random_bool(0.5) {
                rect_occlude(mask, spec.ratio_range, rng)
            } else {
                shift_occlude(mask, spec.shift_range, rng)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoubleOcclusion {
    /// `complete \ (O1 ∪ O2)`.
    pub partial: BinaryMask,
    /// `complete \ O1`.
    pub intermediate: BinaryMask,
}

/// Two independent occlusions of the complete mask: the partial mask loses
/// both occluded regions, the intermediate mask only the first.
pub fn double_occlude(complete: &BinaryMask, spec: &OcclusionSpec, rng: &mut SeededRng) -> Result<DoubleOcclusion> {
    let first = occlude(complete, spec, rng)?;
    let second = occlude(complete, spec, rng)?;
    Ok(compose_double(complete, &first.occluder, &second.occluder))
}

pub(crate) fn compose_double(complete: &BinaryMask, o1: &BinaryMask, o2: &BinaryMask) -> DoubleOcclusion {
    let both = o1.union(o2).expect("same dims");
    DoubleOcclusion {
        partial: complete.difference(&both).expect("same dims"),
        intermediate: complete.difference(o1).expect("same dims"),
    }
}

/// Rectangle occlusion whose scale is bisected until the removed fraction is
/// within `tol` of `target_rate`.
///
/// Each try samples a centroid (a foreground pixel plus sub-pixel jitter, so
/// opposite sides of the rectangle cross pixel centres at different scales)
/// and bisects the scale `s` of an `s * bbox_w` by `s * bbox_h` rectangle.
/// Returns the best result over at most `max_tries` centroids.
pub fn occlude_to_rate(
    mask: &BinaryMask,
    target_rate: f64,
    tol: f64,
    rng: &mut SeededRng,
    max_tries: usize,
) -> Result<OcclusionResult> {
    require_nonempty(mask)?;
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(ImdError::invalid(format!(
            "target rate {target_rate} must lie in (0,1)"
        )));
    }
    let bb = bbox_of(mask)?;
    let (bw, bh) = (bb.width() as f64, bb.height() as f64);
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    // Large enough to cover the whole canvas from any centroid.
    let s_max = 2.0 * (w / bw).max(h / bh) + 1.0;
    let mut best: Option<OcclusionResult> = None;
    for _ in 0..max_tries.max(1) {
        let (px, py) = sample_centroid(mask, rng);
        let cx = px + rng.random_range(-0.5..0.5);
        let cy = py + rng.random_range(-0.5..0.5);
        let at = |s: f64| {
            occlude_with(
                mask,
                &Occluder {
                    cx,
                    cy,
                    half_w: s * bw / 2.0,
                    half_h: s * bh / 2.0,
                    oval: false,
                },
            )
        };
        let (mut lo, mut hi) = (0.0, s_max);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            let r = at(mid)?;
            let err = (r.achieved_rate - target_rate).abs();
            let improves = best
                .as_ref()
                .is_none_or(|b| err < (b.achieved_rate - target_rate).abs());
            if r.achieved_rate < target_rate {
                lo = mid;
            } else {
                hi = mid;
            }
            if improves {
                best = Some(r);
            }
            if err <= tol {
                return Ok(best.expect("set above"));
            }
        }
    }
    Ok(best.expect("at least one evaluation"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn disk(n: usize, r: f64) -> BinaryMask {
        let c = n as f64 / 2.0;
        BinaryMask::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            dx * dx + dy * dy <= r * r
        })
    }

    fn check_partition(orig: &BinaryMask, r: &OcclusionResult) {
        assert!(r.occluder.is_subset_of(orig));
        assert_eq!(r.occluded_mask.intersection_area(&r.occluder).unwrap(), 0);
        assert_eq!(r.occluded_mask.union(&r.occluder).unwrap(), *orig);
        assert_eq!(r.achieved_rate, r.occluder.area() as f64 / orig.area() as f64);
    }

    #[test]
    fn zero_ratio_is_identity() {
        let m = disk(32, 10.0);
        let mut rng = rng_from_seed(1);
        for r in [
            rect_occlude(&m, [0.0, 0.0], &mut rng).unwrap(),
            oval_occlude(&m, [0.0, 0.0], &mut rng).unwrap(),
        ] {
            assert!(r.occluder.is_empty());
            assert_eq!(r.occluded_mask, m);
            assert_eq!(r.achieved_rate, 0.0);
        }
    }

    #[test]
    fn full_ratio_covers_a_quarter() {
        // The mask is its own bbox; a full-size rectangle centred anywhere in
        // it covers at least a quarter. Check the centre and every corner.
        let m = BinaryMask::from_fn(20, 20, |x, y| (4..14).contains(&x) && (6..12).contains(&y));
        for (cx, cy) in [(9.0, 9.0), (4.5, 6.5), (13.5, 11.5), (4.5, 11.5)] {
            let r = occlude_with(
                &m,
                &Occluder {
                    cx,
                    cy,
                    half_w: 5.0,
                    half_h: 3.0,
                    oval: false,
                },
            )
            .unwrap();
            assert!(r.achieved_rate >= 0.25, "rate {} at ({cx},{cy})", r.achieved_rate);
        }
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            assert!(rect_occlude(&m, [1.0, 1.0], &mut rng).unwrap().achieved_rate >= 0.25);
        }
    }

    #[test]
    fn default_ranges_stay_strictly_inside_unit_interval() {
        let m = disk(64, 20.0);
        let mut rng = rng_from_seed(5);
        for _ in 0..1000 {
            for r in [
                rect_occlude(&m, DEFAULT_RATIO_RANGE, &mut rng).unwrap(),
                oval_occlude(&m, DEFAULT_RATIO_RANGE, &mut rng).unwrap(),
                shift_occlude(&m, DEFAULT_SHIFT_RANGE, &mut rng).unwrap(),
                object_occlude(&m, &mut rng).unwrap(),
            ] {
                assert!(r.achieved_rate > 0.0 && r.achieved_rate < 1.0);
                check_partition(&m, &r);
            }
        }
    }

    #[test]
    fn shift_extremes() {
        let m = disk(40, 8.0);
        let mut rng = rng_from_seed(9);
        let r = shift_occlude(&m, [0.0, 0.0], &mut rng).unwrap();
        assert_eq!(r.occluder, m);
        assert!(r.occluded_mask.is_empty());
        let blob = BinaryMask::from_fn(40, 40, |x, y| (10..20).contains(&x) && (10..20).contains(&y));
        let r = shift_occlude(&blob, [1.0, 1.0], &mut rng).unwrap();
        assert!(r.occluder.is_empty());
    }

    #[test]
    fn oval_area_matches_analytic() {
        let m = BinaryMask::full(128, 128);
        let occ = Occluder {
            cx: 64.0,
            cy: 64.0,
            half_w: 40.0,
            half_h: 25.0,
            oval: true,
        };
        let area = occ.render(128, 128).area() as f64;
        let analytic = std::f64::consts::PI / 4.0 * 80.0 * 50.0;
        assert!((area - analytic).abs() / analytic < 0.05);
        let rect = Occluder { oval: false, ..occ }.render(128, 128).area() as f64;
        assert!((area / rect - std::f64::consts::FRAC_PI_4).abs() < 0.05);
        assert!(occlude_with(&m, &occ).unwrap().achieved_rate > 0.0);
    }

    #[test]
    fn double_occlusion_chain() {
        let m = disk(64, 20.0);
        let mut rng = rng_from_seed(11);
        for _ in 0..1000 {
            let d = double_occlude(&m, &OcclusionSpec::default(), &mut rng).unwrap();
            assert!(d.partial.is_subset_of(&d.intermediate));
            assert!(d.intermediate.is_subset_of(&m));
        }
        let empty = BinaryMask::empty(64, 64);
        let d = compose_double(&m, &empty, &empty);
        assert_eq!(d.partial, m);
        assert_eq!(d.intermediate, m);
        let o1 = disk(64, 5.0);
        let d = compose_double(&m, &o1, &empty);
        assert_eq!(d.partial, d.intermediate);
    }

    #[test]
    fn rate_targeting() {
        let m = disk(64, 20.0);
        let mut rng = rng_from_seed(13);
        for _ in 0..20 {
            let r = occlude_to_rate(&m, 0.5, 0.02, &mut rng, 8).unwrap();
            assert!((0.48..=0.52).contains(&r.achieved_rate), "{}", r.achieved_rate);
            check_partition(&m, &r);
        }
        let r = occlude_to_rate(&m, 0.01, 0.005, &mut rng, 8).unwrap();
        assert!(r.achieved_rate < 0.02);
        assert!(r.occluded_mask.area() as f64 > 0.98 * m.area() as f64);
        assert!(occlude_to_rate(&m, 1.0, 0.02, &mut rng, 8).is_err());
    }

    #[test]
    fn rate_grows_with_scale() {
        let m = disk(64, 20.0);
        let mut last = 0.0;
        for i in 0..200 {
            let s = i as f64 * 0.02;
            let r = occlude_with(
                &m,
                &Occluder {
                    cx: 27.3,
                    cy: 35.8,
                    half_w: s * 20.0,
                    half_h: s * 20.0,
                    oval: false,
                },
            )
            .unwrap();
            assert!(r.achieved_rate >= last);
            last = r.achieved_rate;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn errors() {
        let e = BinaryMask::empty(8, 8);
        let mut rng = rng_from_seed(0);
        assert!(rect_occlude(&e, DEFAULT_RATIO_RANGE, &mut rng).is_err());
        assert!(shift_occlude(&e, DEFAULT_SHIFT_RANGE, &mut rng).is_err());
        assert!(double_occlude(&e, &OcclusionSpec::default(), &mut rng).is_err());
        let m = disk(16, 4.0);
        assert!(rect_occlude(&m, [0.6, 0.2], &mut rng).is_err());
        assert!(shift_occlude(&m, [0.1, 1.5], &mut rng).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let m = disk(64, 18.0);
        let a = double_occlude(&m, &OcclusionSpec::default(), &mut rng_from_seed(77)).unwrap();
        let b = double_occlude(&m, &OcclusionSpec::default(), &mut rng_from_seed(77)).unwrap();
        assert_eq!(a, b);
    }
}
