//! Randomised property checks over masks, voting and occlusion, runnable
//! from the command line.

use rand::Rng;
use serde::Serialize;

use crate::mask::{dice, iou, is_unimodal, largest_component_containing, mean_masks, threshold, BinaryMask};
use crate::occlusion::{double_occlude, occlude, OcclusionKind, OcclusionSpec};
use crate::pgm;
use crate::seed::{rng_from_seed, seed_derive, SeededRng, AUX_STREAM};
use crate::voting::{fuse, VotingKind, VotingStrategy};

#[derive(Clone, Debug, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
}

impl SelfCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn random_mask(rng: &mut SeededRng, w: usize, h: usize, p: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
}

fn blob(rng: &mut SeededRng, n: usize) -> BinaryMask {
    let (cx, cy) = (
        rng.random_range(0.3..0.7) * n as f64,
        rng.random_range(0.3..0.7) * n as f64,
    );
    let (a, b) = (
        rng.random_range(0.1..0.3) * n as f64,
        rng.random_range(0.1..0.3) * n as f64,
    );
    BinaryMask::from_fn(n, n, |x, y| {
        let (dx, dy) = ((x as f64 + 0.5 - cx) / a, (y as f64 + 0.5 - cy) / b);
        dx * dx + dy * dy <= 1.0
    })
}

fn check(name: &'static str, trials: usize, seed: u64, mut f: impl FnMut(&mut SeededRng) -> bool) -> SelfCheck {
    let failures = (0..trials)
        .filter(|&i| {
            let mut rng = rng_from_seed(seed_derive(seed, AUX_STREAM, i as u64));
            !f(&mut rng)
        })
        .count();
    SelfCheck { name, trials, failures }
}

fn permuted<T: Clone>(v: &[T], rng: &mut SeededRng) -> Vec<T> {
    let mut out = v.to_vec();
    for i in (1..out.len()).rev() {
        out.swap(i, rng.random_range(0..=i));
    }
    out
}

pub fn run_selftest(seed: u64, trials: usize) -> Vec<SelfCheck> {
    let strategies = |tau| {
        [
            VotingKind::LogitsVote,
            VotingKind::LogitsMean,
            VotingKind::MaskVote,
            VotingKind::MaskMean,
        ]
        .map(|k| VotingStrategy::new(k, tau))
    };
    vec![
        check("iou_le_dice", trials, seed, |rng| {
            let (a, b) = (random_mask(rng, 6, 5, 0.4), random_mask(rng, 6, 5, 0.4));
            let (i, d) = (iou(&a, &b).unwrap(), dice(&a, &b).unwrap());
            i <= d + 1e-12 && ((i - d).abs() < 1e-12) == (i == 0.0 || i == 1.0)
        }),
        check("threshold_of_single_mean", trials, seed ^ 1, |rng| {
            let m = random_mask(rng, 7, 4, 0.5);
            let tau = rng.random_range(0.01..=1.0);
            threshold(&mean_masks(std::slice::from_ref(&m)).unwrap(), tau).unwrap() == m
        }),
        check("mean_masks_permutation", trials, seed ^ 2, |rng| {
            let ms: Vec<BinaryMask> = (0..5).map(|_| random_mask(rng, 4, 4, 0.5)).collect();
            mean_masks(&ms).unwrap() == mean_masks(&permuted(&ms, rng)).unwrap()
        }),
        check("sorted_is_unimodal", trials, seed ^ 3, |rng| {
            let mut v: Vec<f64> = (0..rng.random_range(0..12)).map(|_| rng.random()).collect();
            v.sort_by(f64::total_cmp);
            let up = is_unimodal(&v, 0.0);
            v.reverse();
            up && is_unimodal(&v, 0.0)
        }),
        check("component_filter", trials, seed ^ 4, |rng| {
            let m = random_mask(rng, 8, 8, 0.45);
            let s = random_mask(rng, 8, 8, 0.2);
            let c = largest_component_containing(&m, &s).unwrap();
            c.is_subset_of(&m) && (c.is_empty() == m.is_empty()) && (c.is_empty() || c.is_connected())
        }),
        check("pgm_binary_round_trip", trials, seed ^ 5, |rng| {
            let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
            let m = random_mask(rng, w, h, 0.5);
            pgm::decode_binary(&pgm::encode_binary(&m)).unwrap() == m
        }),
        check("mask_mean_counting_oracle", trials, seed ^ 6, |rng| {
            let ms: Vec<BinaryMask> = (0..5).map(|_| random_mask(rng, 4, 4, 0.5)).collect();
            let ls: Vec<_> = ms.iter().map(BinaryMask::to_prob).collect();
            let fused = fuse(&ms, &ls, &VotingStrategy::new(VotingKind::MaskMean, 0.5)).unwrap();
            (0..16).all(|i| {
                let count = ms.iter().filter(|m| m.get_index(i)).count();
                fused.get_index(i) == (count as f64 / 5.0 >= 0.5)
            })
        }),
        check("fuse_permutation", trials, seed ^ 7, |rng| {
            let ms: Vec<BinaryMask> = (0..4).map(|_| random_mask(rng, 5, 3, 0.5)).collect();
            let ls: Vec<_> = ms.iter().map(BinaryMask::to_prob).collect();
            let order = permuted(&(0..4).collect::<Vec<usize>>(), rng);
            let pm: Vec<_> = order.iter().map(|&i| ms[i].clone()).collect();
            let pl: Vec<_> = order.iter().map(|&i| ls[i].clone()).collect();
            let tau = rng.random_range(0.0..=1.0);
            strategies(tau)
                .iter()
                .all(|s| fuse(&ms, &ls, s).unwrap() == fuse(&pm, &pl, s).unwrap())
        }),
        check("mean_equals_vote_n5", trials, seed ^ 8, |rng| {
            let ms: Vec<BinaryMask> = (0..5).map(|_| random_mask(rng, 4, 4, 0.5)).collect();
            let ls: Vec<_> = ms.iter().map(BinaryMask::to_prob).collect();
            fuse(&ms, &ls, &VotingStrategy::new(VotingKind::MaskMean, 0.5)).unwrap()
                == fuse(&ms, &ls, &VotingStrategy::new(VotingKind::MaskVote, 0.5)).unwrap()
        }),
        check("occlusion_partition", trials, seed ^ 9, |rng| {
            let m = blob(rng, 24);
            if m.is_empty() {
                return true;
            }
            [
                OcclusionKind::Rectangle,
                OcclusionKind::Shift,
                OcclusionKind::Oval,
                OcclusionKind::Object,
            ]
            .iter()
            .all(|&kind| {
                let spec = OcclusionSpec {
                    kind,
                    ..Default::default()
                };
                let r = occlude(&m, &spec, rng).unwrap();
                r.occluder.is_subset_of(&m)
                    && r.occluded_mask.intersection_area(&r.occluder).unwrap() == 0
                    && r.occluded_mask.union(&r.occluder).unwrap() == m
                    && r.achieved_rate == r.occluder.area() as f64 / m.area() as f64
            })
        }),
        check("double_occlusion_chain", trials, seed ^ 10, |rng| {
            let m = blob(rng, 24);
            if m.is_empty() {
                return true;
            }
            let d = double_occlude(&m, &OcclusionSpec::default(), rng).unwrap();
            d.partial.is_subset_of(&d.intermediate) && d.intermediate.is_subset_of(&m)
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_selftest(1, 200) {
            assert!(c.passed(), "{} failed {}/{}", c.name, c.failures, c.trials);
        }
    }
}
