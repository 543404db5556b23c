//! Benchmark construction: seeded scenes occluded to a target rate.
//!
//! Scene `i` draws from `seed_derive(root, AUX_STREAM, i)`. The shape is drawn
//! first, so benchmarks built at different rates share shapes unless a rate
//! forces a redraw.

use rand::Rng;

use super::config::ExperimentConfig;
use crate::error::{ImdError, Result};
use crate::mask::BinaryMask;
use crate::occlusion::{compose_double, occlude, occlude_to_rate};
use crate::par::{try_map_indexed, Execution};
use crate::seed::{rng_from_seed, seed_derive, AUX_STREAM};
use crate::shape_world::{render, sample_shape, Scene, SceneRecord};
use crate::toy::train::ConditionKind;

/// Step index of the per-scene IMD root seeds.
pub const IMD_STREAM: u64 = 1;
/// Step index of the per-scene intermediate-mask streams.
pub const INTERMEDIATE_STREAM: u64 = 2;

const SHAPE_REDRAWS: usize = 200;
const CENTROID_TRIES: usize = 64;
const INTERMEDIATE_TRIES: usize = 200;

/// Scene `index` of the benchmark at `rate`.
pub fn build_scene(cfg: &ExperimentConfig, index: usize, rate: f64) -> Result<Scene> {
    let w = &cfg.world;
    let seed = seed_derive(cfg.root_seed, AUX_STREAM, index as u64);
    let mut rng = rng_from_seed(seed);
    for _ in 0..SHAPE_REDRAWS {
        let shape = sample_shape(&mut rng, w.width, w.height, w.k_range, w.semi_axis_range)?;
        let complete = render(&shape, w.width, w.height);
        let [amin, amax] = w.appearance_range;
        let appearance = if amax > amin {
            rng.random_range(amin..=amax)
        } else {
            amin
        };
        let occ = occlude_to_rate(&complete, rate, cfg.rate_tol, &mut rng, CENTROID_TRIES)?;
        if (occ.achieved_rate - rate).abs() <= cfg.rate_tol && !occ.occluded_mask.is_empty() {
            return Scene::new(index, seed, shape, appearance, complete, &occ.occluder);
        }
    }
    Err(ImdError::RetryExhausted(format!(
        "scene {index}: no shape reached occlusion rate {rate} +- {}",
        cfg.rate_tol
    )))
}

pub fn build_benchmark(cfg: &ExperimentConfig, rate: f64, exec: Execution) -> Result<Vec<Scene>> {
    cfg.validate()?;
    try_map_indexed(cfg.scene_count, exec, |i| build_scene(cfg, i, rate))
}

pub fn benchmark_json(scenes: &[Scene]) -> Result<String> {
    let records: Vec<SceneRecord> = scenes.iter().map(Scene::to_record).collect();
    Ok(serde_json::to_string_pretty(&records)? + "\n")
}

pub fn load_benchmark(json: &str) -> Result<Vec<Scene>> {
    let records: Vec<SceneRecord> = serde_json::from_str(json)?;
    records.iter().map(Scene::from_record).collect()
}

/// A mask between the visible and the complete mask. The scene's occluder is
/// split by a second random occlusion `O'`: the part under `O'` stays hidden
/// and the rest is revealed, so `partial ⊆ intermediate ⊆ complete` with both
/// inclusions strict when the occluder has at least two pixels. If no draw
/// splits the occluder, the half of it geodesically nearest the visible
/// region is revealed.
pub fn intermediate_mask(cfg: &ExperimentConfig, scene: &Scene) -> Result<BinaryMask> {
    let occluder = &scene.occluder;
    let n = occluder.area();
    if n < 2 {
        return Ok(scene.partial_mask.clone());
    }
    let mut rng = rng_from_seed(seed_derive(cfg.root_seed, INTERMEDIATE_STREAM, scene.id as u64));
    for _ in 0..INTERMEDIATE_TRIES {
        let o = occlude(&scene.complete_mask, &cfg.occlusion, &mut rng)?;
        let still_hidden = o.occluder.intersection(occluder)?;
        let k = still_hidden.area();
        if k > 0 && k < n {
            return Ok(compose_double(&scene.complete_mask, &still_hidden, occluder).intermediate);
        }
    }
    let dist = scene.complete_mask.geodesic_distance(&scene.partial_mask)?;
    let mut hidden: Vec<usize> = occluder.foreground().collect();
    hidden.sort_by_key(|&i| (dist[i], i));
    let mut m = scene.partial_mask.clone();
    for &i in &hidden[..n / 2] {
        m.set_index(i, true);
    }
    Ok(m)
}

/// The first-step condition for a mask-type experiment.
pub fn initial_condition(cfg: &ExperimentConfig, scene: &Scene, kind: ConditionKind) -> Result<BinaryMask> {
    match kind {
        ConditionKind::Partial => Ok(scene.partial_mask.clone()),
        ConditionKind::Intermediate => intermediate_mask(cfg, scene),
        ConditionKind::Complete => Ok(scene.complete_mask.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::iou;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            scene_count: 6,
            root_seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn rates_are_on_target() {
        let cfg = small_cfg();
        for rate in [0.2, 0.4, 0.6, 0.8] {
            for s in build_benchmark(&cfg, rate, Execution::Sequential).unwrap() {
                assert!(
                    (s.occlusion_rate() - rate).abs() <= 0.02,
                    "{rate}: {}",
                    s.occlusion_rate()
                );
            }
        }
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let cfg = small_cfg();
        let a = build_benchmark(&cfg, 0.4, Execution::Parallel).unwrap();
        let b = build_benchmark(&cfg, 0.4, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let json = benchmark_json(&a).unwrap();
        assert_eq!(load_benchmark(&json).unwrap(), a);
        assert_eq!(benchmark_json(&b).unwrap(), json);
    }

    #[test]
    fn intermediate_sits_between() {
        let cfg = small_cfg();
        for s in build_benchmark(&cfg, 0.4, Execution::Sequential).unwrap() {
            let m = intermediate_mask(&cfg, &s).unwrap();
            assert!(s.partial_mask.is_subset_of(&m));
            assert!(m.is_subset_of(&s.complete_mask));
            assert!(m != s.partial_mask && m != s.complete_mask);
            let (p, i) = (
                iou(&s.partial_mask, &s.complete_mask).unwrap(),
                iou(&m, &s.complete_mask).unwrap(),
            );
            assert!(p < i && i < 1.0);
        }
    }
}
