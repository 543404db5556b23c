//! Sweeps: run IMD over the benchmark once per value of one axis.
//!
//! Every scene keeps the same IMD root seed (`seed_derive(root, 1, scene)`)
//! across values, so differences between values are not seed noise.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.echo.json            the resolved configuration
//! benchmark.json              scenes (benchmark_<rate>.json per rate when the
//!                             occlusion rate is swept)
//! values/<axis>_<value>.csv   rows for one value; reused on rerun when the
//!                             echoed config is unchanged
//! sweep.csv                   all rows, value-major, scene-minor
//! sweep_summary.json          per-value aggregates
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::benchmark::{benchmark_json, build_benchmark, initial_condition, IMD_STREAM};
use super::config::{ExperimentConfig, SweepAxis};
use crate::engine::{convergence_step, run_imd_from, ImdConfig};
use crate::error::{ImdError, Result};
use crate::par::{try_map_indexed, Execution};
use crate::seed::seed_derive;
use crate::segmenter::SegmenterKind;
use crate::shape_world::Scene;
use crate::toy::train::ConditionKind;

pub const SWEEP_HEADER: &str = "axis_value,scene_id,final_iou,conv_step,steps_run";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub scene_id: usize,
    pub final_iou: f64,
    pub conv_step: u32,
    pub steps_run: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueSummary {
    pub axis_value: String,
    pub scenes: usize,
    pub mean_final_iou: f64,
    /// Sample standard deviation (zero for a single scene).
    pub std_final_iou: f64,
    pub mean_conv_step: f64,
    pub mean_steps_run: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub axis: String,
    pub values: Vec<ValueSummary>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn mean_iou(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.mean_final_iou).collect()
    }

    pub fn mean_conv(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.mean_conv_step).collect()
    }

    pub fn csv(&self) -> String {
        rows_csv(&self.rows)
    }
}

/// Everything one sweep value changes.
#[derive(Clone, Debug)]
struct Variant {
    label: String,
    imd: ImdConfig,
    segmenter: SegmenterKind,
    rate: f64,
    first: ConditionKind,
}

fn variants(cfg: &ExperimentConfig, axis: &SweepAxis) -> Vec<Variant> {
    let base = Variant {
        label: String::new(),
        imd: cfg.imd,
        segmenter: cfg.segmenter.clone(),
        rate: cfg.target_rate,
        first: ConditionKind::Partial,
    };
    let labels = axis.labels();
    let mut out = Vec::with_capacity(labels.len());
    for (i, label) in labels.into_iter().enumerate() {
        let mut v = Variant { label, ..base.clone() };
        match axis {
            SweepAxis::Steps(x) => v.imd.steps = x[i],
            SweepAxis::Samples(x) => v.imd.samples = x[i],
            SweepAxis::OcclusionRate(x) => v.rate = x[i],
            SweepAxis::NoiseDegree(x) => {
                v.segmenter = SegmenterKind::Noisy {
                    level: x[i],
                    inner: Box::new(cfg.segmenter.clone()),
                }
            }
            SweepAxis::Voting(x) => v.imd.strategy.kind = x[i],
            SweepAxis::MaskType(x) => v.first = x[i],
        }
        out.push(v);
    }
    out
}

fn run_scene(cfg: &ExperimentConfig, v: &Variant, scene: &Scene) -> Result<SweepRow> {
    let imd = ImdConfig {
        root_seed: seed_derive(cfg.root_seed, IMD_STREAM, scene.id as u64),
        ..v.imd
    };
    let initial = initial_condition(cfg, scene, v.first)?;
    let gen = scene.oracle(cfg.oracle);
    let trace = run_imd_from(
        &scene.partial_object(),
        &initial,
        Some(&scene.complete_mask),
        &gen,
        &v.segmenter,
        &imd,
        Execution::Sequential,
    )?;
    Ok(SweepRow {
        axis_value: v.label.clone(),
        scene_id: scene.id,
        final_iou: trace.final_iou().unwrap_or(0.0),
        conv_step: convergence_step(&trace, cfg.conv_eps),
        steps_run: trace.steps_run(),
    })
}

fn run_value(cfg: &ExperimentConfig, v: &Variant, scenes: &[Scene], exec: Execution) -> Result<Vec<SweepRow>> {
    try_map_indexed(scenes.len(), exec, |i| {
        run_scene(cfg, v, &scenes[i]).map_err(|e| ImdError::Sweep {
            scene: scenes[i].id,
            value: v.label.clone(),
            source: Box::new(e),
        })
    })
}

pub fn summarize_value(label: &str, rows: &[SweepRow]) -> ValueSummary {
    let n = rows.len().max(1) as f64;
    let mean = rows.iter().map(|r| r.final_iou).sum::<f64>() / n;
    let var = if rows.len() > 1 {
        rows.iter().map(|r| (r.final_iou - mean).powi(2)).sum::<f64>() / (rows.len() - 1) as f64
    } else {
        0.0
    };
    ValueSummary {
        axis_value: label.to_string(),
        scenes: rows.len(),
        mean_final_iou: mean,
        std_final_iou: var.sqrt(),
        mean_conv_step: rows.iter().map(|r| r.conv_step as f64).sum::<f64>() / n,
        mean_steps_run: rows.iter().map(|r| r.steps_run as f64).sum::<f64>() / n,
    }
}

pub fn rows_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.axis_value, r.scene_id, r.final_iou, r.conv_step, r.steps_run
        );
    }
    s
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(ImdError::invalid("sweep CSV header mismatch"));
    }
    let bad = |line: &str| ImdError::invalid(format!("malformed sweep row: {line}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(line));
            }
            Ok(SweepRow {
                axis_value: f[0].to_string(),
                scene_id: f[1].parse().map_err(|_| bad(line))?,
                final_iou: f[2].parse().map_err(|_| bad(line))?,
                conv_step: f[3].parse().map_err(|_| bad(line))?,
                steps_run: f[4].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

/// Run the configured sweep. With `out`, artifacts are written there and
/// per-value files from an earlier run with the same configuration are
/// reused instead of recomputed.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution, out: Option<&Path>) -> Result<SweepReport> {
    cfg.validate()?;
    let axis = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ImdError::invalid("configuration has no sweep axis"))?;
    let echo = cfg.to_json()?;
    let mut resumable = false;
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("values"))?;
        let echo_path = dir.join("config.echo.json");
        resumable = fs::read_to_string(&echo_path).is_ok_and(|old| old == echo);
        fs::write(&echo_path, &echo)?;
    }
    let per_rate = matches!(axis, SweepAxis::OcclusionRate(_));
    let mut shared: Option<Vec<Scene>> = None;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for v in variants(cfg, axis) {
        let value_path = out.map(|d| d.join("values").join(format!("{}_{}.csv", axis.name(), v.label)));
        let cached = match (&value_path, resumable) {
            (Some(p), true) => fs::read_to_string(p)
                .ok()
                .and_then(|t| parse_rows_csv(&t).ok())
                .filter(|r| r.len() == cfg.scene_count && r.iter().all(|row| row.axis_value == v.label)),
            _ => None,
        };
        let value_rows = match cached {
            Some(r) => r,
            None => {
                let scenes = if per_rate {
                    let s = build_benchmark(cfg, v.rate, exec)?;
                    if let Some(dir) = out {
                        fs::write(dir.join(format!("benchmark_{}.json", v.label)), benchmark_json(&s)?)?;
                    }
                    s
                } else {
                    if shared.is_none() {
                        let s = build_benchmark(cfg, cfg.target_rate, exec)?;
                        if let Some(dir) = out {
                            fs::write(dir.join("benchmark.json"), benchmark_json(&s)?)?;
                        }
                        shared = Some(s);
                    }
                    shared.clone().expect("built above")
                };
                let r = run_value(cfg, &v, &scenes, exec)?;
                if let Some(p) = &value_path {
                    fs::write(p, rows_csv(&r))?;
                }
                r
            }
        };
        values.push(summarize_value(&v.label, &value_rows));
        rows.extend(value_rows);
    }
    let report = SweepReport {
        axis: axis.name().to_string(),
        values,
        rows,
    };
    if let Some(dir) = out {
        fs::write(dir.join("sweep.csv"), report.csv())?;
        fs::write(
            dir.join("sweep_summary.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
    }
    Ok(report)
}
