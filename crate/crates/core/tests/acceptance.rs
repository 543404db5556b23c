//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use imd_core::engine::{imd_step, Generator, ImdConfig};
use imd_core::harness::benchmark::build_scene;
use imd_core::harness::{run_sweep, ExperimentConfig, SweepAxis, SweepReport};
use imd_core::mask::{cross_section, mean_masks, unimodal_violations, BinaryMask};
use imd_core::par::Execution;
use imd_core::seed::{rng_from_seed, seed_derive, SeededRng, AUX_STREAM};
use imd_core::segmenter::{segment, SegmenterKind};
use imd_core::shape_world::OracleParams;
use imd_core::toy::gradcheck::default_gradcheck;
use imd_core::toy::model::{condition_input, ToyDenoiser, ToyDims};
use imd_core::toy::schedule::{forward_noise, NoiseSchedule};
use imd_core::toy::ConditionKind;
use imd_core::voting::{fuse, VotingKind, VotingStrategy};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const TREND_SLACK: f64 = 0.005;
const T5_MIN_IOU: f64 = 0.90;
const NOISE_IOU_BAND: f64 = 0.05;
/// Wrong-direction steps allowed per cross-section (any magnitude).
const UNIMODAL_MAX_VIOLATIONS: usize = 1;
const MOMENT_SES: f64 = 3.0;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn non_decreasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] >= w[0] - slack)
}

fn sweep(axis: SweepAxis) -> SweepReport {
    let cfg = ExperimentConfig {
        sweep: Some(axis),
        ..Default::default()
    };
    run_sweep(&cfg, Execution::Parallel, None).expect("sweep")
}

fn random_mask(rng: &mut SeededRng, w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(0.5))
}

fn voting_exactness() -> Outcome {
    let start = Instant::now();
    let strategy = VotingStrategy::new(VotingKind::MaskMean, 0.5);
    let mut mismatches = 0;
    for case in 0..1000u64 {
        let mut rng = rng_from_seed(seed_derive(101, AUX_STREAM, case));
        let masks: Vec<BinaryMask> = (0..5).map(|_| random_mask(&mut rng, 4, 4)).collect();
        let logits: Vec<_> = masks.iter().map(BinaryMask::to_prob).collect();
        let fused = fuse(&masks, &logits, &strategy).expect("fuse");
        for y in 0..4 {
            for x in 0..4 {
                let votes = masks.iter().filter(|m| m.get(x, y)).count();
                // 5 voters at tau = 0.5: three or more agree.
                if fused.get(x, y) != (votes >= 3) {
                    mismatches += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    outcome(
        mismatches == 0 && took < Duration::from_secs(1),
        format!("{mismatches} mismatches in 16000 pixels, {took:.2?}"),
    )
}

fn convergence_trend() -> Outcome {
    let start = Instant::now();
    let r = sweep(SweepAxis::Steps(vec![1, 3, 5, 7]));
    let took = start.elapsed();
    let m = r.mean_iou();
    outcome(
        non_decreasing(&m, TREND_SLACK) && m[2] >= T5_MIN_IOU && took < Duration::from_secs(120),
        format!("mean final IoU over T=1,3,5,7 {}, {took:.2?}", fmt(&m)),
    )
}

fn sample_trend() -> Outcome {
    let m = sweep(SweepAxis::Samples(vec![1, 3, 5])).mean_iou();
    outcome(
        non_decreasing(&m, TREND_SLACK),
        format!("mean final IoU over N=1,3,5 {}", fmt(&m)),
    )
}

fn occlusion_degradation() -> Outcome {
    let m = sweep(SweepAxis::OcclusionRate(vec![0.2, 0.4, 0.6, 0.8])).mean_iou();
    let gaps: Vec<f64> = m.windows(2).map(|w| w[0] - w[1]).collect();
    let strictly = gaps.iter().all(|&g| g > 0.0);
    let last_largest = gaps[..gaps.len() - 1].iter().all(|&g| g < gaps[gaps.len() - 1]);
    outcome(
        strictly && last_largest,
        format!("mean final IoU over 20..80% {}, drops {}", fmt(&m), fmt(&gaps)),
    )
}

fn noise_robustness() -> Outcome {
    let r = sweep(SweepAxis::NoiseDegree(vec![0.0, 0.05, 0.10, 0.15]));
    let (m, c) = (r.mean_iou(), r.mean_conv());
    let within = m.iter().all(|v| (v - m[0]).abs() <= NOISE_IOU_BAND);
    outcome(
        non_decreasing(&c, 0.0) && within,
        format!("mean conv step {}, mean final IoU {}", fmt(&c), fmt(&m)),
    )
}

fn condition_ordering() -> Outcome {
    let order = [
        ConditionKind::Partial,
        ConditionKind::Intermediate,
        ConditionKind::Complete,
    ];
    let m = sweep(SweepAxis::MaskType(order.to_vec())).mean_iou();
    outcome(
        non_decreasing(&m, TREND_SLACK),
        format!("mean final IoU partial/intermediate/complete {}", fmt(&m)),
    )
}

fn unimodality() -> Outcome {
    let cfg = ExperimentConfig::default();
    let seg = SegmenterKind::default();
    let (mut rows, mut bad, mut worst) = (0, 0, 0);
    for i in 0..20 {
        let scene = build_scene(&cfg, i, cfg.target_rate).expect("scene");
        let gen = scene.oracle(cfg.oracle);
        let partial = scene.partial_object();
        let masks: Vec<BinaryMask> = (0..200u64)
            .map(|k| {
                let mut rng = rng_from_seed(seed_derive(707, i as u64, k));
                let image = gen.generate(&partial, &scene.partial_mask, &mut rng).expect("generate");
                segment(&image, &partial.mask, &seg, &mut rng).expect("segment").0
            })
            .collect();
        let mean = mean_masks(&masks).expect("mean");
        for y in 0..scene.height() {
            let truth_row = (0..scene.width()).any(|x| scene.complete_mask.get(x, y));
            let visible_row = (0..scene.width()).any(|x| scene.partial_mask.get(x, y));
            if truth_row && !visible_row {
                rows += 1;
                let v = unimodal_violations(&cross_section(&mean, y).expect("row"), 0.0);
                worst = worst.max(v);
                bad += usize::from(v > UNIMODAL_MAX_VIOLATIONS);
            }
        }
    }
    outcome(
        bad == 0,
        format!("{bad} of {rows} fully occluded cross-sections over the limit, most violations in a row {worst}"),
    )
}

fn fixed_point() -> Outcome {
    let cfg = ExperimentConfig::default();
    let imd = ImdConfig::default();
    let mut exact = 0;
    for i in 0..100 {
        let scene = build_scene(&cfg, i, cfg.target_rate).expect("scene");
        let gen = scene.oracle(OracleParams::noiseless(cfg.oracle.fidelity_beta));
        let (fused, _) = imd_step(
            &scene.partial_object(),
            &scene.complete_mask,
            &gen,
            &cfg.segmenter,
            &ImdConfig {
                root_seed: i as u64,
                ..imd
            },
            1,
            Execution::Sequential,
        )
        .expect("step");
        exact += usize::from(fused == scene.complete_mask);
    }
    outcome(exact == 100, format!("{exact}/100 scenes returned the truth exactly"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let r = default_gradcheck().expect("gradcheck");
    let took = start.elapsed();
    let worst = r
        .groups
        .iter()
        .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
        .expect("groups");
    outcome(
        r.passed() && took < Duration::from_secs(30),
        format!(
            "{} groups, worst {} rel err {:.2e} (tol {:.0e}, h {:.0e}), {took:.2?}",
            r.groups.len(),
            worst.name,
            worst.max_rel_err,
            r.tol,
            r.h
        ),
    )
}

fn forward_moments() -> Outcome {
    const DRAWS: usize = 10_000;
    const X0: f64 = 0.7;
    let alpha_bar = [0.9, 0.5, 0.1];
    let sched = NoiseSchedule::from_alpha_bar(&alpha_bar).expect("schedule");
    let mut rng = rng_from_seed(1010);
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, &a) in alpha_bar.iter().enumerate() {
        let eps: Vec<f64> = (0..DRAWS).map(|_| StandardNormal.sample(&mut rng)).collect();
        let xs = forward_noise(&vec![X0; DRAWS], k + 1, &eps, &sched).expect("forward");
        let n = DRAWS as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (mu, s2) = (a.sqrt() * X0, 1.0 - a);
        let se_mean = (s2 / n).sqrt();
        let se_var = (2.0 * s2 * s2 / (n - 1.0)).sqrt();
        let (zm, zv) = ((mean - mu) / se_mean, (var - s2) / se_var);
        pass &= zm.abs() <= MOMENT_SES && zv.abs() <= MOMENT_SES;
        detail.push(format!("abar {a}: z_mean {zm:+.2}, z_var {zv:+.2}"));
    }
    outcome(pass, detail.join("; "))
}

fn gate_nullability() -> Outcome {
    let dims = ToyDims::default();
    let mut rng = rng_from_seed(1111);
    let mut model = ToyDenoiser::init(dims, &mut rng).expect("init");
    model.disable_gate();
    let mut changed = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..dims.pixels).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tau = rng.random_range(1..=100);
        let mut cond = || {
            let image: Vec<f64> = (0..dims.pixels).map(|_| rng.random()).collect();
            let mask: Vec<f64> = (0..dims.pixels)
                .map(|_| f64::from(u8::from(rng.random_bool(0.5))))
                .collect();
            condition_input(&image, &mask)
        };
        let (a, b) = (cond(), cond());
        let (ea, _) = model.denoiser_forward(&x, &a, tau).expect("forward");
        let (eb, _) = model.denoiser_forward(&x, &b, tau).expect("forward");
        changed += usize::from(ea != eb);
    }
    outcome(changed == 0, format!("{changed}/100 probes changed eps_hat"))
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("read_dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("prefix").to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).expect("read"));
            }
        }
    }
    out
}

fn imd(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_imd"))
        .args(args)
        .arg("--quiet")
        .status()
        .expect("spawn imd")
        .success()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let ran = imd(&["run", "--seed", "7", "--out", &p("run_a")]) && imd(&["run", "--seed", "7", "--out", &p("run_b")]);
    let config = tmp.path().join("steps.json");
    std::fs::write(
        &config,
        r#"{"version": 1, "sweep": {"axis": "steps", "values": [1, 3, 5, 7]}}"#,
    )
    .expect("write");
    let cfg = config.to_string_lossy().into_owned();
    let swept = imd(&["sweep", "--config", &cfg, "--out", &p("sweep_a")])
        && imd(&["sweep", "--config", &cfg, "--out", &p("sweep_b")]);
    if !(ran && swept) {
        return outcome(false, "imd exited with failure");
    }
    let (a, b) = (
        read_tree(&tmp.path().join("run_a")),
        read_tree(&tmp.path().join("run_b")),
    );
    let same_run = !a.is_empty() && a == b;
    let csv = |d: &str| std::fs::read(tmp.path().join(d).join("sweep.csv")).expect("sweep.csv");
    let same_sweep = csv("sweep_a") == csv("sweep_b");
    outcome(
        same_run && same_sweep,
        format!(
            "run dirs identical: {same_run} ({} files), sweep.csv identical: {same_sweep}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("voting exactness", voting_exactness),
        ("IMD convergence trend", convergence_trend),
        ("sample-count trend", sample_trend),
        ("occlusion-rate degradation", occlusion_degradation),
        ("noise robustness", noise_robustness),
        ("conditioned-mask ordering", condition_ordering),
        ("unimodality", unimodality),
        ("fixed point", fixed_point),
        ("toy gradient check", gradient_check),
        ("forward-process moments", forward_moments),
        ("gate nullability", gate_nullability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = match std::panic::catch_unwind(f) {
            Ok(o) => o,
            Err(_) => outcome(false, "panicked"),
        };
        failed += usize::from(!o.pass);
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
