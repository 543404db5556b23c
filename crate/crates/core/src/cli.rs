//! The `imd` command line.
//!
//! Exit codes: 0 success, 1 failure (including failed checks), 2 bad
//! configuration or arguments.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::{export_trace, run_imd, ImdConfig};
use crate::error::{ImdError, Result};
use crate::harness::benchmark::{benchmark_json, build_benchmark, build_scene, IMD_STREAM};
use crate::harness::config::ExperimentConfig;
use crate::harness::selftest::run_selftest;
use crate::harness::sweep::run_sweep;
use crate::par::Execution;
use crate::pgm;
use crate::seed::seed_derive;
use crate::toy::checkpoint::Checkpoint;
use crate::toy::gradcheck::default_gradcheck;
use crate::toy::train::{evaluate_conditioning, log_csv, train};

const DEFAULT_OUT: &str = "imd-out";
const CONDITIONING_CASES: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "imd", version, about = "Iterative mask denoising on a synthetic shape world")]
struct Cli {
    /// JSON experiment configuration (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run IMD on one benchmark scene and export its trace.
    Run {
        #[arg(long, default_value_t = 0)]
        scene: usize,
    },
    /// Run the configured sweep.
    Sweep,
    /// Build the benchmark and write it as JSON.
    Bench,
    /// Train the toy diffusion model.
    TrainToy,
    /// Finite-difference check of the toy model's gradients.
    Gradcheck,
    /// Randomised property checks of masks, voting and occlusion.
    Selftest {
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    out_given: bool,
    quiet: bool,
    exec: Execution,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join("config.echo.json"), self.cfg.to_json()?)?;
        Ok(())
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.root_seed = seed;
        cfg.toy.seed = seed;
    }
    cfg.validate().map_err(|e| ImdError::Config {
        path: cli.config.clone().unwrap_or_else(|| PathBuf::from("<defaults>")),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let out_given = cli.out.is_some() || cfg.output_dir.is_some();
    let ctx = Ctx {
        out: cli
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        out_given,
        cfg,
        quiet: cli.quiet,
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let result = match cli.command {
        Command::Run { scene } => cmd_run(&ctx, scene),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Bench => cmd_bench(&ctx),
        Command::TrainToy => cmd_train(&ctx),
        Command::Gradcheck => cmd_gradcheck(&ctx),
        Command::Selftest { trials } => cmd_selftest(&ctx, trials),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_run(ctx: &Ctx, index: usize) -> Result<bool> {
    let cfg = &ctx.cfg;
    let scene = build_scene(cfg, index, cfg.target_rate)?;
    let imd = ImdConfig {
        root_seed: seed_derive(cfg.root_seed, IMD_STREAM, index as u64),
        ..cfg.imd
    };
    let trace = run_imd(&scene, &scene.oracle(cfg.oracle), &cfg.segmenter, &imd, ctx.exec)?;
    ctx.prepare_out()?;
    let dir: &Path = &ctx.out;
    fs::write(
        dir.join("scene.json"),
        serde_json::to_string_pretty(&scene.to_record())? + "\n",
    )?;
    pgm::write_binary(&dir.join("complete.pgm"), &scene.complete_mask)?;
    pgm::write_binary(&dir.join("partial.pgm"), &scene.partial_mask)?;
    export_trace(&trace, &imd, Some(&scene.complete_mask), dir)?;
    ctx.say(format!(
        "scene {index}: occlusion {:.3}, iou {:.4} -> {:.4} after {} steps; wrote {}",
        scene.occlusion_rate(),
        crate::mask::iou(&scene.partial_mask, &scene.complete_mask)?,
        trace.final_iou().unwrap_or(0.0),
        trace.steps_run(),
        dir.display()
    ));
    Ok(true)
}

fn cmd_sweep(ctx: &Ctx) -> Result<bool> {
    let report = run_sweep(&ctx.cfg, ctx.exec, Some(&ctx.out))?;
    ctx.say(format!(
        "{:<14} {:>10} {:>10} {:>10}",
        report.axis, "mean_iou", "std_iou", "mean_conv"
    ));
    for v in &report.values {
        ctx.say(format!(
            "{:<14} {:>10.4} {:>10.4} {:>10.2}",
            v.axis_value, v.mean_final_iou, v.std_final_iou, v.mean_conv_step
        ));
    }
    ctx.say(format!("wrote {}", ctx.out.join("sweep.csv").display()));
    Ok(true)
}

fn cmd_bench(ctx: &Ctx) -> Result<bool> {
    let cfg = &ctx.cfg;
    let scenes = build_benchmark(cfg, cfg.target_rate, ctx.exec)?;
    ctx.prepare_out()?;
    fs::write(ctx.out.join("benchmark.json"), benchmark_json(&scenes)?)?;
    let rates: Vec<f64> = scenes.iter().map(|s| s.occlusion_rate()).collect();
    let (lo, hi) = rates
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    ctx.say(format!(
        "{} scenes, occlusion rate in [{lo:.4}, {hi:.4}]; wrote {}",
        scenes.len(),
        ctx.out.join("benchmark.json").display()
    ));
    Ok(true)
}

fn cmd_train(ctx: &Ctx) -> Result<bool> {
    let toy = &ctx.cfg.toy;
    let (model, sched, report) = train(toy)?;
    let eval = evaluate_conditioning(&model, &sched, toy, CONDITIONING_CASES, toy.seed)?;
    ctx.prepare_out()?;
    Checkpoint::from_model(&model, toy.schedule_spec()).save(&ctx.out.join("checkpoint.json"))?;
    fs::write(ctx.out.join("train_log.csv"), log_csv(&report.epochs))?;
    let summary = serde_json::json!({
        "initial_loss": report.initial,
        "final_loss": report.final_loss,
        "conditioning": eval,
    });
    fs::write(
        ctx.out.join("train_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    ctx.say(format!(
        "loss {:.4} -> {:.4} over {} epochs",
        report.initial.total,
        report.final_loss.total,
        report.epochs.len()
    ));
    for (kind, v) in &eval.mean_iou {
        ctx.say(format!("condition {:<12} mean sample iou {v:.4}", kind.name()));
    }
    Ok(true)
}

fn cmd_gradcheck(ctx: &Ctx) -> Result<bool> {
    let report = default_gradcheck()?;
    for g in &report.groups {
        ctx.say(format!(
            "{:<18} {:>6} params  max rel err {:.3e}  {}",
            g.name,
            g.count,
            g.max_rel_err,
            if g.max_rel_err < report.tol { "ok" } else { "FAIL" }
        ));
    }
    if ctx.out_given {
        fs::create_dir_all(&ctx.out)?;
        fs::write(
            ctx.out.join("gradcheck.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
    }
    ctx.say(if report.passed() {
        "gradcheck passed"
    } else {
        "gradcheck FAILED"
    });
    Ok(report.passed())
}

fn cmd_selftest(ctx: &Ctx, trials: usize) -> Result<bool> {
    let checks = run_selftest(ctx.cfg.root_seed, trials);
    for c in &checks {
        ctx.say(format!(
            "{:<28} {:>5} trials  {}",
            c.name,
            c.trials,
            if c.passed() {
                "ok".to_string()
            } else {
                format!("{} FAILED", c.failures)
            }
        ));
    }
    if ctx.out_given {
        fs::create_dir_all(&ctx.out)?;
        fs::write(
            ctx.out.join("selftest.json"),
            serde_json::to_string_pretty(&checks)? + "\n",
        )?;
    }
    Ok(checks.iter().all(|c| c.passed()))
}
