use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use defence::imaging::io;
use defence::pipeline::{evaluate, generate_scene, run_pipeline, PipelineConfig, SyntheticSceneSpec};
use defence::Error;

#[derive(Parser)]
#[command(name = "defence", version, about = "Remove a fence from a stereo image pair")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct the fence-free left view from a stereo pair.
    Run {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for intermediate results.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
        /// Overrides one configuration key; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Render a synthetic fenced stereo pair with its ground truth.
    Synth {
        /// Scene description; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides one scene key; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// PSNR and MSE of a result against ground truth inside a mask.
    Eval {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
}

fn split_override(kv: &str) -> defence::Result<(&str, &str)> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::InvalidParameter {
            name: "set",
            reason: format!("expected KEY=VALUE, got `{kv}`"),
        })
}

fn run(
    left: PathBuf,
    right: PathBuf,
    out: PathBuf,
    config: Option<PathBuf>,
    debug_dir: Option<PathBuf>,
    overrides: &[String],
) -> defence::Result<()> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    for kv in overrides {
        let (k, v) = split_override(kv)?;
        cfg.set(k, v)?;
    }
    cfg.left = Some(left);
    cfg.right = Some(right);
    cfg.output = Some(out.clone());
    if debug_dir.is_some() {
        cfg.debug_dir = debug_dir;
    }
    let result = run_pipeline(&cfg)?;
    println!(
        "wrote {} ({} solver iterations, {} fence pixels in the left view)",
        out.display(),
        result.solver.k,
        result.segmentation.left.fence.count()
    );
    Ok(())
}

fn synth(spec: Option<PathBuf>, out_dir: &Path, overrides: &[String]) -> defence::Result<()> {
    let mut spec = match spec {
        Some(p) => SyntheticSceneSpec::from_file(p)?,
        None => SyntheticSceneSpec::default(),
    };
    for kv in overrides {
        let (k, v) = split_override(kv)?;
        spec.set(k, v)?;
    }
    let scene = generate_scene(&spec)?;
    std::fs::create_dir_all(out_dir)?;
    io::save_image(out_dir.join("left.png"), &scene.left)?;
    io::save_image(out_dir.join("right.png"), &scene.right)?;
    io::save_image(out_dir.join("truth.png"), &scene.truth_background)?;
    io::save_mask(out_dir.join("fence_left.pgm"), &scene.truth_fence_left)?;
    io::save_mask(out_dir.join("fence_right.pgm"), &scene.truth_fence_right)?;
    println!("wrote scene to {}", out_dir.display());
    Ok(())
}

fn eval(result: &Path, truth: &Path, mask: &Path) -> defence::Result<()> {
    let m = evaluate(&io::load_image(result)?, &io::load_image(truth)?, &io::load_mask(mask)?)?;
    println!("psnr {:.3} dB", m.psnr);
    println!("mse {:.6e}", m.mse);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            left,
            right,
            out,
            config,
            debug_dir,
            overrides,
        } => run(left, right, out, config, debug_dir, &overrides),
        Command::Synth { spec, out_dir, overrides } => synth(spec, &out_dir, &overrides),
        Command::Eval { result, truth, mask } => eval(&result, &truth, &mask),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
