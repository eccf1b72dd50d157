//! End-to-end de-fencing, configuration, the synthetic scene generator and
//! evaluation metrics.

mod config;
mod scene;

pub use config::{parse_pairs, PipelineConfig};
pub use scene::{generate_scene, procedural_texture, BackgroundSource, SyntheticScene, SyntheticSceneSpec};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fencemask::{detect_fence, mask_for_frame, FenceDetection};
use crate::flow::{build_warp, estimate_flow, preblur_fences, FlowField};
use crate::imaging::io::{self, Pfm};
use crate::imaging::{BinaryMask, Image};
use crate::solver::{initial_estimate, solve, write_energy_csv, Observation, ObservationSet, SolverState};
use crate::stereo::{estimate_disparity, DisparityMap, StereoResult};

/// Files written to the debug directory, in writing order.
pub const DEBUG_FILES: [&str; 8] = [
    "disparity.pfm",
    "disparity.png",
    "scribbles.png",
    "alpha.png",
    "fence_left.pgm",
    "fence_right.pgm",
    "flow.pfm",
    "energy.csv",
];

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub stereo: StereoResult,
    pub left: FenceDetection,
    pub right: FenceDetection,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: Image,
    pub segmentation: Segmentation,
    pub flow: FlowField,
    pub solver: SolverState,
}

fn check_pair(left: &Image, right: &Image) -> Result<()> {
    if left.dims() != right.dims() || left.channels() != right.channels() {
        return Err(Error::SizeMismatch(format!(
            "left is {}x{}x{}, right is {}x{}x{}",
            left.height(),
            left.width(),
            left.channels(),
            right.height(),
            right.width(),
            right.channels()
        )));
    }
    Ok(())
}

/// Disparity in both directions and a fence mask for each view.
pub fn segment(left: &Image, right: &Image, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    check_pair(left, right).map_err(|e| e.in_stage("input"))?;
    let stereo = estimate_disparity(&left.luma(), &right.luma(), &cfg.stereo).map_err(|e| e.in_stage("stereo"))?;
    log::info!(
        "disparity: {} of {} left pixels valid",
        stereo.left.valid_count(),
        left.height() * left.width()
    );
    let fence_left = detect_fence(left, &stereo.left, &cfg.mask).map_err(|e| e.in_stage("fencemask-left"))?;
    let fence_right = detect_fence(right, &stereo.right, &cfg.mask).map_err(|e| e.in_stage("fencemask-right"))?;
    log::info!(
        "fence: {} px left, {} px right",
        fence_left.fence.count(),
        fence_right.fence.count()
    );
    Ok(Segmentation {
        stereo,
        left: fence_left,
        right: fence_right,
    })
}

/// Full reconstruction on in-memory frames.
pub fn run_on_images(left: &Image, right: &Image, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let seg = segment(left, right, cfg)?;
    let vis_left = mask_for_frame(&seg.left.fence, cfg.mask.safety_dilate);
    let vis_right = mask_for_frame(&seg.right.fence, cfg.mask.safety_dilate);

    // Flow from the right frame's grid into the left one, so the warp built
    // from it maps the latent (left) image onto the right view.
    let flow = (|| {
        let bl = preblur_fences(&left.luma(), &seg.left.fence, cfg.flow.sigma)?;
        let br = preblur_fences(&right.luma(), &seg.right.fence, cfg.flow.sigma)?;
        estimate_flow(&br, &bl, &cfg.flow)
    })()
    .map_err(|e| e.in_stage("flow"))?;
    log::info!("flow: max magnitude {:.2} px", flow.max_magnitude());

    let (result, state) = (|| {
        let obs = ObservationSet::new(vec![
            Observation {
                y: left.clone(),
                visible: vis_left.clone(),
                warp: crate::flow::WarpOperator::identity(left.height(), left.width()),
            },
            Observation {
                y: right.clone(),
                visible: vis_right,
                warp: build_warp(&flow),
            },
        ])?;
        let x0 = initial_estimate(left, &vis_left)?;
        solve(&obs, &cfg.solver, &x0)
    })()
    .map_err(|e| e.in_stage("solver"))?;
    log::info!(
        "solver: {} iterations, energy {:.4e} -> {:.4e}",
        state.k,
        state.energy_trace.first().copied().unwrap_or(f64::NAN),
        state.energy_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(PipelineOutput {
        result,
        segmentation: seg,
        flow,
        solver: state,
    })
}

/// Reads the configured pair, reconstructs, writes the output image and,
/// when a debug directory is set, every file in [`DEBUG_FILES`]. Files
/// created by a failed run are removed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate_for_run().map_err(|e| e.in_stage("config"))?;
    let (left_path, right_path, out_path) = (
        cfg.left.as_ref().expect("validated"),
        cfg.right.as_ref().expect("validated"),
        cfg.output.as_ref().expect("validated"),
    );
    let left = io::load_image(left_path).map_err(|e| e.in_stage("input"))?;
    let right = io::load_image(right_path).map_err(|e| e.in_stage("input"))?;
    let out = run_on_images(&left, &right, cfg)?;

    let mut written = Written::default();
    let res = (|| -> Result<()> {
        written.file(out_path, |p| io::save_image(p, &out.result))?;
        if let Some(dir) = &cfg.debug_dir {
            write_debug(dir, &left, &out, &mut written)?;
        }
        Ok(())
    })();
    if let Err(e) = res {
        written.remove_all();
        return Err(e.in_stage("write"));
    }
    Ok(out)
}

#[derive(Default)]
struct Written {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Written {
    fn file(&mut self, path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        self.files.push(path.to_path_buf());
        f(path)
    }

    fn dir(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            std::fs::create_dir_all(path)?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(())
    }

    fn remove_all(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

fn disparity_pfm(dm: &DisparityMap) -> Pfm {
    Pfm {
        height: dm.height,
        width: dm.width,
        channels: 1,
        data: dm
            .values()
            .iter()
            .map(|v| v.map_or(f32::INFINITY, |d| d as f32))
            .collect(),
    }
}

fn write_debug(dir: &Path, left: &Image, out: &PipelineOutput, written: &mut Written) -> Result<()> {
    written.dir(dir)?;
    let seg = &out.segmentation;
    let dm = &seg.stereo.left;
    let [f_pfm, f_png, f_scr, f_alpha, f_fl, f_fr, f_flow, f_energy] = DEBUG_FILES.map(|n| dir.join(n));
    written.file(&f_pfm, |p| io::write_pfm(p, &disparity_pfm(dm)))?;
    written.file(&f_png, |p| {
        io::save_image(p, &io::false_color(dm.height, dm.width, &dm.values(), dm.d_max as f64))
    })?;
    written.file(&f_scr, |p| io::save_image(p, &seg.left.scribbles.visualize(left)?))?;
    written.file(&f_alpha, |p| io::save_image(p, &seg.left.alpha.to_image()))?;
    written.file(&f_fl, |p| io::save_mask(p, &seg.left.fence))?;
    written.file(&f_fr, |p| io::save_mask(p, &seg.right.fence))?;
    written.file(&f_flow, |p| {
        let f = &out.flow;
        let data = f
            .u
            .iter()
            .zip(&f.v)
            .flat_map(|(u, v)| [*u as f32, *v as f32, 0.0])
            .collect();
        io::write_pfm(
            p,
            &Pfm {
                height: f.height,
                width: f.width,
                channels: 3,
                data,
            },
        )
    })?;
    written.file(&f_energy, |p| write_energy_csv(p, &out.solver))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Decibels; `+inf` when the images agree exactly on the region.
    pub psnr: f64,
    pub mse: f64,
}

/// Mean squared error over the region's pixels (all channels) and the
/// corresponding PSNR for data in `[0, 1]`.
pub fn evaluate(result: &Image, truth: &Image, region: &BinaryMask) -> Result<Metrics> {
    if !result.same_shape(truth) {
        return Err(Error::SizeMismatch("result and truth differ in shape".into()));
    }
    region.require_dims(result.height(), result.width(), "evaluation region")?;
    if region.is_empty() {
        return Err(Error::DegenerateMask("evaluation region is empty".into()));
    }
    let ch = result.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (a, b)) in result.data().iter().zip(truth.data()).enumerate() {
        if region.data()[i / ch] {
            sum += (a - b) * (a - b);
            n += 1;
        }
    }
    let mse = sum / n as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() };
    Ok(Metrics { psnr, mse })
}
