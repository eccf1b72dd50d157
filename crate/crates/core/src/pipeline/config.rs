use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fencemask::FenceMaskParams;
use crate::flow::FlowParams;
use crate::solver::SolverConfig;
use crate::stereo::StereoParams;

use super::scene::{BackgroundSource, SyntheticSceneSpec};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub left: Option<PathBuf>,
    pub right: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub debug_dir: Option<PathBuf>,
    pub stereo: StereoParams,
    pub mask: FenceMaskParams,
    pub flow: FlowParams,
    pub solver: SolverConfig,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid("config", format!("line {}: expected `key = value`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(name: &'static str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::invalid(name, format!("cannot parse `{v}`")))
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(&text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Sets one field by its configuration key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "left" => self.left = Some(v.into()),
            "right" => self.right = Some(v.into()),
            "out" | "output" => self.output = Some(v.into()),
            "debug_dir" => self.debug_dir = Some(v.into()),
            "d_max" => self.stereo.d_max = num("d_max", v)?,
            "descriptor" => self.stereo.kind = v.parse()?,
            "aggregation_radius" => self.stereo.aggregation_radius = num("aggregation_radius", v)?,
            "lr_tolerance" => self.stereo.lr_tolerance = num("lr_tolerance", v)?,
            "median_radius" => self.stereo.median_radius = num("median_radius", v)?,
            "dilate_radius" => self.mask.scribbles.dilate_radius = num("dilate_radius", v)?,
            "erode_radius" => self.mask.scribbles.erode_radius = num("erode_radius", v)?,
            "canny_low" => self.mask.scribbles.canny_low = num("canny_low", v)?,
            "canny_high" => self.mask.scribbles.canny_high = num("canny_high", v)?,
            "alpha_threshold" => self.mask.alpha_threshold = num("alpha_threshold", v)?,
            "safety_dilate" => self.mask.safety_dilate = num("safety_dilate", v)?,
            "matting_eps" => self.mask.matting.eps = num("matting_eps", v)?,
            "matting_gamma" => self.mask.matting.gamma = num("matting_gamma", v)?,
            "matting_tol" => self.mask.matting.tol = num("matting_tol", v)?,
            "matting_max_iters" => self.mask.matting.max_iters = num("matting_max_iters", v)?,
            "flow_sigma" => self.flow.sigma = num("flow_sigma", v)?,
            "flow_levels" => self.flow.levels = num("flow_levels", v)?,
            "flow_alpha" => self.flow.alpha = num("flow_alpha", v)?,
            "flow_iters" => self.flow.iters = num("flow_iters", v)?,
            "max_motion" => self.flow.max_motion = num("max_motion", v)?,
            "mu" => self.solver.mu = num("mu", v)?,
            "lambda" => self.solver.lambda = num("lambda", v)?,
            "outer_iters" => self.solver.outer_iters = num("outer_iters", v)?,
            "sd_iters" => self.solver.sd_iters = num("sd_iters", v)?,
            "sd_step" => self.solver.sd_step = v.parse()?,
            "tol" => self.solver.tol = num("tol", v)?,
            "tv" => self.solver.tv = v.parse()?,
            other => return Err(Error::invalid("config", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks every numeric field; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        self.stereo.validate()?;
        if self.stereo.aggregation_radius > 32 {
            return Err(Error::invalid("aggregation_radius", "must be at most 32"));
        }
        if self.stereo.median_radius == 0 {
            return Err(Error::invalid("median_radius", "must be at least 1"));
        }
        self.mask.validate()?;
        self.flow.validate()?;
        self.solver.validate()?;
        if self.solver.mu == 0.0 {
            return Err(Error::invalid("mu", "must be > 0 for reconstruction"));
        }
        Ok(())
    }

    /// Validation plus the paths `run_pipeline` needs.
    pub fn validate_for_run(&self) -> Result<()> {
        if self.left.is_none() {
            return Err(Error::invalid("left", "input path missing"));
        }
        if self.right.is_none() {
            return Err(Error::invalid("right", "input path missing"));
        }
        if self.output.is_none() {
            return Err(Error::invalid("out", "output path missing"));
        }
        self.validate()
    }
}

impl SyntheticSceneSpec {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut spec = Self::default();
        for (k, v) in parse_pairs(&text)? {
            spec.set(&k, &v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "height" => self.height = num("height", v)?,
            "width" => self.width = num("width", v)?,
            "background" => {
                self.background = match v.strip_prefix("procedural:") {
                    Some(seed) => BackgroundSource::Procedural(num("background", seed)?),
                    None if v == "procedural" => BackgroundSource::Procedural(1),
                    None => BackgroundSource::File(v.into()),
                }
            }
            "wire_width" => self.wire_width = num("wire_width", v)?,
            "pitch" => self.pitch = num("pitch", v)?,
            "orientation" => self.orientation_deg = num("orientation", v)?,
            "fence_disparity" => self.fence_disparity = num("fence_disparity", v)?,
            "background_disparity" => self.background_disparity = num("background_disparity", v)?,
            "fence_value" => self.fence_value = num("fence_value", v)?,
            "noise_sigma" => self.noise_sigma = num("noise_sigma", v)?,
            "seed" => self.seed = num("seed", v)?,
            other => return Err(Error::invalid("spec", format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}
