//! Degradation model `y_m = O_m W_m x + n_m` and TV-regularized
//! reconstruction of `x` by split Bregman iteration.

mod bregman;
mod model;

pub use bregman::{auto_step, outer_iteration, shrink, shrink_anisotropic, solve, write_energy_csv, SolverState};
pub use model::{data_gradient, degrade, energy};

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::{fill_from_visible_with_radius, WarpOperator};
use crate::imaging::{BinaryMask, Image};

/// One observed frame with its visibility mask and warp from the latent grid.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Image,
    pub visible: BinaryMask,
    pub warp: WarpOperator,
}

pub(crate) struct FrameData {
    pub(crate) warp: WarpOperator,
    /// Visible and warped sample inside the frame.
    pub(crate) observed: Vec<bool>,
    pub(crate) y_planes: Vec<Vec<f64>>,
}

pub struct ObservationSet {
    frames: Vec<Observation>,
    pub(crate) frames_internal: Vec<FrameData>,
    pub(crate) height: usize,
    pub(crate) width: usize,
    pub(crate) channels: usize,
}

impl std::fmt::Debug for ObservationSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObservationSet")
            .field("frames", &self.frames.len())
            .field("height", &self.height)
            .field("width", &self.width)
            .field("channels", &self.channels)
            .finish()
    }
}

impl ObservationSet {
    /// Frames must share dimensions and channel count; the first frame is the
    /// reference and must carry the identity warp.
    pub fn new(frames: Vec<Observation>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("frames", "need at least one observation"))?;
        let (h, w) = first.y.dims();
        let ch = first.y.channels();
        if !first.warp.is_identity() {
            return Err(Error::invalid("frames", "reference frame must use the identity warp"));
        }
        let mut internal = Vec::with_capacity(frames.len());
        for (m, f) in frames.iter().enumerate() {
            if f.y.dims() != (h, w) || f.y.channels() != ch {
                return Err(Error::SizeMismatch(format!("frame {m} differs from frame 0")));
            }
            f.visible.require_dims(h, w, "visibility mask")?;
            if f.warp.dims() != (h, w) {
                return Err(Error::SizeMismatch(format!("warp of frame {m}")));
            }
            let observed = (0..h * w).map(|p| f.visible.data()[p] && f.warp.is_in_bounds(p)).collect();
            internal.push(FrameData {
                warp: f.warp.clone(),
                observed,
                y_planes: f.y.planes(),
            });
        }
        Ok(Self {
            frames,
            frames_internal: internal,
            height: h,
            width: w,
            channels: ch,
        })
    }

    /// Fully visible single frame with identity warp.
    pub fn single(y: Image) -> Self {
        let (h, w) = y.dims();
        Self::new(vec![Observation {
            y,
            visible: BinaryMask::new(h, w, true),
            warp: WarpOperator::identity(h, w),
        }])
        .expect("single frame is always consistent")
    }

    pub fn frames(&self) -> &[Observation] {
        &self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub(crate) fn check_image(&self, x: &Image) -> Result<()> {
        if x.dims() != (self.height, self.width) || x.channels() != self.channels {
            return Err(Error::SizeMismatch(format!(
                "estimate is {}x{}x{}, observations are {}x{}x{}",
                x.height(),
                x.width(),
                x.channels(),
                self.height,
                self.width,
                self.channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvKind {
    #[default]
    Isotropic,
    Anisotropic,
}

impl FromStr for TvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "isotropic" => Ok(TvKind::Isotropic),
            "anisotropic" => Ok(TvKind::Anisotropic),
            other => Err(Error::invalid("tv", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Step {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Step::Auto);
        }
        s.parse::<f64>()
            .map(Step::Fixed)
            .map_err(|_| Error::invalid("sd_step", format!("expected `auto` or a number, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mu: f64,
    pub lambda: f64,
    pub outer_iters: usize,
    pub sd_iters: usize,
    pub sd_step: Step,
    pub tol: f64,
    pub tv: TvKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 0.01,
            lambda: 0.1,
            outer_iters: 100,
            sd_iters: 10,
            sd_step: Step::Auto,
            tol: 1e-5,
            tv: TvKind::Isotropic,
        }
    }
}

impl SolverConfig {
    /// `mu = 0` is accepted: it turns the problem into plain least squares.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::invalid("mu", "must be finite and >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be finite and > 0"));
        }
        if self.outer_iters == 0 {
            return Err(Error::invalid("outer_iters", "must be at least 1"));
        }
        if self.sd_iters == 0 {
            return Err(Error::invalid("sd_iters", "must be at least 1"));
        }
        if let Step::Fixed(s) = self.sd_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("sd_step", "must be finite and > 0"));
            }
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::invalid("tol", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Initial estimate: the reference frame with hidden pixels replaced by the
/// mean of visible ones in an 11x11 window, grown if that window is empty.
pub fn initial_estimate(y: &Image, visible: &BinaryMask) -> Result<Image> {
    visible.require_dims(y.height(), y.width(), "visibility mask")?;
    if visible.is_empty() {
        return Err(Error::DegenerateMask("reference frame has no visible pixel".into()));
    }
    Ok(fill_from_visible_with_radius(y, &visible.complement(), 5))
}
