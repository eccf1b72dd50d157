//! Fence segmentation: the near disparity layer seeds scribbles, a matting
//! solve refines them into a soft alpha, and thresholding gives the mask.

mod matting;
mod near;
mod scribbles;

pub use matting::{solve_alpha, AlphaMap, MattingLaplacian, MattingParams, ACCEPT_RESIDUAL};
pub use near::{near_layer_mask, NearLayer, OTSU_BINS};
pub use scribbles::{generate_scribbles, Scribble, ScribbleMap, ScribbleParams};

use crate::error::{Error, Result};
use crate::imaging::{dilate, BinaryMask, Image};
use crate::stereo::DisparityMap;

/// Fence mask: `alpha >= t`.
pub fn threshold_alpha(alpha: &AlphaMap, t: f64) -> Result<BinaryMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid("alpha_threshold", format!("must lie in (0, 1), got {t}")));
    }
    BinaryMask::from_vec(alpha.height, alpha.width, alpha.alpha.iter().map(|&a| a >= t).collect())
}

/// Visibility mask for the data term: everything outside the fence grown by
/// `safety` pixels.
pub fn mask_for_frame(fence: &BinaryMask, safety: usize) -> BinaryMask {
    if safety == 0 {
        return fence.complement();
    }
    dilate(fence, safety).expect("radius checked").complement()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FenceMaskParams {
    pub scribbles: ScribbleParams,
    pub matting: MattingParams,
    pub alpha_threshold: f64,
    pub safety_dilate: usize,
}

impl Default for FenceMaskParams {
    fn default() -> Self {
        Self {
            scribbles: ScribbleParams::default(),
            matting: MattingParams::default(),
            alpha_threshold: 0.5,
            safety_dilate: 1,
        }
    }
}

impl FenceMaskParams {
    pub fn validate(&self) -> Result<()> {
        let s = &self.scribbles;
        if s.dilate_radius == 0 {
            return Err(Error::invalid("dilate_radius", "must be at least 1"));
        }
        if s.erode_radius == 0 {
            return Err(Error::invalid("erode_radius", "must be at least 1"));
        }
        if !(0.0 <= s.canny_low && s.canny_low < s.canny_high && s.canny_high <= 1.0) {
            return Err(Error::invalid("canny_low", "need 0 <= canny_low < canny_high <= 1"));
        }
        if !(self.alpha_threshold > 0.0 && self.alpha_threshold < 1.0) {
            return Err(Error::invalid("alpha_threshold", "must lie in (0, 1)"));
        }
        self.matting.validate()
    }
}

/// Every intermediate of one frame's segmentation.
#[derive(Debug, Clone)]
pub struct FenceDetection {
    pub near: NearLayer,
    pub scribbles: ScribbleMap,
    pub alpha: AlphaMap,
    pub fence: BinaryMask,
}

/// Runs near-layer split, scribbles, matting and thresholding for one frame.
pub fn detect_fence(img: &Image, dm: &DisparityMap, params: &FenceMaskParams) -> Result<FenceDetection> {
    params.validate()?;
    img.require_dims(dm.height, dm.width, "disparity map")?;
    let near = near_layer_mask(dm)?;
    let scribbles = generate_scribbles(&near.mask, &params.scribbles)?;
    let alpha = solve_alpha(img, &scribbles, &params.matting)?;
    let fence = threshold_alpha(&alpha, params.alpha_threshold)?;
    Ok(FenceDetection {
        near,
        scribbles,
        alpha,
        fence,
    })
}
