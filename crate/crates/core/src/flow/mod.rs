//! Optical flow between the fence-suppressed frames and the warp operator it
//! induces.

mod horn_schunck;
mod preblur;
mod warp;

pub use horn_schunck::estimate_flow;
pub use preblur::preblur_fences;
pub(crate) use preblur::fill_from_visible_with_radius;
pub use warp::{apply, apply_adjoint, build_warp, WarpOperator};

use crate::error::{Error, Result};

/// Per-pixel displacement in pixels: `u` along columns, `v` along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            u: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.u.iter().zip(&self.v).map(|(u, v)| u.hypot(*v)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub levels: usize,
    pub alpha: f64,
    pub iters: usize,
    /// Bound on each flow component, in full-resolution pixels.
    pub max_motion: f64,
    /// Preblur strength around fence pixels.
    pub sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 4,
            alpha: 15.0,
            iters: 200,
            max_motion: 32.0,
            sigma: 2.0,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels > 12 {
            return Err(Error::invalid("flow_levels", "must lie in 1..=12"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("flow_alpha", "must be finite and > 0"));
        }
        if self.iters == 0 {
            return Err(Error::invalid("flow_iters", "must be at least 1"));
        }
        if !(self.max_motion.is_finite() && self.max_motion > 0.0) {
            return Err(Error::invalid("max_motion", "must be finite and > 0"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("flow_sigma", "must be finite and > 0"));
        }
        Ok(())
    }
}
