//! Stereo image de-fencing.
//!
//! Given two views of a scene shot through a fence, the pipeline estimates
//! disparity, segments the (near) fence layer, estimates the motion between
//! the views and recovers the occluded background by minimizing a
//! total-variation regularized least-squares energy with split Bregman
//! iterations.
//!
//! The stages are exposed as separate modules so that each one can be used
//! and tested on its own:
//!
//! - [`imaging`]: pixel containers, raster I/O and low-level operators
//! - [`stereo`]: patch descriptors, cost volumes and disparity estimation
//! - [`fencemask`]: disparity-driven scribbles, matting and the fence mask
//! - [`flow`]: pyramidal Horn-Schunck flow and the bilinear warp operator
//! - [`solver`]: the observation model and the split Bregman reconstruction
//! - [`pipeline`]: configuration, synthetic scenes, metrics and orchestration

pub mod error;
pub mod fencemask;
pub mod flow;
pub mod imaging;
pub mod pipeline;
pub mod solver;
pub mod stereo;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, GradientField, Image};
