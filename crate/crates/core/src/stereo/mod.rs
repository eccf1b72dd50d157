//! Dense disparity from a horizontally displaced pair.
//!
//! Matching cost is the negative cosine similarity between per-pixel patch
//! descriptors. The chain is: cost volume, box aggregation, winner-take-all,
//! left-right consistency check, median hole filling.

mod cost;
mod descriptor;
mod disparity;

pub use cost::{
    aggregate_costs, build_cost_volume, build_cost_volume_with_reference, CostVolume, Reference,
    OUT_OF_FRAME_COST,
};
pub use descriptor::{
    extract_descriptor, matching_cost, DescriptorKind, PatchDescriptor, CENSUS_LEN, PATCH_RADIUS,
    ZEROMEAN_LEN,
};
pub use disparity::{left_right_check, median_fill, right_left_check, winner_take_all, DisparityMap};

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct StereoParams {
    pub d_max: usize,
    pub kind: DescriptorKind,
    pub aggregation_radius: usize,
    pub lr_tolerance: f64,
    pub median_radius: usize,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            d_max: 64,
            kind: DescriptorKind::Census,
            aggregation_radius: 3,
            lr_tolerance: 1.0,
            median_radius: 2,
        }
    }
}

impl StereoParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::invalid("d_max", "must be at least 1"));
        }
        if !(self.lr_tolerance.is_finite() && self.lr_tolerance >= 0.0) {
            return Err(Error::invalid("lr_tolerance", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Left- and right-referenced disparity maps after consistency checking and
/// median filling.
#[derive(Debug, Clone)]
pub struct StereoResult {
    pub left: DisparityMap,
    pub right: DisparityMap,
}

/// Runs the full chain on a single-channel pair.
pub fn estimate_disparity(left: &Image, right: &Image, params: &StereoParams) -> Result<StereoResult> {
    params.validate()?;
    let raw_left = winner_take_all(&aggregate_costs(
        &build_cost_volume_with_reference(left, right, params.d_max, params.kind, Reference::Left)?,
        params.aggregation_radius,
    ));
    let raw_right = winner_take_all(&aggregate_costs(
        &build_cost_volume_with_reference(left, right, params.d_max, params.kind, Reference::Right)?,
        params.aggregation_radius,
    ));
    let checked_left = left_right_check(&raw_left, &raw_right, params.lr_tolerance)?;
    let checked_right = right_left_check(&raw_right, &raw_left, params.lr_tolerance)?;
    Ok(StereoResult {
        left: median_fill(&checked_left, params.median_radius),
        right: median_fill(&checked_right, params.median_radius),
    })
}
