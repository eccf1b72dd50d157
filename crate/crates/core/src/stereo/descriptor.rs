//! Hand-crafted patch descriptors compared with cosine similarity.

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Half side of the square matching patch (9 x 9).
pub const PATCH_RADIUS: usize = 4;
const PATCH_SIDE: usize = 2 * PATCH_RADIUS + 1;
pub const CENSUS_LEN: usize = PATCH_SIDE * PATCH_SIDE - 1;
pub const ZEROMEAN_LEN: usize = PATCH_SIDE * PATCH_SIDE;

/// Norms below this make a descriptor uninformative.
pub(crate) const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescriptorKind {
    /// Signs of `neighbor - center` over the patch, as `+1` / `-1`.
    #[default]
    Census,
    /// The patch with its mean removed.
    ZeroMean,
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "census" => Ok(Self::Census),
            "zeromean" | "zero-mean" | "zero_mean" => Ok(Self::ZeroMean),
            _ => Err(Error::invalid("descriptor", format!("unknown descriptor `{s}`"))),
        }
    }
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Census => "census",
            Self::ZeroMean => "zeromean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDescriptor {
    pub values: Vec<f64>,
}

impl PatchDescriptor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Descriptor of the 9 x 9 patch centered on `(row, col)`.
///
/// Samples falling outside the image are taken from the nearest edge pixel,
/// which is the same as replicate-padding the image first.
pub fn extract_descriptor(img: &Image, row: usize, col: usize, kind: DescriptorKind) -> PatchDescriptor {
    let patch = gather_patch(img, row, col);
    let values = match kind {
        DescriptorKind::Census => {
            let center = patch[ZEROMEAN_LEN / 2];
            patch
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != ZEROMEAN_LEN / 2)
                .map(|(_, &v)| if v > center { 1.0 } else { -1.0 })
                .collect()
        }
        DescriptorKind::ZeroMean => {
            let mean = patch.iter().sum::<f64>() / patch.len() as f64;
            patch.iter().map(|v| v - mean).collect()
        }
    };
    PatchDescriptor { values }
}

pub(crate) fn gather_patch(img: &Image, row: usize, col: usize) -> [f64; ZEROMEAN_LEN] {
    let (h, w) = img.dims();
    let data = img.data();
    let mut out = [0.0; ZEROMEAN_LEN];
    let r0 = row as isize - PATCH_RADIUS as isize;
    let c0 = col as isize - PATCH_RADIUS as isize;
    for dy in 0..PATCH_SIDE {
        let rr = (r0 + dy as isize).clamp(0, h as isize - 1) as usize;
        for dx in 0..PATCH_SIDE {
            let cc = (c0 + dx as isize).clamp(0, w as isize - 1) as usize;
            out[dy * PATCH_SIDE + dx] = data[rr * w + cc];
        }
    }
    out
}

/// Negative cosine similarity; `0` when either descriptor is (numerically) zero.
pub fn matching_cost(left: &PatchDescriptor, right: &PatchDescriptor) -> Result<f64> {
    if left.len() != right.len() {
        return Err(Error::SizeMismatch(format!(
            "descriptor lengths {} and {}",
            left.len(),
            right.len()
        )));
    }
    let dot: f64 = left.values.iter().zip(&right.values).map(|(a, b)| a * b).sum();
    let nl = left.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nr = right.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nl < MIN_NORM || nr < MIN_NORM {
        return Ok(0.0);
    }
    Ok((-dot / (nl * nr)).clamp(-1.0, 1.0))
}
