use crate::error::{Error, Result};
use crate::imaging::BinaryMask;
use crate::stereo::DisparityMap;

pub const OTSU_BINS: usize = 64;

/// Near-layer split of a disparity map.
#[derive(Debug, Clone)]
pub struct NearLayer {
    pub mask: BinaryMask,
    /// Upper edge of the last bin assigned to the far class; `None` when
    /// every valid disparity is identical.
    pub threshold: Option<f64>,
}

/// Marks pixels whose disparity lies above Otsu's split of the valid
/// disparities (64-bin histogram over their range). Invalid pixels are never
/// marked. A constant map has no split: the mask is empty and a warning is
/// logged.
pub fn near_layer_mask(dm: &DisparityMap) -> Result<NearLayer> {
    let valid: Vec<f64> = dm
        .disparity
        .iter()
        .zip(&dm.valid)
        .filter(|(_, &v)| v)
        .map(|(&d, _)| d)
        .collect();
    if valid.is_empty() {
        return Err(Error::NoValidDisparity);
    }
    let lo = valid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = valid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        log::warn!("disparity map is constant ({lo}); no near layer can be separated");
        return Ok(NearLayer {
            mask: BinaryMask::new(dm.height, dm.width, false),
            threshold: None,
        });
    }
    let bin_of = |d: f64| (((d - lo) / (hi - lo) * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1);
    let mut hist = [0usize; OTSU_BINS];
    for &d in &valid {
        hist[bin_of(d)] += 1;
    }
    let split = otsu_split(&hist);
    let threshold = lo + (split + 1) as f64 * (hi - lo) / OTSU_BINS as f64;
    let data = dm
        .disparity
        .iter()
        .zip(&dm.valid)
        .map(|(&d, &v)| v && bin_of(d) > split)
        .collect();
    Ok(NearLayer {
        mask: BinaryMask::from_vec(dm.height, dm.width, data)?,
        threshold: Some(threshold),
    })
}

/// Index of the last bin of the lower class maximizing the between-class
/// variance; the first maximizer wins ties.
pub(crate) fn otsu_split(hist: &[usize]) -> usize {
    let total: f64 = hist.iter().sum::<usize>() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum();
    let mut best = (0, f64::NEG_INFINITY);
    let (mut w0, mut sum0) = (0.0, 0.0);
    for t in 0..hist.len() - 1 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.1 {
            best = (t, between);
        }
    }
    best.0
}
