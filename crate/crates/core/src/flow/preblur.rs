use crate::error::{Error, Result};
use crate::imaging::{dilate, gaussian_blur, BinaryMask, Image};

/// Hides the fence from the flow estimator. Fence pixels are first replaced
/// by the mean of the non-fence pixels in the smallest square window that
/// contains any, then a Gaussian blur is applied on the band
/// `dilate(fence, ceil(3 sigma))`. Pixels off the band are returned
/// bit-exact.
pub fn preblur_fences(img: &Image, fence: &BinaryMask, sigma: f64) -> Result<Image> {
    let (h, w) = img.dims();
    fence.require_dims(h, w, "fence mask")?;
    if fence.is_full() {
        return Err(Error::DegenerateMask("fence covers the whole frame".into()));
    }
    if fence.is_empty() {
        return Ok(img.clone());
    }
    let filled = fill_from_visible(img, fence);
    let blurred = gaussian_blur(&filled, sigma)?;
    let band = dilate(fence, (3.0 * sigma).ceil().max(1.0) as usize)?;
    let ch = img.channels();
    let mut out = img.clone();
    for r in 0..h {
        for c in 0..w {
            if band.get(r, c) {
                for k in 0..ch {
                    out.set(r, c, k, blurred.get(r, c, k));
                }
            }
        }
    }
    Ok(out)
}

/// Replaces masked pixels by the average of unmasked ones in a growing
/// square window (radius 1, 2, ...). The mask must not be full.
pub(crate) fn fill_from_visible(img: &Image, hidden: &BinaryMask) -> Image {
    fill_from_visible_with_radius(img, hidden, 1)
}

pub(crate) fn fill_from_visible_with_radius(img: &Image, hidden: &BinaryMask, start_radius: usize) -> Image {
    let (h, w) = img.dims();
    let ch = img.channels();
    // Summed-area tables of visible counts and per-channel sums.
    let stride = w + 1;
    let mut count = vec![0.0; (h + 1) * stride];
    let mut sums = vec![0.0; (h + 1) * stride * ch];
    for r in 0..h {
        for c in 0..w {
            let vis = !hidden.get(r, c);
            let i = (r + 1) * stride + c + 1;
            count[i] = count[i - 1] + count[i - stride] - count[i - stride - 1] + f64::from(u8::from(vis));
            for k in 0..ch {
                let v = if vis { img.get(r, c, k) } else { 0.0 };
                sums[i * ch + k] = sums[(i - 1) * ch + k] + sums[(i - stride) * ch + k] - sums[(i - stride - 1) * ch + k] + v;
            }
        }
    }
    let rect = |t: &[f64], k: usize, n: usize, r0: usize, c0: usize, r1: usize, c1: usize| {
        t[(r1 * stride + c1) * n + k] - t[(r0 * stride + c1) * n + k] - t[(r1 * stride + c0) * n + k] + t[(r0 * stride + c0) * n + k]
    };
    let mut out = img.clone();
    for r in 0..h {
        for c in 0..w {
            if !hidden.get(r, c) {
                continue;
            }
            let mut rad = start_radius.max(1);
            loop {
                let (r0, c0) = (r.saturating_sub(rad), c.saturating_sub(rad));
                let (r1, c1) = ((r + rad + 1).min(h), (c + rad + 1).min(w));
                let n = rect(&count, 0, 1, r0, c0, r1, c1);
                if n > 0.0 {
                    for k in 0..ch {
                        out.set(r, c, k, rect(&sums, k, ch, r0, c0, r1, c1) / n);
                    }
                    break;
                }
                rad += 1;
            }
        }
    }
    out
}
