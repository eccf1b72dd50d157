use rayon::prelude::*;

use super::descriptor::{gather_patch, DescriptorKind, CENSUS_LEN, MIN_NORM, ZEROMEAN_LEN};
use crate::error::{Error, Result};
use crate::imaging::Image;

/// Cost assigned when the matching patch would leave the frame.
pub const OUT_OF_FRAME_COST: f64 = 1.0;

/// Matching costs for disparities `0..=d_max`, stored per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub height: usize,
    pub width: usize,
    pub d_max: usize,
    pub cost: Vec<f64>,
}

impl CostVolume {
    pub fn num_disparities(&self) -> usize {
        self.d_max + 1
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, d: usize) -> f64 {
        self.cost[(row * self.width + col) * (self.d_max + 1) + d]
    }

    /// Costs of one pixel across all disparities.
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let n = self.d_max + 1;
        let start = (row * self.width + col) * n;
        &self.cost[start..start + n]
    }

    /// One disparity slice mapped from `[-1, 1]` to `[0, 1]`, for debugging.
    pub fn slice_image(&self, d: usize) -> Result<Image> {
        if d > self.d_max {
            return Err(Error::invalid("d", format!("{d} exceeds d_max {}", self.d_max)));
        }
        let data = (0..self.height * self.width)
            .map(|i| ((self.cost[i * (self.d_max + 1) + d] + 1.0) / 2.0).clamp(0.0, 1.0))
            .collect();
        Image::from_vec(self.height, self.width, 1, data)
    }
}

/// Which view the volume is anchored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// `cost(r, c, d)` compares left `(r, c)` with right `(r, c - d)`.
    Left,
    /// `cost(r, c, d)` compares right `(r, c)` with left `(r, c + d)`.
    Right,
}

enum Descriptors {
    // 80 sign bits per pixel; the cosine of two +/-1 vectors is 1 - 2 h / n.
    Census(Vec<u128>),
    // Unit-norm zero-mean patches; `None` when the patch is flat.
    ZeroMean(Vec<Option<[f64; ZEROMEAN_LEN]>>),
}

impl Descriptors {
    fn compute(img: &Image, kind: DescriptorKind) -> Self {
        let (h, w) = img.dims();
        match kind {
            DescriptorKind::Census => Descriptors::Census(
                (0..h * w)
                    .into_par_iter()
                    .map(|i| {
                        let patch = gather_patch(img, i / w, i % w);
                        let center = patch[ZEROMEAN_LEN / 2];
                        let mut bits = 0u128;
                        let mut k = 0;
                        for (j, &v) in patch.iter().enumerate() {
                            if j == ZEROMEAN_LEN / 2 {
                                continue;
                            }
                            if v > center {
                                bits |= 1 << k;
                            }
                            k += 1;
                        }
                        bits
                    })
                    .collect(),
            ),
            DescriptorKind::ZeroMean => Descriptors::ZeroMean(
                (0..h * w)
                    .into_par_iter()
                    .map(|i| {
                        let mut patch = gather_patch(img, i / w, i % w);
                        let mean = patch.iter().sum::<f64>() / ZEROMEAN_LEN as f64;
                        patch.iter_mut().for_each(|v| *v -= mean);
                        let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm < MIN_NORM {
                            return None;
                        }
                        patch.iter_mut().for_each(|v| *v /= norm);
                        Some(patch)
                    })
                    .collect(),
            ),
        }
    }
}

fn cost_between(left: &Descriptors, right: &Descriptors, a: usize, b: usize) -> f64 {
    match (left, right) {
        (Descriptors::Census(l), Descriptors::Census(r)) => {
            let hamming = (l[a] ^ r[b]).count_ones() as f64;
            -(CENSUS_LEN as f64 - 2.0 * hamming) / CENSUS_LEN as f64
        }
        (Descriptors::ZeroMean(l), Descriptors::ZeroMean(r)) => match (&l[a], &r[b]) {
            (Some(x), Some(y)) => {
                let dot: f64 = x.iter().zip(y.iter()).map(|(p, q)| p * q).sum();
                (-dot).clamp(-1.0, 1.0)
            }
            _ => 0.0,
        },
        _ => unreachable!("descriptor kinds always match"),
    }
}

/// Left-referenced cost volume over disparities `0..=d_max`.
pub fn build_cost_volume(left: &Image, right: &Image, d_max: usize, kind: DescriptorKind) -> Result<CostVolume> {
    build_cost_volume_with_reference(left, right, d_max, kind, Reference::Left)
}

pub fn build_cost_volume_with_reference(
    left: &Image,
    right: &Image,
    d_max: usize,
    kind: DescriptorKind,
    reference: Reference,
) -> Result<CostVolume> {
    left.require_single_channel("left")?;
    right.require_single_channel("right")?;
    let (h, w) = left.dims();
    right.require_dims(h, w, "stereo pair")?;
    if d_max >= w {
        return Err(Error::invalid("d_max", format!("{d_max} must be below the width {w}")));
    }
    let dl = Descriptors::compute(left, kind);
    let dr = Descriptors::compute(right, kind);
    let (anchor, other) = match reference {
        Reference::Left => (&dl, &dr),
        Reference::Right => (&dr, &dl),
    };
    let n = d_max + 1;
    let mut cost = vec![0.0; h * w * n];
    cost.par_chunks_mut(w * n).enumerate().for_each(|(r, row)| {
        for c in 0..w {
            let a = r * w + c;
            for d in 0..n {
                let partner = match reference {
                    Reference::Left => c.checked_sub(d),
                    Reference::Right => Some(c + d).filter(|&x| x < w),
                };
                row[c * n + d] = match partner {
                    Some(pc) => cost_between(anchor, other, a, r * w + pc),
                    None => OUT_OF_FRAME_COST,
                };
            }
        }
    });
    Ok(CostVolume {
        height: h,
        width: w,
        d_max,
        cost,
    })
}

/// Box-filters every disparity slice over a `(2 radius + 1)^2` window with
/// replicate boundary. Radius 0 returns the input unchanged.
pub fn aggregate_costs(cv: &CostVolume, radius: usize) -> CostVolume {
    if radius == 0 {
        return cv.clone();
    }
    let (h, w, n) = (cv.height, cv.width, cv.d_max + 1);
    let r = radius as isize;
    let norm = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    let mut horiz = vec![0.0; h * w * n];
    horiz.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for k in -r..=r {
                let xx = (x as isize + k).clamp(0, w as isize - 1) as usize;
                let src = &cv.cost[(y * w + xx) * n..(y * w + xx + 1) * n];
                for (acc, v) in row[x * n..(x + 1) * n].iter_mut().zip(src) {
                    *acc += v;
                }
            }
        }
    });
    let mut cost = vec![0.0; h * w * n];
    cost.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        for k in -r..=r {
            let yy = (y as isize + k).clamp(0, h as isize - 1) as usize;
            let src = &horiz[yy * w * n..(yy + 1) * w * n];
            for (acc, v) in row.iter_mut().zip(src) {
                *acc += v;
            }
        }
        row.iter_mut().for_each(|v| *v /= norm);
    });
    CostVolume {
        height: h,
        width: w,
        d_max: cv.d_max,
        cost,
    }
}
