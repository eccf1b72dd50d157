use super::cost::CostVolume;
use crate::error::{Error, Result};

/// Per-pixel integer disparity with a validity flag. Invalid pixels carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub height: usize,
    pub width: usize,
    pub d_max: usize,
    pub disparity: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DisparityMap {
    pub fn constant(height: usize, width: usize, d_max: usize, value: f64) -> Self {
        Self {
            height,
            width,
            d_max,
            disparity: vec![value; height * width],
            valid: vec![true; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.width + col;
        self.valid[i].then_some(self.disparity[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.disparity
            .iter()
            .zip(&self.valid)
            .map(|(&d, &v)| v.then_some(d))
            .collect()
    }

    fn invalidate(&mut self, i: usize) {
        self.valid[i] = false;
        self.disparity[i] = 0.0;
    }

    fn check_same_size(&self, other: &DisparityMap) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::SizeMismatch(format!(
                "disparity maps {}x{} and {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Smallest disparity reaching the minimum cost at each pixel.
pub fn winner_take_all(cv: &CostVolume) -> DisparityMap {
    let disparity = cv
        .cost
        .chunks_exact(cv.d_max + 1)
        .map(|costs| {
            let mut best = 0;
            for (d, &c) in costs.iter().enumerate().skip(1) {
                if c < costs[best] {
                    best = d;
                }
            }
            best as f64
        })
        .collect();
    DisparityMap {
        height: cv.height,
        width: cv.width,
        d_max: cv.d_max,
        disparity,
        valid: vec![true; cv.height * cv.width],
    }
}

/// Keeps a left-referenced pixel only when the right-referenced map agrees
/// within `tol` at its counterpart `(r, c - round(d))`.
pub fn left_right_check(left: &DisparityMap, right: &DisparityMap, tol: f64) -> Result<DisparityMap> {
    consistency_check(left, right, tol, -1)
}

/// The mirrored check for a right-referenced map: the counterpart of
/// `(r, c)` is `(r, c + round(d))` in the left-referenced map.
pub fn right_left_check(right: &DisparityMap, left: &DisparityMap, tol: f64) -> Result<DisparityMap> {
    consistency_check(right, left, tol, 1)
}

fn consistency_check(anchor: &DisparityMap, other: &DisparityMap, tol: f64, direction: isize) -> Result<DisparityMap> {
    anchor.check_same_size(other)?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", "must be non-negative"));
    }
    let mut out = anchor.clone();
    let w = anchor.width as isize;
    for r in 0..anchor.height {
        for c in 0..anchor.width {
            let i = r * anchor.width + c;
            let Some(d) = anchor.get(r, c) else {
                continue;
            };
            let cc = c as isize + direction * d.round() as isize;
            let consistent = (0..w).contains(&cc)
                && other
                    .get(r, cc as usize)
                    .is_some_and(|d2| (d - d2).abs() <= tol);
            if !consistent {
                out.invalidate(i);
            }
        }
    }
    Ok(out)
}

/// Lower median (element `(n - 1) / 2` after sorting).
fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite disparities"));
    values[(values.len() - 1) / 2]
}

/// Fills holes with the median of valid neighbors in a `(2 radius + 1)^2`
/// window (when at least three exist), then runs one 3 x 3 median over all
/// valid pixels.
pub fn median_fill(dm: &DisparityMap, radius: usize) -> DisparityMap {
    let (h, w) = (dm.height, dm.width);
    let mut filled = dm.clone();
    let mut window = Vec::new();
    let gather = |map: &DisparityMap, r: usize, c: usize, radius: usize, out: &mut Vec<f64>| {
        out.clear();
        let r0 = r.saturating_sub(radius);
        let c0 = c.saturating_sub(radius);
        for rr in r0..(r + radius + 1).min(h) {
            for cc in c0..(c + radius + 1).min(w) {
                if let Some(d) = map.get(rr, cc) {
                    out.push(d);
                }
            }
        }
    };
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if dm.valid[i] {
                continue;
            }
            gather(dm, r, c, radius, &mut window);
            if window.len() >= 3 {
                filled.disparity[i] = lower_median(&mut window);
                filled.valid[i] = true;
            }
        }
    }
    let mut out = filled.clone();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !filled.valid[i] {
                continue;
            }
            gather(&filled, r, c, 1, &mut window);
            out.disparity[i] = lower_median(&mut window);
        }
    }
    out
}
