use std::collections::VecDeque;

use super::{blur_plane, gaussian_kernel, BinaryMask, Image};
use crate::error::{Error, Result};

const SMOOTHING_SIGMA: f64 = 1.0;
// Magnitudes closer than this are treated as ties during suppression.
const TIE_TOL: f64 = 1e-9;

/// Canny edge detector: Gaussian smoothing (sigma 1), Sobel gradients,
/// non-maximum suppression and double-threshold hysteresis with
/// 8-connectivity.
///
/// The Sobel response is scaled by 1/8 so the magnitude is a per-pixel slope
/// and the thresholds live in `[0, 1]`. On a ridge that is exactly two pixels
/// wide (a symmetric step), suppression keeps the pixel on the darker side.
pub fn canny_edges(img: &Image, low: f64, high: f64) -> Result<BinaryMask> {
    img.require_single_channel("canny_edges")?;
    if !(0.0 <= low && low < high && high <= 1.0) {
        return Err(Error::invalid(
            "thresholds",
            format!("need 0 <= low < high <= 1, got low={low} high={high}"),
        ));
    }
    let (h, w) = img.dims();
    let kernel = gaussian_kernel(SMOOTHING_SIGMA)?;
    let smooth = blur_plane(img.data(), h, w, &kernel);
    let (gx, gy) = sobel(&smooth, h, w);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let thin = non_maximum_suppression(&mag, &gx, &gy, h, w);
    Ok(hysteresis(&thin, h, w, low, high))
}

fn sobel(src: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |r: isize, c: isize| {
        let rr = r.clamp(0, h as isize - 1) as usize;
        let cc = c.clamp(0, w as isize - 1) as usize;
        src[rr * w + cc]
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            gx[i] = ((at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1)))
                / 8.0;
            gy[i] = ((at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1)))
                / 8.0;
        }
    }
    (gx, gy)
}

// Unit steps (row, col) for the eight gradient sectors, counter-clockwise
// from +x with rows growing downwards.
const SECTORS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

fn non_maximum_suppression(mag: &[f64], gx: &[f64], gy: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |r: isize, c: isize| {
        let rr = r.clamp(0, h as isize - 1) as usize;
        let cc = c.clamp(0, w as isize - 1) as usize;
        mag[rr * w + cc]
    };
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]);
            let sector = ((angle / std::f64::consts::FRAC_PI_4).round() as isize).rem_euclid(8);
            let (dr, dc) = SECTORS[sector as usize];
            let (r, c) = (r as isize, c as isize);
            let ahead = at(r + dr, c + dc);
            let behind = at(r - dr, c - dc);
            if m >= ahead - TIE_TOL && m > behind + TIE_TOL {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(thin: &[f64], h: usize, w: usize, low: f64, high: f64) -> BinaryMask {
    let mut edges = vec![false; h * w];
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high && m > 0.0 {
            edges[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    continue;
                }
                let j = rr as usize * w + cc as usize;
                if !edges[j] && thin[j] >= low && thin[j] > 0.0 {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    BinaryMask::from_vec(h, w, edges).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_image(h: usize, w: usize) -> Image {
        let data = (0..h * w)
            .map(|i| if i % w >= w / 2 { 1.0 } else { 0.0 })
            .collect();
        Image::from_vec(h, w, 1, data).unwrap()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let img = Image::filled(20, 20, 1, 0.6).unwrap();
        assert!(canny_edges(&img, 0.1, 0.3).unwrap().is_empty());
    }

    #[test]
    fn bad_thresholds() {
        let img = Image::filled(5, 5, 1, 0.6).unwrap();
        assert!(canny_edges(&img, 0.3, 0.3).is_err());
        assert!(canny_edges(&img, 0.4, 0.3).is_err());
        assert!(canny_edges(&img, -0.1, 0.3).is_err());
        assert!(canny_edges(&Image::new(5, 5, 3).unwrap(), 0.1, 0.3).is_err());
    }

    #[test]
    fn vertical_step_gives_single_line() {
        let (h, w) = (24, 30);
        let img = step_image(h, w);
        let edges = canny_edges(&img, 0.1, 0.3).unwrap();

        // Exhaustive oracle: in each row the smoothed slope peaks on the two
        // columns straddling the step; ties resolve to the dark side.
        let kernel = gaussian_kernel(SMOOTHING_SIGMA).unwrap();
        let smooth = blur_plane(img.data(), h, w, &kernel);
        let (gx, gy) = sobel(&smooth, h, w);
        for r in 1..h - 1 {
            let row: Vec<f64> = (0..w).map(|c| gx[r * w + c].hypot(gy[r * w + c])).collect();
            let max = row.iter().cloned().fold(0.0, f64::max);
            let first_max = row.iter().position(|&m| (m - max).abs() <= TIE_TOL).unwrap();
            assert_eq!(first_max, w / 2 - 1);
            for c in 0..w {
                assert_eq!(edges.get(r, c), c == first_max, "row {r} col {c}");
            }
        }
    }

    #[test]
    fn square_outline_hugs_the_boundary() {
        let (h, w) = (30, 30);
        let mask = BinaryMask::from_fn(h, w, |r, c| (10..20).contains(&r) && (10..20).contains(&c));
        let edges = canny_edges(&mask.to_image(), 0.1, 0.3).unwrap();
        // Mid-side edges land just outside; near corners the smoothed slope
        // peaks one pixel further in.
        let core = crate::imaging::erode(&mask, 1).unwrap();
        assert!(edges.and(&core).is_empty());
        for k in 11..19 {
            assert!(edges.get(9, k) || edges.get(10, k));
            assert!(edges.get(20, k) || edges.get(19, k));
            assert!(edges.get(k, 9) || edges.get(k, 10));
            assert!(edges.get(k, 20) || edges.get(k, 19));
        }
        for k in 14..16 {
            assert!(edges.get(9, k) && !edges.get(10, k));
            assert!(edges.get(k, 9) && !edges.get(k, 10));
        }
    }
}
