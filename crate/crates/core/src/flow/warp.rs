use super::FlowField;
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Image};

/// Sparse bilinear resampling operator. Row `p` holds up to four
/// (source index, weight) pairs; rows whose sample leaves the frame are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpOperator {
    height: usize,
    width: usize,
    offsets: Vec<usize>,
    index: Vec<usize>,
    weight: Vec<f64>,
}

impl WarpOperator {
    pub fn identity(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            offsets: (0..=n).collect(),
            index: (0..n).collect(),
            weight: vec![1.0; n],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[p]..self.offsets[p + 1];
        self.index[span.clone()].iter().copied().zip(self.weight[span].iter().copied())
    }

    pub fn is_in_bounds(&self, p: usize) -> bool {
        self.offsets[p + 1] > self.offsets[p]
    }

    pub fn in_bounds_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |r, c| self.is_in_bounds(r * self.width + c))
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.height, self.width)
    }

    pub(crate) fn apply_plane(&self, src: &[f64], out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.row(p).map(|(j, w)| w * src[j]).sum();
        }
    }

    pub(crate) fn adjoint_plane(&self, src: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (p, &s) in src.iter().enumerate() {
            for (j, w) in self.row(p) {
                out[j] += w * s;
            }
        }
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.height, self.width) {
            return Err(Error::SizeMismatch(format!(
                "warp is {}x{}, image is {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}

/// Samples `(r + v, c + u)` bilinearly for every output pixel `(r, c)`.
/// A sample counts as in-bounds when it lies within `[0, h-1] x [0, w-1]`.
pub fn build_warp(flow: &FlowField) -> WarpOperator {
    let (h, w) = (flow.height, flow.width);
    let mut offsets = Vec::with_capacity(h * w + 1);
    let mut index = Vec::with_capacity(4 * h * w);
    let mut weight = Vec::with_capacity(4 * h * w);
    offsets.push(0);
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let y = r as f64 + flow.v[p];
            let x = c as f64 + flow.u[p];
            if y >= 0.0 && x >= 0.0 && y <= (h - 1) as f64 && x <= (w - 1) as f64 {
                let (y0, x0) = (y.floor() as usize, x.floor() as usize);
                let (fy, fx) = (y - y0 as f64, x - x0 as f64);
                let taps = [
                    (y0, x0, (1.0 - fy) * (1.0 - fx)),
                    (y0, x0 + 1, (1.0 - fy) * fx),
                    (y0 + 1, x0, fy * (1.0 - fx)),
                    (y0 + 1, x0 + 1, fy * fx),
                ];
                for (yy, xx, wt) in taps {
                    if wt > 0.0 {
                        index.push(yy * w + xx);
                        weight.push(wt);
                    }
                }
            }
            offsets.push(index.len());
        }
    }
    WarpOperator {
        height: h,
        width: w,
        offsets,
        index,
        weight,
    }
}

/// Per-channel `W img`.
pub fn apply(warp: &WarpOperator, img: &Image) -> Result<Image> {
    warp.check(img)?;
    per_channel(img, |src, out| warp.apply_plane(src, out))
}

/// Per-channel `W^T img`.
pub fn apply_adjoint(warp: &WarpOperator, img: &Image) -> Result<Image> {
    warp.check(img)?;
    per_channel(img, |src, out| warp.adjoint_plane(src, out))
}

fn per_channel(img: &Image, f: impl Fn(&[f64], &mut [f64])) -> Result<Image> {
    let (h, w) = img.dims();
    let planes: Vec<Vec<f64>> = img
        .planes()
        .iter()
        .map(|src| {
            let mut out = vec![0.0; h * w];
            f(src, &mut out);
            out
        })
        .collect();
    let ch = planes.len();
    let mut data = vec![0.0; h * w * ch];
    for (k, plane) in planes.iter().enumerate() {
        for (i, v) in plane.iter().enumerate() {
            data[i * ch + k] = *v;
        }
    }
    Image::from_raw(h, w, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_flow(rng: &mut ChaCha8Rng, h: usize, w: usize, amp: f64) -> FlowField {
        let n = h * w;
        FlowField {
            height: h,
            width: w,
            u: (0..n).map(|_| rng.random_range(-amp..amp)).collect(),
            v: (0..n).map(|_| rng.random_range(-amp..amp)).collect(),
        }
    }

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, ch: usize) -> Image {
        Image::from_vec(h, w, ch, (0..h * w * ch).map(|_| rng.random()).collect()).unwrap()
    }

    fn inner(a: &Image, b: &Image) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn zero_flow_is_identity() {
        let op = build_warp(&FlowField::zeros(5, 7));
        assert!(op.is_identity());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = random_image(&mut rng, 5, 7, 3);
        assert_eq!(apply(&op, &img).unwrap(), img);
    }

    #[test]
    fn half_pixel_averages_neighbours() {
        let (h, w) = (1, 8);
        let ramp = Image::from_vec(h, w, 1, (0..w).map(|c| c as f64 / 10.0).collect()).unwrap();
        let mut flow = FlowField::zeros(h, w);
        flow.u.iter_mut().for_each(|u| *u = 0.5);
        let out = apply(&build_warp(&flow), &ramp).unwrap();
        for c in 0..w - 1 {
            let expect = 0.5 * (ramp.get(0, c, 0) + ramp.get(0, c + 1, 0));
            assert!((out.get(0, c, 0) - expect).abs() < 1e-12);
        }
        assert_eq!(out.get(0, w - 1, 0), 0.0);
        assert!(!build_warp(&flow).is_in_bounds(w - 1));
    }

    #[test]
    fn unit_shift_moves_bright_pixel_left() {
        let (h, w) = (6, 6);
        let mut img = Image::new(h, w, 1).unwrap();
        img.set(2, 3, 0, 1.0);
        let mut flow = FlowField::zeros(h, w);
        flow.u.iter_mut().for_each(|u| *u = 1.0);
        let out = apply(&build_warp(&flow), &img).unwrap();
        // Direct resampling: out(r, c) = img(r, c + 1).
        for r in 0..h {
            for c in 0..w - 1 {
                assert_eq!(out.get(r, c, 0), img.get(r, c + 1, 0));
            }
        }
        assert_eq!(out.get(2, 2, 0), 1.0);
    }

    #[test]
    fn adjoint_identity_on_random_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let op = build_warp(&random_flow(&mut rng, 16, 16, 3.0));
            let a = random_image(&mut rng, 16, 16, 1);
            let b = random_image(&mut rng, 16, 16, 1);
            let lhs = inner(&apply(&op, &a).unwrap(), &b);
            let rhs = inner(&a, &apply_adjoint(&op, &b).unwrap());
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn rows_partition_unity_or_are_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (h, w) = (16, 16);
        let flow = random_flow(&mut rng, h, w, 4.0);
        let op = build_warp(&flow);
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                let (y, x) = (r as f64 + flow.v[p], c as f64 + flow.u[p]);
                let inside = y >= 0.0 && x >= 0.0 && y <= (h - 1) as f64 && x <= (w - 1) as f64;
                assert_eq!(op.is_in_bounds(p), inside);
                let sum: f64 = op.row(p).map(|(_, wt)| wt).sum();
                if inside {
                    assert!((sum - 1.0).abs() < 1e-9);
                    assert!(op.row(p).all(|(_, wt)| wt > 0.0));
                } else {
                    assert_eq!(op.row(p).count(), 0);
                }
            }
        }
    }

    #[test]
    fn size_mismatch() {
        let op = WarpOperator::identity(4, 4);
        assert!(apply(&op, &Image::new(4, 5, 1).unwrap()).is_err());
        assert!(apply_adjoint(&op, &Image::new(5, 4, 1).unwrap()).is_err());
    }
}
