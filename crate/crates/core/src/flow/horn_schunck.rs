use rayon::prelude::*;

use super::{FlowField, FlowParams};
use crate::error::{Error, Result};
use crate::imaging::Image;

// Intensities are rescaled to 8-bit range so the smoothness weight has its
// customary magnitude.
const INTENSITY_SCALE: f64 = 255.0;

struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, r: isize, c: isize) -> f64 {
        let rr = r.clamp(0, self.h as isize - 1) as usize;
        let cc = c.clamp(0, self.w as isize - 1) as usize;
        self.data[rr * self.w + cc]
    }

    /// Bilinear sample with coordinates clamped into the frame.
    fn sample(&self, y: f64, x: f64) -> f64 {
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (r, c) = (y0 as isize, x0 as isize);
        (1.0 - fy) * ((1.0 - fx) * self.at(r, c) + fx * self.at(r, c + 1))
            + fy * ((1.0 - fx) * self.at(r + 1, c) + fx * self.at(r + 1, c + 1))
    }

    fn downsample(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut data = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let s = |dr: usize, dc: usize| self.data[(2 * r + dr) * self.w + 2 * c + dc];
                data[r * w + c] = 0.25 * (s(0, 0) + s(0, 1) + s(1, 0) + s(1, 1));
            }
        }
        Plane { h, w, data }
    }
}

/// Coarse-to-fine Horn-Schunck. The returned field satisfies
/// `target(p + f(p)) ~ reference(p)`.
pub fn estimate_flow(reference: &Image, target: &Image, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    reference.require_single_channel("estimate_flow")?;
    target.require_single_channel("estimate_flow")?;
    let (h, w) = reference.dims();
    target.require_dims(h, w, "flow target")?;
    let min_side = 1usize << params.levels;
    if h < min_side || w < min_side {
        return Err(Error::invalid(
            "flow_levels",
            format!("{h}x{w} image is too small for {} pyramid levels", params.levels),
        ));
    }

    let scaled = |img: &Image| Plane {
        h,
        w,
        data: img.data().iter().map(|v| v * INTENSITY_SCALE).collect(),
    };
    let mut refs = vec![scaled(reference)];
    let mut tgts = vec![scaled(target)];
    for _ in 1..params.levels {
        let (r, t) = (refs.last().unwrap().downsample(), tgts.last().unwrap().downsample());
        refs.push(r);
        tgts.push(t);
    }

    let mut flow: Option<FlowField> = None;
    for level in (0..params.levels).rev() {
        let (rp, tp) = (&refs[level], &tgts[level]);
        let init = match flow {
            None => FlowField::zeros(rp.h, rp.w),
            Some(coarse) => upsample(&coarse, rp.h, rp.w),
        };
        let limit = params.max_motion / (1u64 << level) as f64;
        flow = Some(refine(rp, tp, init, params, limit));
    }
    let flow = flow.expect("at least one level");
    if flow.u.iter().chain(&flow.v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("optical flow".into()));
    }
    Ok(flow)
}

fn refine(rp: &Plane, tp: &Plane, init: FlowField, params: &FlowParams, limit: f64) -> FlowField {
    let (h, w) = (rp.h, rp.w);
    let n = h * w;
    let warped: Vec<f64> = (0..n)
        .map(|p| tp.sample((p / w) as f64 + init.v[p], (p % w) as f64 + init.u[p]))
        .collect();
    let wp = Plane { h, w, data: warped };
    let mut ix = vec![0.0; n];
    let mut iy = vec![0.0; n];
    let mut it = vec![0.0; n];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let p = r as usize * w + c as usize;
            let both = |rr: isize, cc: isize| 0.5 * (rp.at(rr, cc) + wp.at(rr, cc));
            ix[p] = 0.5 * (both(r, c + 1) - both(r, c - 1));
            iy[p] = 0.5 * (both(r + 1, c) - both(r - 1, c));
            it[p] = wp.data[p] - rp.data[p];
        }
    }
    let a2 = params.alpha * params.alpha;
    let (u0, v0) = (init.u.clone(), init.v.clone());
    let (mut u, mut v) = (init.u, init.v);
    let mut nu = vec![0.0; n];
    let mut nv = vec![0.0; n];
    for _ in 0..params.iters {
        nu.par_chunks_mut(w)
            .zip(nv.par_chunks_mut(w))
            .enumerate()
            .for_each(|(r, (row_u, row_v))| {
                for c in 0..w {
                    let p = r * w + c;
                    let ub = neighbour_mean(&u, h, w, r, c);
                    let vb = neighbour_mean(&v, h, w, r, c);
                    let t = (ix[p] * (ub - u0[p]) + iy[p] * (vb - v0[p]) + it[p]) / (a2 + ix[p] * ix[p] + iy[p] * iy[p]);
                    row_u[c] = ub - ix[p] * t;
                    row_v[c] = vb - iy[p] * t;
                }
            });
        std::mem::swap(&mut u, &mut nu);
        std::mem::swap(&mut v, &mut nv);
    }
    for x in u.iter_mut().chain(v.iter_mut()) {
        *x = x.clamp(-limit, limit);
    }
    FlowField { height: h, width: w, u, v }
}

// Horn-Schunck's weighted neighbourhood average: 1/6 for edge neighbours,
// 1/12 for diagonal ones, replicate boundary.
fn neighbour_mean(f: &[f64], h: usize, w: usize, r: usize, c: usize) -> f64 {
    let at = |dr: isize, dc: isize| {
        let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
        let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
        f[rr * w + cc]
    };
    (at(-1, 0) + at(1, 0) + at(0, -1) + at(0, 1)) / 6.0 + (at(-1, -1) + at(-1, 1) + at(1, -1) + at(1, 1)) / 12.0
}

fn upsample(coarse: &FlowField, h: usize, w: usize) -> FlowField {
    let (sy, sx) = (h as f64 / coarse.height as f64, w as f64 / coarse.width as f64);
    let up = Plane {
        h: coarse.height,
        w: coarse.width,
        data: coarse.u.clone(),
    };
    let vp = Plane {
        h: coarse.height,
        w: coarse.width,
        data: coarse.v.clone(),
    };
    let mut u = vec![0.0; h * w];
    let mut v = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let y = (r as f64 + 0.5) / sy - 0.5;
            let x = (c as f64 + 0.5) / sx - 0.5;
            u[r * w + c] = sx * up.sample(y, x);
            v[r * w + c] = sy * vp.sample(y, x);
        }
    }
    FlowField { height: h, width: w, u, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth texture as a continuous function so shifted copies are exact.
    fn texture(seed: u64) -> impl Fn(f64, f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| {
                let period = rng.random_range(12.0..40.0);
                let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / period;
                (k * theta.cos(), k * theta.sin(), rng.random_range(0.0..6.3), rng.random_range(0.5..1.0))
            })
            .collect();
        let norm: f64 = waves.iter().map(|w| w.3).sum();
        move |y, x| 0.5 + 0.45 * waves.iter().map(|&(ky, kx, ph, a)| a * (ky * y + kx * x + ph).sin()).sum::<f64>() / norm
    }

    fn render(h: usize, w: usize, f: impl Fn(f64, f64) -> f64) -> Image {
        Image::from_vec(h, w, 1, (0..h * w).map(|i| f((i / w) as f64, (i % w) as f64)).collect()).unwrap()
    }

    /// Integer block search: the shift minimizing SSD of the central block.
    fn block_search(a: &Image, b: &Image, radius: isize) -> (isize, isize) {
        let (h, w) = a.dims();
        let m = radius as usize + 8;
        let mut best = ((0, 0), f64::INFINITY);
        for dv in -radius..=radius {
            for du in -radius..=radius {
                let mut ssd = 0.0;
                for r in m..h - m {
                    for c in m..w - m {
                        let d = b.get((r as isize + dv) as usize, (c as isize + du) as usize, 0) - a.get(r, c, 0);
                        ssd += d * d;
                    }
                }
                if ssd < best.1 {
                    best = ((du, dv), ssd);
                }
            }
        }
        best.0
    }

    #[test]
    fn identical_inputs_give_zero_flow() {
        let img = render(64, 64, texture(1));
        let f = estimate_flow(&img, &img, &FlowParams::default()).unwrap();
        assert!(f.u.iter().chain(&f.v).all(|x| x.abs() < 1e-3));
    }

    #[test]
    fn constant_images_give_zero_flow() {
        let a = Image::filled(32, 32, 1, 0.3).unwrap();
        let f = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(f.u.iter().chain(&f.v).all(|x| *x == 0.0));
    }

    #[test]
    fn translation_recovered() {
        let (h, w) = (128, 128);
        let tex = texture(7);
        let reference = render(h, w, &tex);
        // Content moves three pixels to the right.
        let target = render(h, w, |y, x| tex(y, x - 3.0));
        let (du, dv) = block_search(&reference, &target, 5);
        assert_eq!((du, dv), (3, 0));
        let f = estimate_flow(&reference, &target, &FlowParams::default()).unwrap();
        let margin = 8;
        let mut sum = 0.0;
        let mut n = 0.0;
        for r in margin..h - margin {
            for c in margin..w - margin {
                let p = r * w + c;
                sum += (f.u[p] - du as f64).hypot(f.v[p] - dv as f64);
                n += 1.0;
            }
        }
        let epe = sum / n;
        assert!(epe <= 0.5, "mean endpoint error {epe}");
    }

    #[test]
    fn too_small_for_pyramid() {
        let a = Image::filled(15, 64, 1, 0.3).unwrap();
        assert!(estimate_flow(&a, &a, &FlowParams::default()).is_err());
    }
}
