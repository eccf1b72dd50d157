use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{ObservationSet, TvKind};
use crate::error::{Error, Result};
use crate::flow::{apply, WarpOperator};
use crate::imaging::{div_into, grad_into, BinaryMask, GradientField, Image};

/// `y = O W x + n` with `n ~ N(0, sigma^2)` drawn from a generator seeded by
/// `seed`. The result is not clamped.
pub fn degrade(x: &Image, visible: &BinaryMask, warp: &WarpOperator, noise_sigma: f64, seed: u64) -> Result<Image> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
    }
    let (h, w) = x.dims();
    visible.require_dims(h, w, "visibility mask")?;
    let warped = apply(warp, x)?;
    let ch = x.channels();
    let mut data = warped.into_data();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    for (i, v) in data.iter_mut().enumerate() {
        if !visible.data()[i / ch] {
            *v = 0.0;
        }
        if noise_sigma > 0.0 {
            *v += normal.sample(&mut rng);
        }
    }
    Image::from_raw(h, w, ch, data)
}

pub(crate) fn tv_plane(x: &[f64], h: usize, w: usize, kind: TvKind) -> f64 {
    let mut dx = vec![0.0; h * w];
    let mut dy = vec![0.0; h * w];
    grad_into(x, h, w, &mut dx, &mut dy);
    dx.iter()
        .zip(&dy)
        .map(|(a, b)| match kind {
            TvKind::Isotropic => a.hypot(*b),
            TvKind::Anisotropic => a.abs() + b.abs(),
        })
        .sum()
}

/// Half the squared data residual summed over frames, channels and the
/// pixels each frame actually observes.
pub(crate) fn data_term_planes(x: &[Vec<f64>], obs: &ObservationSet) -> f64 {
    let n = obs.height * obs.width;
    x.par_iter()
        .enumerate()
        .map(|(k, xp)| {
            let mut wx = vec![0.0; n];
            let mut acc = 0.0;
            for f in &obs.frames_internal {
                f.warp.apply_plane(xp, &mut wx);
                for p in 0..n {
                    if f.observed[p] {
                        let r = f.y_planes[k][p] - wx[p];
                        acc += 0.5 * r * r;
                    }
                }
            }
            acc
        })
        .sum()
}

pub(crate) fn energy_planes(x: &[Vec<f64>], obs: &ObservationSet, mu: f64, kind: TvKind) -> f64 {
    let tv: f64 = x.iter().map(|p| tv_plane(p, obs.height, obs.width, kind)).sum();
    data_term_planes(x, obs) + mu * tv
}

/// `1/2 sum_m |O_m (y_m - W_m x)|^2 + mu TV(x)` with isotropic TV summed over
/// channels. Pixels whose warped sample leaves the frame are not observed.
pub fn energy(x: &Image, obs: &ObservationSet, mu: f64) -> Result<f64> {
    obs.check_image(x)?;
    Ok(energy_planes(&x.planes(), obs, mu, TvKind::Isotropic))
}

/// Gradient of the quadratic sub-problem
/// `1/2 sum_m |O_m (y_m - W_m x)|^2 + lambda/2 |d - grad x - b|^2`,
/// that is `-sum_m W_m^T O_m (y_m - W_m x) - lambda div(grad x + b - d)`.
/// `d` and `b` hold one field per channel.
pub fn data_gradient(
    x: &Image,
    obs: &ObservationSet,
    d: &[GradientField],
    b: &[GradientField],
    lambda: f64,
) -> Result<Image> {
    obs.check_image(x)?;
    let ch = x.channels();
    if d.len() != ch || b.len() != ch {
        return Err(Error::SizeMismatch(format!("expected {ch} split fields")));
    }
    let planes = x.planes();
    let grads: Vec<Vec<f64>> = planes
        .par_iter()
        .enumerate()
        .map(|(k, xp)| {
            let mut g = vec![0.0; xp.len()];
            subproblem_gradient_plane(xp, k, obs, &d[k], &b[k], lambda, &mut g, &mut Scratch::new(xp.len()));
            g
        })
        .collect();
    Image::from_planes(obs.height, obs.width, &grads)
}

pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn subproblem_gradient_plane(
    x: &[f64],
    k: usize,
    obs: &ObservationSet,
    d: &GradientField,
    b: &GradientField,
    lambda: f64,
    out: &mut [f64],
    s: &mut Scratch,
) {
    let (h, w) = (obs.height, obs.width);
    let n = h * w;
    out.iter_mut().for_each(|v| *v = 0.0);
    for f in &obs.frames_internal {
        f.warp.apply_plane(x, &mut s.a);
        for p in 0..n {
            s.a[p] = if f.observed[p] { s.a[p] - f.y_planes[k][p] } else { 0.0 };
        }
        f.warp.adjoint_plane(&s.a, &mut s.b);
        for p in 0..n {
            out[p] += s.b[p];
        }
    }
    if lambda != 0.0 {
        grad_into(x, h, w, &mut s.gx, &mut s.gy);
        for p in 0..n {
            s.gx[p] += b.dx[p] - d.dx[p];
            s.gy[p] += b.dy[p] - d.dy[p];
        }
        div_into(&s.gx, &s.gy, h, w, &mut s.a);
        for p in 0..n {
            out[p] -= lambda * s.a[p];
        }
    }
}

/// `A v` for the sub-problem's normal operator
/// `A = sum_m W_m^T O_m W_m - lambda div grad`.
pub(crate) fn normal_operator_plane(v: &[f64], obs: &ObservationSet, lambda: f64, out: &mut [f64], s: &mut Scratch) {
    let (h, w) = (obs.height, obs.width);
    let n = h * w;
    out.iter_mut().for_each(|x| *x = 0.0);
    for f in &obs.frames_internal {
        f.warp.apply_plane(v, &mut s.a);
        for p in 0..n {
            if !f.observed[p] {
                s.a[p] = 0.0;
            }
        }
        f.warp.adjoint_plane(&s.a, &mut s.b);
        for p in 0..n {
            out[p] += s.b[p];
        }
    }
    grad_into(v, h, w, &mut s.gx, &mut s.gy);
    div_into(&s.gx, &s.gy, h, w, &mut s.a);
    for p in 0..n {
        out[p] -= lambda * s.a[p];
    }
}
