use rayon::prelude::*;

use super::scribbles::{Scribble, ScribbleMap};
use crate::error::{Error, Result};
use crate::imaging::Image;

const WIN_RADIUS: usize = 1;
const WIN_SIZE: f64 = 9.0;
// Row slots: every pixel sharing a 3x3 window with pixel i lies within a
// 5x5 neighbourhood of it.
const REACH: isize = 2 * WIN_RADIUS as isize;
const SPAN: usize = 2 * REACH as usize + 1;
const SLOTS: usize = SPAN * SPAN;
/// A solve that stalls above this relative residual is reported as failed.
pub const ACCEPT_RESIDUAL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct MattingParams {
    pub eps: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MattingParams {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            gamma: 1e2,
            tol: 1e-6,
            max_iters: 2000,
        }
    }
}

impl MattingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid("matting_eps", "must be finite and > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid("matting_gamma", "must be finite and > 0"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("matting_tol", "must lie in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("matting_max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-pixel opacity of the fence layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap {
    pub height: usize,
    pub width: usize,
    pub alpha: Vec<f64>,
}

impl AlphaMap {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.alpha[r * self.width + c]
    }

    pub fn to_image(&self) -> Image {
        Image::from_parts_unchecked(self.height, self.width, 1, self.alpha.clone())
    }
}

/// Closed-form matting Laplacian over 3x3 windows, stored as a banded
/// 25-slot row per pixel.
#[derive(Debug, Clone)]
pub struct MattingLaplacian {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

struct WindowStats {
    mean: Vec<f64>,
    // (cov + eps / |w| I)^-1, row-major
    inv: Vec<f64>,
}

impl MattingLaplacian {
    /// Accumulates, for every window w_k fully inside the frame,
    /// `delta_ij - (1 + (I_i - m_k)^T (S_k + eps/9 I)^-1 (I_j - m_k)) / 9`.
    pub fn build(img: &Image, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("matting_eps", "must be finite and > 0"));
        }
        let (h, w) = img.dims();
        let ch = img.channels();
        let pixel = |r: usize, c: usize| -> &[f64] { &img.data()[(r * w + c) * ch..(r * w + c + 1) * ch] };

        let centre_ok = |r: usize, c: usize| r >= WIN_RADIUS && c >= WIN_RADIUS && r + WIN_RADIUS < h && c + WIN_RADIUS < w;
        let stats: Vec<Option<WindowStats>> = (0..h * w)
            .into_par_iter()
            .map(|k| {
                let (r, c) = (k / w, k % w);
                if !centre_ok(r, c) {
                    return None;
                }
                let mut mean = vec![0.0; ch];
                let mut cov = vec![0.0; ch * ch];
                for rr in r - WIN_RADIUS..=r + WIN_RADIUS {
                    for cc in c - WIN_RADIUS..=c + WIN_RADIUS {
                        let p = pixel(rr, cc);
                        for a in 0..ch {
                            mean[a] += p[a] / WIN_SIZE;
                            for b in 0..ch {
                                cov[a * ch + b] += p[a] * p[b] / WIN_SIZE;
                            }
                        }
                    }
                }
                for a in 0..ch {
                    for b in 0..ch {
                        cov[a * ch + b] -= mean[a] * mean[b];
                    }
                    cov[a * ch + a] += eps / WIN_SIZE;
                }
                Some(WindowStats {
                    mean,
                    inv: spd_inverse(&cov, ch),
                })
            })
            .collect();

        let mut values = vec![0.0; h * w * SLOTS];
        values.par_chunks_mut(SLOTS).enumerate().for_each(|(i, row)| {
            let (ri, ci) = ((i / w) as isize, (i % w) as isize);
            let pi = pixel(ri as usize, ci as usize);
            let mut di = vec![0.0; ch];
            let mut tmp = vec![0.0; ch];
            let r1 = WIN_RADIUS as isize;
            for kr in ri - r1..=ri + r1 {
                for kc in ci - r1..=ci + r1 {
                    if kr < 0 || kc < 0 || kr >= h as isize || kc >= w as isize {
                        continue;
                    }
                    let Some(st) = &stats[kr as usize * w + kc as usize] else {
                        continue;
                    };
                    for a in 0..ch {
                        di[a] = pi[a] - st.mean[a];
                    }
                    for a in 0..ch {
                        tmp[a] = (0..ch).map(|b| st.inv[a * ch + b] * di[b]).sum();
                    }
                    for jr in kr - r1..=kr + r1 {
                        for jc in kc - r1..=kc + r1 {
                            let pj = pixel(jr as usize, jc as usize);
                            let q: f64 = (0..ch).map(|a| tmp[a] * (pj[a] - st.mean[a])).sum();
                            let delta = if jr == ri && jc == ci { 1.0 } else { 0.0 };
                            let slot = ((jr - ri + REACH) as usize) * SPAN + (jc - ci + REACH) as usize;
                            row[slot] += delta - (1.0 + q) / WIN_SIZE;
                        }
                    }
                }
            }
        });
        Ok(Self {
            height: h,
            width: w,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry `L[i][j]`; zero outside the band.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let w = self.width as isize;
        let (dr, dc) = ((j / self.width) as isize - (i / self.width) as isize, (j as isize % w) - (i as isize % w));
        if dr.abs() > REACH || dc.abs() > REACH {
            return 0.0;
        }
        self.values[i * SLOTS + ((dr + REACH) as usize) * SPAN + (dc + REACH) as usize]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * SLOTS + SLOTS / 2]).collect()
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (h, w) = (self.height as isize, self.width as isize);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (r, c) = ((i as isize) / w, (i as isize) % w);
            let row = &self.values[i * SLOTS..(i + 1) * SLOTS];
            let mut acc = 0.0;
            for dr in -REACH..=REACH {
                let rr = r + dr;
                if rr < 0 || rr >= h {
                    continue;
                }
                for dc in -REACH..=REACH {
                    let cc = c + dc;
                    if cc < 0 || cc >= w {
                        continue;
                    }
                    acc += row[((dr + REACH) as usize) * SPAN + (dc + REACH) as usize] * x[(rr * w + cc) as usize];
                }
            }
            *yi = acc;
        });
    }
}

// Inverse of a small symmetric positive definite matrix via Cholesky.
fn spd_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = if i == j { s.sqrt() } else { s / l[j * n + j] };
        }
    }
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        // Solve L z = e_col, then L^T x = z.
        let mut z = vec![0.0; n];
        for i in 0..n {
            let e = if i == col { 1.0 } else { 0.0 };
            z[i] = (e - (0..i).map(|k| l[i * n + k] * z[k]).sum::<f64>()) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let x = (z[i] - (i + 1..n).map(|k| l[k * n + i] * inv[k * n + col]).sum::<f64>()) / l[i * n + i];
            inv[i * n + col] = x;
        }
    }
    inv
}

/// Solves `(L + gamma S) alpha = gamma s` by Jacobi-preconditioned conjugate
/// gradients, clamps to `[0, 1]` and pins scribbled pixels to their labels.
pub fn solve_alpha(img: &Image, scribbles: &ScribbleMap, params: &MattingParams) -> Result<AlphaMap> {
    params.validate()?;
    img.require_dims(scribbles.height, scribbles.width, "scribble map")?;
    scribbles.require_both_classes()?;
    let lap = MattingLaplacian::build(img, params.eps)?;
    let n = lap.len();

    let target: Vec<Option<f64>> = scribbles
        .labels
        .iter()
        .map(|s| match s {
            Scribble::Foreground => Some(1.0),
            Scribble::Background => Some(0.0),
            Scribble::Unknown => None,
        })
        .collect();
    let penalty: Vec<f64> = target.iter().map(|t| if t.is_some() { params.gamma } else { 0.0 }).collect();
    let b: Vec<f64> = target.iter().map(|t| params.gamma * t.unwrap_or(0.0)).collect();
    let precond: Vec<f64> = lap
        .diagonal()
        .iter()
        .zip(&penalty)
        .map(|(d, p)| {
            let v = d + p;
            if v > 0.0 {
                1.0 / v
            } else {
                1.0
            }
        })
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        lap.apply(x, y);
        y.par_iter_mut().zip(x.par_iter().zip(&penalty)).for_each(|(yi, (xi, p))| *yi += p * xi);
    };
    let x0: Vec<f64> = target.iter().map(|t| t.unwrap_or(0.0)).collect();
    let (mut x, residual, iterations) = pcg(apply, &b, &precond, x0, params.tol, params.max_iters);
    log::debug!("matting solve: {n} unknowns, residual {residual:.3e} after {iterations} iterations");
    if !(residual <= ACCEPT_RESIDUAL) {
        return Err(Error::NonConvergence { residual, iterations });
    }
    if residual > params.tol {
        log::warn!("matting solve stopped at residual {residual:.3e} (target {:.1e})", params.tol);
    }
    for (xi, t) in x.iter_mut().zip(&target) {
        *xi = match t {
            Some(v) => *v,
            None => xi.clamp(0.0, 1.0),
        };
    }
    Ok(AlphaMap {
        height: scribbles.height,
        width: scribbles.width,
        alpha: x,
    })
}

/// Preconditioned conjugate gradients. Returns the iterate, its relative
/// residual and the iteration count.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    precond: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, f64, usize) {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.par_iter().zip(b).map(|(x, y)| x * y).sum() };
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (vec![0.0; n], 0.0, 0);
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(precond).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut it = 0;
    while res > tol && it < max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += step * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= step * a);
        z.par_iter_mut().zip(r.par_iter().zip(precond)).for_each(|(z, (r, m))| *z = r * m);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        res = dot(&r, &r).sqrt() / b_norm;
        it += 1;
    }
    (x, res, it)
}
