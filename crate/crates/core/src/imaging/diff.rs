use super::{GradientField, Image};
use crate::error::Result;

/// Forward differences with a replicate boundary.
pub fn grad(img: &Image) -> Result<GradientField> {
    img.require_single_channel("grad")?;
    let (h, w) = img.dims();
    let mut g = GradientField::zeros(h, w);
    grad_into(img.data(), h, w, &mut g.dx, &mut g.dy);
    Ok(g)
}

/// Negative adjoint of [`grad`]: `<grad u, g> = -<u, div g>` for every `u`, `g`.
pub fn div(g: &GradientField) -> Image {
    let mut out = vec![0.0; g.height * g.width];
    div_into(&g.dx, &g.dy, g.height, g.width, &mut out);
    Image::from_parts_unchecked(g.height, g.width, 1, out)
}

pub(crate) fn grad_into(u: &[f64], h: usize, w: usize, dx: &mut [f64], dy: &mut [f64]) {
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let i = row + c;
            dx[i] = if c + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            dy[i] = if r + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

// Entries of `dx` in the last column and `dy` in the last row never reach
// the output, which keeps the adjoint identity exact for arbitrary fields.
pub(crate) fn div_into(dx: &[f64], dy: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for r in 0..h {
        let row = r * w;
        for c in 0..w {
            let i = row + c;
            let mut v = 0.0;
            if c + 1 < w {
                v += dx[i];
            }
            if c >= 1 {
                v -= dx[i - 1];
            }
            if r + 1 < h {
                v += dy[i];
            }
            if r >= 1 {
                v -= dy[i - w];
            }
            out[i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_has_zero_gradient() {
        let img = Image::filled(6, 7, 1, 0.4).unwrap();
        let g = grad(&img).unwrap();
        assert!(g.dx.iter().chain(&g.dy).all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_gradient() {
        let (h, w) = (5, 8);
        let data = (0..h * w).map(|i| (i % w) as f64 / w as f64).collect();
        let g = grad(&Image::from_vec(h, w, 1, data).unwrap()).unwrap();
        for r in 0..h {
            for c in 0..w {
                let expect = if c + 1 < w { 1.0 / w as f64 } else { 0.0 };
                assert!((g.dx[r * w + c] - expect).abs() < 1e-12);
                assert_eq!(g.dy[r * w + c], 0.0);
            }
        }
    }

    #[test]
    fn adjoint_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (h, w) = (16, 16);
        for _ in 0..20 {
            let u: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
            let gx: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let gy: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let img = Image::from_vec(h, w, 1, u.clone()).unwrap();
            let gu = grad(&img).unwrap();
            let g = GradientField::from_vecs(h, w, gx, gy).unwrap();
            let lhs = gu.dot(&g);
            let d = div(&g);
            let rhs: f64 = u.iter().zip(d.data()).map(|(a, b)| a * b).sum();
            assert!((lhs + rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn degenerate_sizes() {
        let img = Image::from_vec(1, 1, 1, vec![0.3]).unwrap();
        let g = grad(&img).unwrap();
        assert_eq!(g.dx, vec![0.0]);
        assert_eq!(div(&g).data(), &[0.0]);
    }

    #[test]
    fn grad_rejects_color() {
        assert!(grad(&Image::new(2, 2, 3).unwrap()).is_err());
    }
}
