use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::WarpOperator;
use crate::imaging::{io, BinaryMask, Image};
use crate::solver::degrade;

#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSource {
    /// Colour value noise generated from this seed.
    Procedural(u64),
    /// Image file, cropped from the top-left corner; must be at least
    /// `width + background_disparity` wide.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub height: usize,
    pub width: usize,
    pub background: BackgroundSource,
    /// Wire thickness measured across the wire.
    pub wire_width: f64,
    /// Spacing between parallel wires, measured across the wires.
    pub pitch: f64,
    /// Angle of the first wire family against the image rows; the second
    /// family is perpendicular to it. 45 gives a diamond mesh, 0 a square grid.
    pub orientation_deg: f64,
    pub fence_disparity: usize,
    pub background_disparity: usize,
    pub fence_value: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            height: 240,
            width: 320,
            background: BackgroundSource::Procedural(1),
            wire_width: 4.0,
            pitch: 32.0,
            orientation_deg: 45.0,
            fence_disparity: 20,
            background_disparity: 5,
            fence_value: 0.08,
            noise_sigma: 0.0,
            seed: 7,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(self.wire_width.is_finite() && self.wire_width > 0.0) {
            return Err(Error::invalid("wire_width", "must be > 0"));
        }
        if !(self.pitch.is_finite() && self.wire_width < self.pitch) {
            return Err(Error::invalid("pitch", "must exceed wire_width"));
        }
        if !self.orientation_deg.is_finite() {
            return Err(Error::invalid("orientation", "must be finite"));
        }
        if self.fence_disparity <= self.background_disparity {
            return Err(Error::invalid("fence_disparity", "must exceed background_disparity"));
        }
        if !(0.0..=1.0).contains(&self.fence_value) {
            return Err(Error::invalid("fence_value", "must lie in [0, 1]"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Whether the fence covers the centre of pixel `(r, c)` in left-view
    /// coordinates; `c` may run past the frame.
    pub fn fence_at(&self, r: usize, c: usize) -> bool {
        let theta = self.orientation_deg.to_radians();
        let (s, t) = (theta.sin(), theta.cos());
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        // Signed distances along the two wire normals, phase-shifted so the
        // mesh does not start on the frame corner.
        let a = x * s + y * t + 0.37 * self.pitch;
        let b = x * t - y * s + 0.61 * self.pitch;
        let near = |v: f64| {
            let m = v.rem_euclid(self.pitch);
            m.min(self.pitch - m) < self.wire_width / 2.0
        };
        near(a) || near(b)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub left: Image,
    pub right: Image,
    pub truth_background: Image,
    pub truth_fence_left: BinaryMask,
    pub truth_fence_right: BinaryMask,
}

/// Renders a fenced stereo pair. With `B` the background texture and `F` the
/// fence indicator, the left view shows `B(r, c)` and the right view shows
/// `B(r, c + background_disparity)`, each covered wherever `F(r, c)`
/// (respectively `F(r, c + fence_disparity)`) holds.
pub fn generate_scene(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let wide = w + spec.background_disparity;
    let texture = match &spec.background {
        BackgroundSource::Procedural(seed) => procedural_texture(h, wide, *seed)?,
        BackgroundSource::File(path) => {
            let img = io::load_image(path)?;
            if img.height() < h || img.width() < wide {
                return Err(Error::invalid(
                    "background",
                    format!("{}x{} image is smaller than the required {h}x{wide}", img.height(), img.width()),
                ));
            }
            crop(&img, h, wide)
        }
    };
    let ch = texture.channels();
    let fence_left = BinaryMask::from_fn(h, w, |r, c| spec.fence_at(r, c));
    let fence_right = BinaryMask::from_fn(h, w, |r, c| spec.fence_at(r, c + spec.fence_disparity));
    let mut left = Image::new(h, w, ch)?;
    let mut right = Image::new(h, w, ch)?;
    let mut truth = Image::new(h, w, ch)?;
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let bl = texture.get(r, c, k);
                let br = texture.get(r, c + spec.background_disparity, k);
                truth.set(r, c, k, bl);
                left.set(r, c, k, if fence_left.get(r, c) { spec.fence_value } else { bl });
                right.set(r, c, k, if fence_right.get(r, c) { spec.fence_value } else { br });
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        let full = BinaryMask::new(h, w, true);
        let id = WarpOperator::identity(h, w);
        left = degrade(&left, &full, &id, spec.noise_sigma, spec.seed)?.clamp();
        right = degrade(&right, &full, &id, spec.noise_sigma, spec.seed.wrapping_add(1))?.clamp();
    }
    Ok(SyntheticScene {
        left,
        right,
        truth_background: truth,
        truth_fence_left: fence_left,
        truth_fence_right: fence_right,
    })
}

fn crop(img: &Image, h: usize, w: usize) -> Image {
    let ch = img.channels();
    let mut out = Image::new(h, w, ch).expect("nonzero crop");
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                out.set(r, c, k, img.get(r, c, k));
            }
        }
    }
    out
}

// Octave cell sizes and weights of the value noise.
const OCTAVES: [(f64, f64); 5] = [(32.0, 0.3), (16.0, 0.25), (8.0, 0.2), (4.0, 0.15), (2.0, 0.1)];
// Share of each channel taken from the common luminance pattern.
const LUMA_SHARE: f64 = 0.7;

fn value_noise(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    for &(cell, weight) in &OCTAVES {
        let gh = (h as f64 / cell).ceil() as usize + 2;
        let gw = (w as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.random()).collect();
        let at = |yy: usize, xx: usize| lattice[yy * gw + xx];
        for r in 0..h {
            let y = r as f64 / cell;
            let (y0, fy) = (y.floor() as usize, smooth(y.fract()));
            for c in 0..w {
                let x = c as f64 / cell;
                let (x0, fx) = (x.floor() as usize, smooth(x.fract()));
                let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
                    + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
                out[r * w + c] += weight * v;
            }
        }
    }
    out
}

/// Three-channel value noise in `[0.3, 0.95]`. A shared luminance pattern
/// keeps the grey-level texture strong; per-channel patterns add colour.
pub fn procedural_texture(h: usize, w: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = value_noise(h, w, &mut rng);
    let mut data = vec![0.0; h * w * 3];
    for k in 0..3 {
        let tint = value_noise(h, w, &mut rng);
        for i in 0..h * w {
            data[i * 3 + k] = 0.3 + 0.65 * (LUMA_SHARE * luma[i] + (1.0 - LUMA_SHARE) * tint[i]);
        }
    }
    Image::from_vec(h, w, 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fence_offset_is_exact() {
        let spec = SyntheticSceneSpec::default();
        let s = generate_scene(&spec).unwrap();
        for r in 0..spec.height {
            for c in 0..spec.width - spec.fence_disparity {
                assert_eq!(s.truth_fence_left.get(r, c + spec.fence_disparity), s.truth_fence_right.get(r, c));
            }
        }
        let frac = s.truth_fence_left.count() as f64 / (spec.height * spec.width) as f64;
        assert!(frac > 0.15 && frac < 0.35, "fence fraction {frac}");
    }

    #[test]
    fn views_follow_construction() {
        let spec = SyntheticSceneSpec::default();
        let s = generate_scene(&spec).unwrap();
        let bd = spec.background_disparity;
        for r in 0..spec.height {
            for c in bd..spec.width {
                for k in 0..3 {
                    if s.truth_fence_left.get(r, c) {
                        assert_eq!(s.left.get(r, c, k), spec.fence_value);
                    } else {
                        assert_eq!(s.left.get(r, c, k), s.truth_background.get(r, c, k));
                    }
                    if !s.truth_fence_right.get(r, c - bd) {
                        assert_eq!(s.right.get(r, c - bd, k), s.truth_background.get(r, c, k));
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let base = SyntheticSceneSpec::default();
        for bad in [
            SyntheticSceneSpec { wire_width: 0.0, ..base.clone() },
            SyntheticSceneSpec { pitch: 3.0, ..base.clone() },
            SyntheticSceneSpec { fence_disparity: 5, ..base.clone() },
            SyntheticSceneSpec { noise_sigma: -0.1, ..base.clone() },
        ] {
            assert!(generate_scene(&bad).is_err());
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSceneSpec { noise_sigma: 0.01, ..Default::default() };
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.left, b.left);
        assert_eq!(a.right, b.right);
        assert_eq!(a.truth_background, b.truth_background);
    }

    #[test]
    fn texture_range() {
        let t = procedural_texture(50, 70, 3).unwrap();
        assert!(t.data().iter().all(|v| (0.3..=0.95).contains(v)));
    }
}
