use crate::error::{Error, Result};
use crate::imaging::{canny_edges, dilate, erode, BinaryMask, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scribble {
    Unknown,
    Foreground,
    Background,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScribbleMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Scribble>,
}

impl ScribbleMap {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![Scribble::Unknown; height * width],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Scribble {
        self.labels[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, s: Scribble) {
        self.labels[r * self.width + c] = s;
    }

    pub fn support(&self, kind: Scribble) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |r, c| self.get(r, c) == kind)
    }

    pub fn count(&self, kind: Scribble) -> usize {
        self.labels.iter().filter(|&&s| s == kind).count()
    }

    /// Matting needs at least one pixel of each class.
    pub fn require_both_classes(&self) -> Result<()> {
        if self.count(Scribble::Foreground) == 0 {
            return Err(Error::DegenerateMask("no foreground scribbles".into()));
        }
        if self.count(Scribble::Background) == 0 {
            return Err(Error::DegenerateMask("no background scribbles".into()));
        }
        Ok(())
    }

    /// Overlay for inspection: foreground green, background blue, unknown
    /// pixels show the (dimmed) underlying luma.
    pub fn visualize(&self, base: &Image) -> Result<Image> {
        base.require_dims(self.height, self.width, "scribble overlay")?;
        let luma = base.luma();
        let mut out = Image::new(self.height, self.width, 3)?;
        for r in 0..self.height {
            for c in 0..self.width {
                let px = match self.get(r, c) {
                    Scribble::Foreground => [0.0, 1.0, 0.0],
                    Scribble::Background => [0.0, 0.0, 1.0],
                    Scribble::Unknown => [0.6 * luma.get(r, c, 0); 3],
                };
                for (ch, v) in px.into_iter().enumerate() {
                    out.set(r, c, ch, v);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScribbleParams {
    pub dilate_radius: usize,
    pub erode_radius: usize,
    pub canny_low: f64,
    pub canny_high: f64,
}

impl Default for ScribbleParams {
    fn default() -> Self {
        Self {
            dilate_radius: 1,
            erode_radius: 5,
            canny_low: 0.1,
            canny_high: 0.3,
        }
    }
}

/// Background scribbles trace the Canny contour of the dilated raw mask;
/// foreground scribbles are the eroded raw mask. Pixels claimed by both stay
/// unknown. If erosion wipes out the foreground, radius 1 is tried before
/// giving up.
pub fn generate_scribbles(raw: &BinaryMask, params: &ScribbleParams) -> Result<ScribbleMap> {
    if raw.is_empty() {
        return Err(Error::DegenerateMask("raw fence mask is empty".into()));
    }
    if raw.is_full() {
        return Err(Error::DegenerateMask("raw fence mask covers the whole frame".into()));
    }
    let (h, w) = raw.dims();
    let dilated = dilate(raw, params.dilate_radius)?;
    let background = canny_edges(&dilated.to_image(), params.canny_low, params.canny_high)?;

    let mut foreground = erode(raw, params.erode_radius)?;
    if foreground.is_empty() && params.erode_radius > 1 {
        log::warn!(
            "erosion by {} removed every foreground scribble; retrying with radius 1",
            params.erode_radius
        );
        foreground = erode(raw, 1)?;
    }
    if foreground.is_empty() {
        return Err(Error::DegenerateMask(
            "mask too thin: erosion leaves no foreground scribbles".into(),
        ));
    }

    let mut map = ScribbleMap::new(h, w);
    for r in 0..h {
        for c in 0..w {
            let label = match (foreground.get(r, c), background.get(r, c)) {
                (true, false) => Scribble::Foreground,
                (false, true) => Scribble::Background,
                _ => Scribble::Unknown,
            };
            map.set(r, c, label);
        }
    }
    map.require_both_classes()?;
    Ok(map)
}
