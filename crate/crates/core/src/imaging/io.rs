//! Raster I/O: 8/16-bit PNG and binary PGM/PPM through the `image` crate,
//! plus little-endian PFM for real-valued debug output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageBuffer, ImageEncoder, ImageFormat, ImageReader, Luma, Rgb};

use super::{BinaryMask, Image};
use crate::error::{Error, Result};

/// Loads a PNG/PGM/PPM file, normalizing samples to `[0, 1]`.
///
/// Gray inputs give one channel, color inputs three; alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let unreadable = |reason: String| Error::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?}"))),
        None => {
            return Err(Error::UnsupportedFormat(format!(
                "unrecognized content in {}",
                path.display()
            )))
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => unreadable(other.to_string()),
    })?;
    from_dynamic(decoded)
}

fn from_dynamic(img: DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimension);
    }
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLumaA8(_) => {
            let b = img.to_luma8();
            (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect()),
        DynamicImage::ImageLumaA16(_) => {
            let b = img.to_luma16();
            (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            let b = img.to_rgb16();
            (3, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => {
            let b = img.to_rgb32f();
            (3, b.into_raw().iter().map(|&v| (v as f64).clamp(0.0, 1.0)).collect())
        }
        other => {
            let b = other.to_rgb8();
            (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect())
        }
    };
    Image::from_vec(h, w, channels, data)
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        _ => Err(Error::UnsupportedFormat(format!(
            "cannot infer raster format from {}",
            path.display()
        ))),
    }
}

fn to_dynamic8(img: &Image) -> DynamicImage {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().map(|&v| quantize8(v)).collect();
    if img.channels() == 1 {
        DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("size"))
    } else {
        DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("size"))
    }
}

/// Writes an 8-bit PNG, PGM or PPM depending on the extension.
pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let encode_err = |e: image::ImageError| Error::Io(std::io::Error::other(e.to_string()));
    match format_for(path)? {
        ImageFormat::Pnm => {
            // The encoder defaults to PAM; ask for binary PGM/PPM explicitly.
            let subtype = if img.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            let dynamic = to_dynamic8(img);
            let mut out = BufWriter::new(File::create(path)?);
            PnmEncoder::new(&mut out)
                .with_subtype(subtype)
                .write_image(dynamic.as_bytes(), dynamic.width(), dynamic.height(), dynamic.color().into())
                .map_err(encode_err)?;
            out.flush()?;
            Ok(())
        }
        format => to_dynamic8(img).save_with_format(path, format).map_err(encode_err),
    }
}

/// Writes a 16-bit PNG.
pub fn save_png16(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u16> = img.data().iter().map(|&v| quantize16(v)).collect();
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("size"))
    } else {
        DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).expect("size"))
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes a mask as an 8-bit image (255 = set).
pub fn save_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    save_image(path, &mask.to_image())
}

/// Loads a mask, treating any sample at or above one half as set.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = load_image(path)?.luma();
    BinaryMask::from_vec(
        img.height(),
        img.width(),
        img.data().iter().map(|&v| v >= 0.5).collect(),
    )
}

/// Real-valued raster stored as rows from top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

/// Writes a little-endian PFM (`Pf` for one channel, `PF` for three).
pub fn write_pfm(path: impl AsRef<Path>, pfm: &Pfm) -> Result<()> {
    let tag = match pfm.channels {
        1 => "Pf",
        3 => "PF",
        n => return Err(Error::invalid("channels", format!("PFM needs 1 or 3 channels, got {n}"))),
    };
    if pfm.data.len() != pfm.height * pfm.width * pfm.channels {
        return Err(Error::SizeMismatch("PFM payload".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "{tag}\n{} {}\n-1.0\n", pfm.width, pfm.height)?;
    let stride = pfm.width * pfm.channels;
    // PFM scanlines run bottom to top.
    for row in pfm.data.chunks_exact(stride).rev() {
        for v in row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Pfm> {
    let path = path.as_ref();
    let bad = |reason: &str| Error::Unreadable {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut reader = BufReader::new(File::open(path).map_err(|e| bad(&e.to_string()))?);
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("truncated PFM header"));
        }
        let line = line.trim();
        if !line.is_empty() {
            header.push(line.to_string());
        }
    }
    let channels = match header[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(Error::UnsupportedFormat("not a PFM file".into())),
    };
    let mut dims = header[1].split_whitespace().map(str::parse::<usize>);
    let (width, height) = match (dims.next(), dims.next()) {
        (Some(Ok(w)), Some(Ok(h))) if w > 0 && h > 0 => (w, h),
        _ => return Err(bad("bad PFM dimensions")),
    };
    let scale: f64 = header[2].parse().map_err(|_| bad("bad PFM scale"))?;
    let little = scale < 0.0;
    let n = width * height * channels;
    let mut bytes = vec![0u8; n * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| bad("truncated PFM payload"))?;
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let stride = width * channels;
    let data = values.chunks_exact(stride).rev().flatten().copied().collect();
    Ok(Pfm {
        height,
        width,
        channels,
        data,
    })
}

/// Maps `t` in `[0, 1]` to a blue-cyan-yellow-red ramp.
pub fn jet(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    let ch = |offset: f64| (1.5 - (4.0 * t - offset).abs()).clamp(0.0, 1.0);
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// False-color rendering of a scalar field; `None` samples are drawn black.
pub fn false_color(height: usize, width: usize, values: &[Option<f64>], max: f64) -> Image {
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut data = Vec::with_capacity(height * width * 3);
    for v in values {
        match v {
            Some(v) => data.extend_from_slice(&jet(v * scale)),
            None => data.extend_from_slice(&[0.0; 3]),
        }
    }
    Image::from_parts_unchecked(height, width, 3, data)
}

/// HSV flow coding: hue from direction, saturation from magnitude relative
/// to `max_magnitude`, full value.
pub fn flow_to_color(height: usize, width: usize, u: &[f64], v: &[f64], max_magnitude: f64) -> Image {
    let mut data = Vec::with_capacity(height * width * 3);
    for (du, dv) in u.iter().zip(v) {
        let mag = du.hypot(*dv);
        let sat = if max_magnitude > 0.0 { (mag / max_magnitude).min(1.0) } else { 0.0 };
        let hue = (dv.atan2(*du).to_degrees() + 360.0) % 360.0;
        data.extend_from_slice(&hsv_to_rgb(hue, sat, 1.0));
    }
    Image::from_parts_unchecked(height, width, 3, data)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}
