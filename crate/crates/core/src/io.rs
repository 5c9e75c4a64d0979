//! Image decoding and the plain-text match / homography formats.
//!
//! Match files hold one correspondence per line, `xA yA xB yB`, separated
//! by single spaces; lines starting with `#` are comments. Homography files
//! are three rows of three numbers, the layout used by HPatches.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::{DfmError, Homography, ImageBuffer, PixelMatch, Result};

/// Decodes PNG or PNM. Grey images load with one channel, everything else
/// as RGB (alpha is dropped).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let img = image::open(path.as_ref())?;
    Ok(from_dynamic(&img))
}

pub fn from_dynamic(img: &DynamicImage) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    if color.channel_count() <= 2 {
        let g = img.to_luma8();
        ImageBuffer::new(w, h, 1, g.as_raw().iter().map(|&v| v as f32 / 255.0).collect()).expect("decoded grey image")
    } else {
        let rgb = img.to_rgb8();
        ImageBuffer::new(w, h, 3, rgb.as_raw().iter().map(|&v| v as f32 / 255.0).collect()).expect("decoded rgb image")
    }
}

pub fn to_dynamic(img: &ImageBuffer) -> DynamicImage {
    let bytes: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    if img.channels() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer size"))
    }
}

/// Encodes as 8-bit PNG (or PPM/PGM by extension).
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    to_dynamic(img).save(path.as_ref())?;
    Ok(())
}

pub fn format_matches(matches: &[PixelMatch]) -> String {
    let mut out = String::with_capacity(matches.len() * 32 + 16);
    out.push_str("# xA yA xB yB\n");
    for m in matches {
        let _ = writeln!(out, "{} {} {} {}", m.xa, m.ya, m.xb, m.yb);
    }
    out
}

pub fn parse_matches(text: &str) -> Result<Vec<PixelMatch>> {
    let mut matches = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DfmError::Parse(format!("line {}: bad number {t:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 4 {
            return Err(DfmError::Parse(format!(
                "line {}: expected 4 values, found {}",
                i + 1,
                values.len()
            )));
        }
        matches.push(PixelMatch::new(values[0], values[1], values[2], values[3]));
    }
    Ok(matches)
}

pub fn read_matches(path: impl AsRef<Path>) -> Result<Vec<PixelMatch>> {
    parse_matches(&fs::read_to_string(path)?)
}

pub fn read_homography(path: impl AsRef<Path>) -> Result<Homography> {
    fs::read_to_string(path)?.parse()
}
