use rayon::prelude::*;

use crate::types::in_extent;
use crate::{Homography, ImageBuffer, PixelMatch, Result};

/// Bilinear sample with zero outside the raster.
#[inline]
fn sample(image: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (image.width() as isize, image.height() as isize);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            image.get(xi as usize, yi as usize, c) as f64
        }
    };
    let top = (1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0);
    let bottom = (1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1);
    (1.0 - fy) * top + fy * bottom
}

/// Inverse-mapped warp: output pixel `q` takes `image` sampled bilinearly at
/// `H⁻¹·q`; samples that fall outside `image` are zero.
pub fn warp_image(image: &ImageBuffer, h: &Homography, out_width: usize, out_height: usize) -> Result<ImageBuffer> {
    let inv = h.inverse()?;
    let c = image.channels();
    let mut data = vec![0.0f32; out_width * out_height * c];
    data.par_chunks_mut(out_width * c).enumerate().for_each(|(y, row)| {
        for x in 0..out_width {
            let Ok((sx, sy)) = inv.apply(x as f64, y as f64) else {
                continue;
            };
            if !(sx > -1.0 && sy > -1.0 && sx < image.width() as f64 && sy < image.height() as f64) {
                continue;
            }
            for ch in 0..c {
                row[x * c + ch] = (sample(image, sx, sy, ch) as f32).clamp(0.0, 1.0);
            }
        }
    });
    ImageBuffer::new(out_width, out_height, c, data)
}

/// Maps the B side of matches found against the warped image back into the
/// original B frame; matches leaving B's `width×height` extent are dropped.
pub fn backmap_matches(
    matches: &[PixelMatch],
    h_ba: &Homography,
    width: usize,
    height: usize,
) -> Result<Vec<PixelMatch>> {
    let inv = h_ba.inverse()?;
    Ok(matches
        .iter()
        .filter_map(|m| {
            let (xb, yb) = inv.apply(m.xb, m.yb).ok()?;
            in_extent(xb, yb, width, height).then_some(PixelMatch::new(m.xa, m.ya, xb, yb))
        })
        .collect())
}
