//! Procedural test imagery: textured planes and known homographies.

use std::fs;
use std::path::Path;

use crate::geometry::warp_image;
use crate::io::save_image;
use crate::rng::{mix64, SplitMix64};
use crate::{DfmError, Homography, ImageBuffer, Result};

fn lattice(seed: u64, octave: u64, ix: i64, iy: i64) -> f64 {
    let h = mix64(seed ^ mix64(octave ^ mix64((ix as u64).wrapping_mul(0x9E37_79B9) ^ (iy as u64) << 32)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(seed: u64, octave: u64, cell: f64, x: f64, y: f64) -> f64 {
    let (gx, gy) = (x / cell, y / cell);
    let (ix, iy) = (gx.floor(), gy.floor());
    let (fx, fy) = (smoothstep(gx - ix), smoothstep(gy - iy));
    let (ix, iy) = (ix as i64, iy as i64);
    let v = |dx, dy| lattice(seed, octave, ix + dx, iy + dy);
    let top = v(0, 0) * (1.0 - fx) + v(1, 0) * fx;
    let bottom = v(0, 1) * (1.0 - fx) + v(1, 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    value: f64,
    square: bool,
}

/// Grey texture mixing multi-octave value noise with randomly placed
/// ellipses and rectangles, so every region carries both smooth shading
/// and sharp corners.
pub fn texture(width: usize, height: usize, seed: u64) -> Result<ImageBuffer> {
    let mut rng = SplitMix64::new(seed);
    let area = (width * height) as f64;
    let count = (area / 900.0).ceil() as usize;
    let blobs: Vec<Blob> = (0..count)
        .map(|_| Blob {
            cx: rng.next_f64() * width as f64,
            cy: rng.next_f64() * height as f64,
            rx: 3.0 + rng.next_f64() * 22.0,
            ry: 3.0 + rng.next_f64() * 22.0,
            angle: rng.next_f64() * std::f64::consts::PI,
            value: rng.next_f64(),
            square: rng.next_u64().is_multiple_of(2),
        })
        .collect();
    let octaves = [
        (64.0, 0.3),
        (24.0, 0.25),
        (9.0, 0.2),
        (4.0, 0.15),
        (2.0, 0.1),
        (1.0, 0.08),
    ];
    let mut raw = vec![0.0f64; width * height];
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64, y as f64);
            let noise: f64 = octaves
                .iter()
                .enumerate()
                .map(|(o, &(cell, amp))| amp * value_noise(seed, o as u64, cell, px, py))
                .sum();
            let mut v = noise;
            for b in &blobs {
                let (dx, dy) = (px - b.cx, py - b.cy);
                if dx.abs() > 32.0 || dy.abs() > 32.0 {
                    continue;
                }
                let (s, c) = b.angle.sin_cos();
                let (u, w) = ((c * dx + s * dy) / b.rx, (-s * dx + c * dy) / b.ry);
                let inside = if b.square {
                    u.abs() <= 1.0 && w.abs() <= 1.0
                } else {
                    u * u + w * w <= 1.0
                };
                if inside {
                    v = 0.5 * v + 0.5 * b.value;
                }
            }
            raw[y * width + x] = v;
        }
    }
    let (lo, hi) = raw.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let span = (hi - lo).max(1e-12);
    ImageBuffer::new(width, height, 1, raw.iter().map(|v| ((v - lo) / span) as f32).collect())
}

/// Random homography around the image centre: rotation up to
/// `max_angle` radians, isotropic scale in `[min_scale, max_scale]`,
/// translation up to `max_shift` pixels per axis.
pub fn random_similarity(
    rng: &mut SplitMix64,
    width: usize,
    height: usize,
    max_angle: f64,
    (min_scale, max_scale): (f64, f64),
    max_shift: f64,
) -> Result<Homography> {
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_f64();
    let angle = uniform(-max_angle, max_angle);
    let scale = uniform(min_scale, max_scale);
    let tx = uniform(-max_shift, max_shift);
    let ty = uniform(-max_shift, max_shift);
    Homography::similarity(
        angle,
        scale,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        tx,
        ty,
    )
}

/// Renders the view of `reference` under `h_ab` (A pixel → B pixel).
pub fn warped_view(reference: &ImageBuffer, h_ab: &Homography) -> Result<ImageBuffer> {
    warp_image(reference, h_ab, reference.width(), reference.height())
}

/// Adds zero-mean Gaussian noise (Box–Muller on the SplitMix stream),
/// clamping into `[0, 1]`.
pub fn add_noise(image: &ImageBuffer, sigma: f64, seed: u64) -> Result<ImageBuffer> {
    let mut rng = SplitMix64::new(seed);
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let u1 = rng.next_f64().max(f64::MIN_POSITIVE);
            let u2 = rng.next_f64();
            let n = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            (v as f64 + sigma * n).clamp(0.0, 1.0) as f32
        })
        .collect();
    ImageBuffer::new(image.width(), image.height(), image.channels(), data)
}

/// Image `content` moved right by `dx` pixels (integer), zero-filled on the
/// left.
pub fn shift_right(content: &ImageBuffer, dx: usize) -> Result<ImageBuffer> {
    let (w, h, c) = (content.width(), content.height(), content.channels());
    let mut data = vec![0.0f32; w * h * c];
    for y in 0..h {
        for x in dx..w {
            for ch in 0..c {
                data[(y * w + x) * c + ch] = content.get(x - dx, y, ch);
            }
        }
    }
    ImageBuffer::new(w, h, c, data)
}

/// Writes a sequence directory `root/name` in the HPatches layout:
/// `1.ppm` … `6.ppm` plus `H_1_2` … `H_1_6`. Names starting with `i_` get
/// brightness changes under the identity, `v_` names get random
/// similarities.
pub fn write_sequence(root: &Path, name: &str, width: usize, height: usize, seed: u64) -> Result<()> {
    let viewpoint = match name.get(..2) {
        Some("i_") => false,
        Some("v_") => true,
        _ => {
            return Err(DfmError::Config(format!(
                "sequence name {name:?} must start with i_ or v_"
            )))
        }
    };
    let dir = root.join(name);
    fs::create_dir_all(&dir)?;
    let reference = texture(width, height, seed)?;
    save_image(&reference, dir.join("1.ppm"))?;
    let mut rng = SplitMix64::new(mix64(seed));
    for k in 2..=6u64 {
        let (h, target) = if viewpoint {
            let h = random_similarity(&mut rng, width, height, 8f64.to_radians(), (0.92, 1.08), 24.0)?;
            let view = warped_view(&reference, &h)?;
            (h, view)
        } else {
            let gain = 1.1 - 0.1 * k as f32;
            (Homography::identity(), reference.scaled(gain)?)
        };
        save_image(&add_noise(&target, 0.01, seed ^ k)?, dir.join(format!("{k}.ppm")))?;
        fs::write(dir.join(format!("H_1_{k}")), h.to_text())?;
    }
    Ok(())
}
