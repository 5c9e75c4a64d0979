//! Seeded convolutional pyramid.
//!
//! Each level is a 3×3 convolution (stride 1, zero padding, no bias)
//! followed by ReLU; its output is the layer map. A 2×2 max-pool of that map
//! feeds the next level. The terminal map is one more 3×3 conv + ReLU on
//! the layer-5 map at the same resolution. The input is the luma of the
//! padded image.
//!
//! Weights come from one [`SplitMix64`] stream seeded with the extractor
//! seed, consumed level by level (layers 1..5, then terminal). Within a
//! level the order is output channel, input channel, kernel row, kernel
//! column. Each draw `u` becomes `u - 0.5`; every output filter is then
//! scaled to unit l2 norm and stored as `f32`.
//!
//! Because every stage is translation equivariant and the pools are
//! aligned, shifting the input by `2^(k-1)·m` pixels shifts the layer-`k`
//! map by `m` cells away from the borders.

use rayon::prelude::*;

use crate::rng::SplitMix64;
use crate::types::NUM_LAYERS;
use crate::{DfmError, FeatureMap, FeaturePyramid, ImageBuffer, Result};

/// Output channels of layers 1..5; the terminal map has as many as layer 5.
pub const BUILTIN_CHANNELS: [usize; 5] = [8, 16, 32, 64, 64];

struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    /// `[out][in][3][3]`
    weights: Vec<f32>,
}

impl ConvLayer {
    fn seeded(rng: &mut SplitMix64, in_channels: usize, out_channels: usize) -> Self {
        let per_filter = in_channels * 9;
        let mut weights = Vec::with_capacity(out_channels * per_filter);
        for _ in 0..out_channels {
            let filter: Vec<f64> = (0..per_filter).map(|_| rng.next_f64() - 0.5).collect();
            let norm = filter.iter().map(|w| w * w).sum::<f64>().sqrt();
            weights.extend(filter.iter().map(|w| (w / norm) as f32));
        }
        Self {
            in_channels,
            out_channels,
            weights,
        }
    }

    /// Conv + ReLU over `in_channels` planes of `rows×cols`.
    fn forward(&self, input: &[f32], rows: usize, cols: usize) -> Vec<f32> {
        let n = rows * cols;
        debug_assert_eq!(input.len(), self.in_channels * n);
        let mut out = vec![0.0f32; self.out_channels * n];
        out.par_chunks_mut(n).enumerate().for_each(|(co, plane)| {
            let filter = &self.weights[co * self.in_channels * 9..(co + 1) * self.in_channels * 9];
            for ci in 0..self.in_channels {
                let src = &input[ci * n..(ci + 1) * n];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let w = filter[ci * 9 + ky * 3 + kx];
                        accumulate_shifted(plane, src, rows, cols, ky as isize - 1, kx as isize - 1, w);
                    }
                }
            }
            for v in plane.iter_mut() {
                *v = v.max(0.0);
            }
        });
        out
    }
}

/// `plane[y][x] += w * src[y+dy][x+dx]` wherever the source is in bounds.
#[inline]
fn accumulate_shifted(plane: &mut [f32], src: &[f32], rows: usize, cols: usize, dy: isize, dx: isize, w: f32) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (rows as isize - dy.max(0)) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (cols as isize - dx.max(0)) as usize;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let out_row = &mut plane[y * cols + x0..y * cols + x1];
        let sx0 = (x0 as isize + dx) as usize;
        let src_row = &src[sy * cols + sx0..sy * cols + sx0 + (x1 - x0)];
        for (o, s) in out_row.iter_mut().zip(src_row) {
            *o += w * s;
        }
    }
}

fn max_pool_2x2(input: &[f32], channels: usize, rows: usize, cols: usize) -> Vec<f32> {
    let (pr, pc) = (rows / 2, cols / 2);
    let mut out = vec![0.0f32; channels * pr * pc];
    out.par_chunks_mut(pr * pc).enumerate().for_each(|(c, plane)| {
        let src = &input[c * rows * cols..(c + 1) * rows * cols];
        for y in 0..pr {
            let r0 = &src[2 * y * cols..(2 * y + 1) * cols];
            let r1 = &src[(2 * y + 1) * cols..(2 * y + 2) * cols];
            for x in 0..pc {
                plane[y * pc + x] = r0[2 * x].max(r0[2 * x + 1]).max(r1[2 * x].max(r1[2 * x + 1]));
            }
        }
    });
    out
}

pub struct BuiltinExtractor {
    levels: Vec<ConvLayer>,
    terminal: ConvLayer,
}

impl BuiltinExtractor {
    pub fn new(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut levels = Vec::with_capacity(NUM_LAYERS as usize);
        let mut in_channels = 1;
        for &out in &BUILTIN_CHANNELS {
            levels.push(ConvLayer::seeded(&mut rng, in_channels, out));
            in_channels = out;
        }
        let terminal = ConvLayer::seeded(&mut rng, in_channels, in_channels);
        Self { levels, terminal }
    }

    /// Filter weights of layer `layer` (1..=5), or of the terminal conv for
    /// `layer = 6`, in `[out][in][3][3]` order.
    pub fn weights(&self, layer: usize) -> &[f32] {
        if layer == NUM_LAYERS as usize + 1 {
            &self.terminal.weights
        } else {
            &self.levels[layer - 1].weights
        }
    }

    /// Expects an already padded image (dims multiples of 16).
    pub fn extract(&self, image: &ImageBuffer) -> Result<FeaturePyramid> {
        let (width, height) = (image.width(), image.height());
        if width % 16 != 0 || height % 16 != 0 {
            return Err(DfmError::InvalidImage(format!(
                "{width}x{height} is not padded to a multiple of 16"
            )));
        }
        let luma = image.to_luma();
        let mut input = luma.data().to_vec();
        let (mut rows, mut cols) = (height, width);
        let mut maps = Vec::with_capacity(NUM_LAYERS as usize);
        for (i, level) in self.levels.iter().enumerate() {
            if i > 0 {
                input = max_pool_2x2(&input, level.in_channels, rows, cols);
                rows /= 2;
                cols /= 2;
            }
            let out = level.forward(&input, rows, cols);
            maps.push(FeatureMap::new(
                i as u8 + 1,
                level.out_channels,
                rows,
                cols,
                out.clone(),
            )?);
            input = out;
        }
        let terminal_data = self.terminal.forward(&input, rows, cols);
        let terminal = FeatureMap::new(NUM_LAYERS, self.terminal.out_channels, rows, cols, terminal_data)?;
        FeaturePyramid::new(maps, terminal, width, height)
    }
}
