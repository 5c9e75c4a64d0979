//! Shared domain types.
//!
//! Pixel coordinates follow the usual homography ground-truth convention:
//! `x` is the column, `y` the row, zero-based, with the origin at the
//! centre of the top-left pixel. A cell of a layer-`k` feature grid covers
//! an `s×s` pixel footprint with `s = 2^(k-1)`.

use serde::{Deserialize, Serialize};

use crate::{DfmError, Result};

/// Deepest pyramid layer.
pub const NUM_LAYERS: u8 = 5;

/// Pixel spacing between adjacent cells of a layer-`layer` grid.
#[inline]
pub fn stride_of(layer: u8) -> usize {
    debug_assert!((1..=NUM_LAYERS).contains(&layer));
    1usize << (layer - 1)
}

/// Decoded raster, row-major and interleaved, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(DfmError::InvalidImage(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(DfmError::InvalidImage("empty image".into()));
        }
        if data.len() != width * height * channels {
            return Err(DfmError::InvalidImage(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(DfmError::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
    }

    /// Builds a single-channel image from a closure over `(x, y)`; results are
    /// clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Rec. 601 luma; single-channel images are returned as-is.
    pub fn to_luma(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Multiplies every sample by `alpha` (which must keep values in range).
    pub fn scaled(&self, alpha: f32) -> Result<ImageBuffer> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|v| v * alpha).collect(),
        )
    }
}

/// Dense `C×H×W` activation grid of one pyramid layer, channels outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    layer: u8,
    channels: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(layer: u8, channels: usize, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if !(1..=NUM_LAYERS).contains(&layer) {
            return Err(DfmError::InvalidFeatureMap(format!("layer {layer} not in 1..=5")));
        }
        if channels == 0 || rows == 0 || cols == 0 {
            return Err(DfmError::InvalidFeatureMap("empty map".into()));
        }
        if data.len() != channels * rows * cols {
            return Err(DfmError::InvalidFeatureMap(format!(
                "data length {} != {channels}x{rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DfmError::InvalidFeatureMap("non-finite activation".into()));
        }
        Ok(Self {
            layer,
            channels,
            rows,
            cols,
            data,
        })
    }

    pub fn layer(&self) -> u8 {
        self.layer
    }

    pub fn stride(&self) -> usize {
        stride_of(self.layer)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// One channel plane, row-major.
    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.rows * self.cols;
        &self.data[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.rows + row) * self.cols + col]
    }

    /// Copies the channel fiber at `(row, col)` into `out`.
    pub fn fiber_into(&self, row: usize, col: usize, out: &mut [f32]) {
        let n = self.rows * self.cols;
        let offset = row * self.cols + col;
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            *o = self.data[c * n + offset];
        }
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.layer == self.layer && p.row < self.rows && p.col < self.cols
    }

    /// Every cell of the grid in row-major order.
    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.rows).flat_map(move |row| (0..self.cols).map(move |col| GridPoint::new(self.layer, row, col)))
    }
}

/// Layers 1..=5 plus the terminal map used by Stage-0.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    layers: Vec<FeatureMap>,
    terminal: FeatureMap,
    source_width: usize,
    source_height: usize,
}

impl FeaturePyramid {
    /// `layers[k-1]` must be the layer-`k` map; dims are checked against the
    /// size law `dims(k) = source / 2^(k-1)`.
    pub fn new(
        layers: Vec<FeatureMap>,
        terminal: FeatureMap,
        source_width: usize,
        source_height: usize,
    ) -> Result<Self> {
        if layers.len() != NUM_LAYERS as usize {
            return Err(DfmError::InvalidFeatureMap(format!(
                "expected 5 layers, got {}",
                layers.len()
            )));
        }
        for (i, map) in layers.iter().enumerate() {
            let layer = i as u8 + 1;
            if map.layer != layer {
                return Err(DfmError::LayerMismatch {
                    expected: layer,
                    found: map.layer,
                });
            }
            check_size_law(&format!("l{layer}"), map, source_width, source_height)?;
        }
        if terminal.layer != NUM_LAYERS {
            return Err(DfmError::LayerMismatch {
                expected: NUM_LAYERS,
                found: terminal.layer,
            });
        }
        check_size_law("terminal", &terminal, source_width, source_height)?;
        Ok(Self {
            layers,
            terminal,
            source_width,
            source_height,
        })
    }

    pub fn layer(&self, layer: u8) -> &FeatureMap {
        &self.layers[layer as usize - 1]
    }

    pub fn layers(&self) -> &[FeatureMap] {
        &self.layers
    }

    pub fn terminal(&self) -> &FeatureMap {
        &self.terminal
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }
}

pub(crate) fn check_size_law(name: &str, map: &FeatureMap, width: usize, height: usize) -> Result<()> {
    let s = map.stride();
    let expected = (width / s, height / s);
    let found = (map.cols, map.rows);
    if !width.is_multiple_of(s) || !height.is_multiple_of(s) || expected != found {
        return Err(DfmError::DimMismatch {
            layer: name.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Cell index on a layer grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPoint {
    pub row: usize,
    pub col: usize,
    pub layer: u8,
}

impl GridPoint {
    pub const fn new(layer: u8, row: usize, col: usize) -> Self {
        Self { row, col, layer }
    }
}

/// Centre of the cell's pixel footprint: `x = col·s + (s-1)/2`.
pub fn grid_to_pixel(p: GridPoint) -> (f64, f64) {
    let s = stride_of(p.layer) as f64;
    let offset = (s - 1.0) / 2.0;
    (p.col as f64 * s + offset, p.row as f64 * s + offset)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridMatch {
    pub a: GridPoint,
    pub b: GridPoint,
}

/// Duplicate-free set of grid matches at one layer, kept sorted by
/// `(rowA, colA, rowB, colB)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchSet {
    layer: u8,
    matches: Vec<GridMatch>,
}

impl MatchSet {
    pub fn empty(layer: u8) -> Self {
        Self {
            layer,
            matches: Vec::new(),
        }
    }

    pub fn new(layer: u8, mut matches: Vec<GridMatch>) -> Result<Self> {
        if let Some(m) = matches.iter().find(|m| m.a.layer != layer || m.b.layer != layer) {
            return Err(DfmError::InvalidMatchSet(format!(
                "match {m:?} is not at layer {layer}"
            )));
        }
        matches.sort_unstable();
        matches.dedup();
        Ok(Self { layer, matches })
    }

    pub fn layer(&self) -> u8 {
        self.layer
    }

    pub fn matches(&self) -> &[GridMatch] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn contains(&self, m: &GridMatch) -> bool {
        self.matches.binary_search(m).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GridMatch> {
        self.matches.iter()
    }

    /// Same matches with the A and B endpoints exchanged.
    pub fn swapped(&self) -> MatchSet {
        let mut matches: Vec<_> = self.matches.iter().map(|m| GridMatch { a: m.b, b: m.a }).collect();
        matches.sort_unstable();
        MatchSet {
            layer: self.layer,
            matches,
        }
    }

    /// Lifts both endpoints to pixel coordinates with [`grid_to_pixel`].
    pub fn to_pixels(&self) -> Vec<PixelMatch> {
        self.matches
            .iter()
            .map(|m| {
                let (xa, ya) = grid_to_pixel(m.a);
                let (xb, yb) = grid_to_pixel(m.b);
                PixelMatch { xa, ya, xb, yb }
            })
            .collect()
    }
}

impl<'a> IntoIterator for &'a MatchSet {
    type Item = &'a GridMatch;
    type IntoIter = std::slice::Iter<'a, GridMatch>;

    fn into_iter(self) -> Self::IntoIter {
        self.matches.iter()
    }
}

/// Correspondence in continuous pixel coordinates of the two images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelMatch {
    pub xa: f64,
    pub ya: f64,
    pub xb: f64,
    pub yb: f64,
}

impl PixelMatch {
    pub const fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        Self { xa, ya, xb, yb }
    }

    pub fn swapped(&self) -> PixelMatch {
        PixelMatch::new(self.xb, self.yb, self.xa, self.ya)
    }
}

/// True when `(x, y)` lies within `[-0.5, dim - 0.5]` on both axes.
pub fn in_extent(x: f64, y: f64, width: usize, height: usize) -> bool {
    x.is_finite() && y.is_finite() && x >= -0.5 && y >= -0.5 && x <= width as f64 - 0.5 && y <= height as f64 - 0.5
}
