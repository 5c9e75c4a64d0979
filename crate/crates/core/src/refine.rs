//! Hierarchical refinement of grid matches.
//!
//! A match at layer `n` is pushed down to layer `n-1` by taking the 2×2
//! receptive window of each endpoint (`{2i, 2i+1} × {2j, 2j+1}`) and
//! running DNNS between the two windows only. Children from all parents
//! are merged into one duplicate-free set. Repeating this from layer 5 to
//! layer 1 yields pixel-resolution matches while the search stays local.

use rayon::prelude::*;

use crate::dnns::{dnns, DescriptorView, RatioThreshold};
use crate::{DfmError, FeatureMap, FeaturePyramid, GridMatch, GridPoint, MatchSet, Result};

/// Below this many parents a step runs on one thread.
const PARALLEL_PARENTS: usize = 256;

/// Ratio thresholds indexed by the layer whose matches they gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSchedule {
    by_layer: [RatioThreshold; 5],
}

impl ThresholdSchedule {
    /// `values[k-1]` gates the DNNS producing layer-`k` matches.
    pub fn new(values: [f64; 5]) -> Result<Self> {
        let mut by_layer = [RatioThreshold::DISABLED; 5];
        for (slot, v) in by_layer.iter_mut().zip(values) {
            *slot = RatioThreshold::new(v)?;
        }
        Ok(Self { by_layer })
    }

    /// `{0.6, 0.6, 0.8, 0.9, 0.95}` from layer 1 to layer 5.
    pub fn r06() -> Self {
        Self::new([0.6, 0.6, 0.8, 0.9, 0.95]).unwrap()
    }

    /// `{0.9, 0.9, 0.9, 0.9, 0.95}` from layer 1 to layer 5.
    pub fn r09() -> Self {
        Self::new([0.9, 0.9, 0.9, 0.9, 0.95]).unwrap()
    }

    pub fn for_layer(&self, layer: u8) -> RatioThreshold {
        self.by_layer[layer as usize - 1]
    }
}

/// Layer `n-1` cells under a layer-`n` cell, clipped to `rows×cols`.
pub fn receptive(p: GridPoint, rows: usize, cols: usize) -> Result<Vec<GridPoint>> {
    if p.layer <= 1 {
        return Err(DfmError::LayerUnderflow);
    }
    let layer = p.layer - 1;
    let mut window = Vec::with_capacity(4);
    for row in [2 * p.row, 2 * p.row + 1] {
        for col in [2 * p.col, 2 * p.col + 1] {
            if row < rows && col < cols {
                window.push(GridPoint::new(layer, row, col));
            }
        }
    }
    Ok(window)
}

fn refine_parent(
    fa: &FeatureMap,
    fb: &FeatureMap,
    parent: &GridMatch,
    ratio: RatioThreshold,
) -> Result<Vec<GridMatch>> {
    let wa = receptive(parent.a, fa.rows(), fa.cols())?;
    let wb = receptive(parent.b, fb.rows(), fb.cols())?;
    if wa.is_empty() || wb.is_empty() {
        return Ok(Vec::new());
    }
    let va = DescriptorView::from_points(fa, wa)?;
    let vb = DescriptorView::from_points(fb, wb)?;
    Ok(dnns(&va, &vb, ratio)?.matches().to_vec())
}

/// One refinement step: layer-`n` matches to layer-`n-1` matches, using the
/// layer-`n-1` maps of both images.
pub fn hra_step(fa: &FeatureMap, fb: &FeatureMap, matches: &MatchSet, ratio: RatioThreshold) -> Result<MatchSet> {
    let target = matches
        .layer()
        .checked_sub(1)
        .filter(|&l| l >= 1)
        .ok_or(DfmError::LayerUnderflow)?;
    for map in [fa, fb] {
        if map.layer() != target {
            return Err(DfmError::LayerMismatch {
                expected: target,
                found: map.layer(),
            });
        }
    }
    if fa.channels() != fb.channels() {
        return Err(DfmError::ChannelMismatch {
            a: fa.channels(),
            b: fb.channels(),
        });
    }
    let parents = matches.matches();
    let children: Vec<Vec<GridMatch>> = if parents.len() >= PARALLEL_PARENTS {
        parents
            .par_iter()
            .map(|p| refine_parent(fa, fb, p, ratio))
            .collect::<Result<_>>()?
    } else {
        parents
            .iter()
            .map(|p| refine_parent(fa, fb, p, ratio))
            .collect::<Result<_>>()?
    };
    MatchSet::new(target, children.concat())
}

/// Match sets for layers 5 down to 1; `initial` comes first.
pub fn refine_trace(
    pyr_a: &FeaturePyramid,
    pyr_b: &FeaturePyramid,
    initial: MatchSet,
    schedule: &ThresholdSchedule,
) -> Result<Vec<MatchSet>> {
    if initial.is_empty() {
        return Err(DfmError::EmptyInitialSet);
    }
    if initial.layer() != 5 {
        return Err(DfmError::LayerMismatch {
            expected: 5,
            found: initial.layer(),
        });
    }
    let mut trace = vec![initial];
    for layer in (1..=4u8).rev() {
        let next = hra_step(
            pyr_a.layer(layer),
            pyr_b.layer(layer),
            trace.last().unwrap(),
            schedule.for_layer(layer),
        )?;
        log::debug!("layer {layer}: {} matches", next.len());
        trace.push(next);
    }
    Ok(trace)
}

/// Refines layer-5 matches down to layer 1.
pub fn refine_full(
    pyr_a: &FeaturePyramid,
    pyr_b: &FeaturePyramid,
    initial: MatchSet,
    schedule: &ThresholdSchedule,
) -> Result<MatchSet> {
    Ok(refine_trace(pyr_a, pyr_b, initial, schedule)?.pop().unwrap())
}
