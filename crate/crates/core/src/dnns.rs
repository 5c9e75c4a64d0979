//! Dense nearest neighbour search (DNNS).
//!
//! Every descriptor of one view is compared against every descriptor of
//! the other under l2 distance. A pair `(a, b)` is kept when `b` is the
//! nearest neighbour of `a`, `a` is the nearest neighbour of `b`, and both
//! directions pass the ratio test `d1/d2 ≤ r`.
//!
//! Descriptors are l2-normalized on construction of a [`DescriptorView`]
//! (zero fibers stay zero), so the result is invariant to a positive
//! rescaling of either feature map. Distances are compared in squared form
//! and the ratio test is evaluated as `d1² ≤ r²·d2²`, which is equivalent.
//! `d1/∞` counts as 0, and the fully ambiguous `0/0` counts as 1.
//!
//! The full search walks the distance matrix in tiles of
//! [`QUERY_TILE`]×[`CANDIDATE_TILE`] entries, so memory stays bounded for
//! large grids while the result is identical to the naive scan (ties go to
//! the lowest candidate index).

use rayon::prelude::*;

use crate::{DfmError, FeatureMap, GridMatch, GridPoint, MatchSet, Result};

pub const QUERY_TILE: usize = 64;
pub const CANDIDATE_TILE: usize = 256;
/// Below this many distance evaluations the search stays on one thread.
const PARALLEL_WORK: usize = 1 << 16;

/// Ratio-test threshold in `(0, 1]`; 1.0 disables the test.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct RatioThreshold(f64);

impl RatioThreshold {
    pub const DISABLED: RatioThreshold = RatioThreshold(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(DfmError::InvalidRatio(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Ratio test on squared distances.
    #[inline]
    pub fn passes(self, best_sq: f64, second_sq: f64) -> bool {
        if second_sq == f64::INFINITY {
            true
        } else if second_sq == 0.0 {
            self.0 >= 1.0
        } else {
            best_sq <= self.0 * self.0 * second_sq
        }
    }
}

/// Normalized descriptors for a list of grid cells.
#[derive(Clone, Debug)]
pub struct DescriptorView {
    points: Vec<GridPoint>,
    channels: usize,
    /// `points.len() × channels`, row per point.
    data: Vec<f64>,
    sq_norms: Vec<f64>,
}

impl DescriptorView {
    /// Every cell of `map`, row-major.
    pub fn full(map: &FeatureMap) -> Self {
        let points: Vec<_> = map.points().collect();
        Self::gather(map, points)
    }

    /// The cells in `points`, in the given order.
    pub fn from_points(map: &FeatureMap, points: Vec<GridPoint>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !map.contains(**p)) {
            return Err(DfmError::InvalidMatchSet(format!(
                "{p:?} outside the {}x{} layer-{} map",
                map.rows(),
                map.cols(),
                map.layer()
            )));
        }
        Ok(Self::gather(map, points))
    }

    /// Free-standing descriptors, addressed as layer-1 cells `(0, i)`.
    pub fn from_descriptors(descriptors: &[Vec<f64>]) -> Result<Self> {
        let channels = descriptors.first().map_or(0, Vec::len);
        if descriptors.iter().any(|d| d.len() != channels) {
            return Err(DfmError::ChannelMismatch {
                a: channels,
                b: descriptors.iter().map(Vec::len).find(|&l| l != channels).unwrap(),
            });
        }
        let mut view = Self {
            points: (0..descriptors.len()).map(|i| GridPoint::new(1, 0, i)).collect(),
            channels,
            data: descriptors.concat(),
            sq_norms: Vec::new(),
        };
        view.normalize();
        Ok(view)
    }

    fn gather(map: &FeatureMap, points: Vec<GridPoint>) -> Self {
        let channels = map.channels();
        let mut data = vec![0.0f64; points.len() * channels];
        let plane = map.rows() * map.cols();
        let raw = map.data();
        for (p, row) in points.iter().zip(data.chunks_exact_mut(channels)) {
            let offset = p.row * map.cols() + p.col;
            for (c, v) in row.iter_mut().enumerate() {
                *v = raw[c * plane + offset] as f64;
            }
        }
        let mut view = Self {
            points,
            channels,
            data,
            sq_norms: Vec::new(),
        };
        view.normalize();
        view
    }

    fn normalize(&mut self) {
        let channels = self.channels.max(1);
        self.sq_norms = self
            .data
            .chunks_exact_mut(channels)
            .map(|row| {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
                row.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// Normalized descriptor of the `i`-th point.
    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }
}

/// Best and second-best candidate for one query (true l2 distances).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub dist: f64,
    pub second_dist: f64,
}

/// Running best-two in squared distance.
#[derive(Clone, Copy, Debug)]
struct BestTwo {
    index: usize,
    best_sq: f64,
    second_sq: f64,
}

impl BestTwo {
    const EMPTY: BestTwo = BestTwo {
        index: usize::MAX,
        best_sq: f64::INFINITY,
        second_sq: f64::INFINITY,
    };

    /// Candidates must be offered in increasing index order.
    #[inline]
    fn offer(&mut self, index: usize, d: f64) {
        if d < self.best_sq {
            self.second_sq = self.best_sq;
            self.best_sq = d;
            self.index = index;
        } else if d < self.second_sq {
            self.second_sq = d;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn squared_distance(qn: f64, cn: f64, dot: f64) -> f64 {
    (qn + cn - 2.0 * dot).max(0.0)
}

/// Best two candidates for each query in `queries[range]`.
fn best_two_block(queries: &DescriptorView, start: usize, end: usize, candidates: &DescriptorView) -> Vec<BestTwo> {
    let mut best = vec![BestTwo::EMPTY; end - start];
    let mut tile = vec![0.0f64; (end - start) * CANDIDATE_TILE];
    for c0 in (0..candidates.len()).step_by(CANDIDATE_TILE) {
        let c1 = (c0 + CANDIDATE_TILE).min(candidates.len());
        let width = c1 - c0;
        for (qi, row) in (start..end).zip(tile.chunks_exact_mut(CANDIDATE_TILE)) {
            let q = queries.descriptor(qi);
            for (ci, slot) in (c0..c1).zip(row.iter_mut()) {
                *slot = dot(q, candidates.descriptor(ci));
            }
        }
        for (k, qi) in (start..end).enumerate() {
            let qn = queries.sq_norms[qi];
            let row = &tile[k * CANDIDATE_TILE..k * CANDIDATE_TILE + width];
            for (j, &d) in row.iter().enumerate() {
                let ci = c0 + j;
                best[k].offer(ci, squared_distance(qn, candidates.sq_norms[ci], d));
            }
        }
    }
    best
}

fn best_two_all(queries: &DescriptorView, candidates: &DescriptorView) -> Vec<BestTwo> {
    let n = queries.len();
    let blocks: Vec<usize> = (0..n).step_by(QUERY_TILE).collect();
    let run = |&start: &usize| best_two_block(queries, start, (start + QUERY_TILE).min(n), candidates);
    let parts: Vec<Vec<BestTwo>> = if n * candidates.len() >= PARALLEL_WORK {
        blocks.par_iter().map(run).collect()
    } else {
        blocks.iter().map(run).collect()
    };
    parts.concat()
}

/// Nearest and second-nearest candidate to an already normalized `query`.
pub fn nearest_two(query: &[f64], candidates: &DescriptorView) -> Result<Nearest> {
    if candidates.is_empty() {
        return Err(DfmError::EmptyCandidates);
    }
    if query.len() != candidates.channels {
        return Err(DfmError::ChannelMismatch {
            a: query.len(),
            b: candidates.channels,
        });
    }
    let qn = dot(query, query);
    let mut best = BestTwo::EMPTY;
    for i in 0..candidates.len() {
        best.offer(
            i,
            squared_distance(qn, candidates.sq_norms[i], dot(query, candidates.descriptor(i))),
        );
    }
    Ok(Nearest {
        index: best.index,
        dist: best.best_sq.sqrt(),
        second_dist: best.second_sq.sqrt(),
    })
}

/// Mutual nearest neighbours of `a` and `b` passing the ratio test in both
/// directions. Endpoints carry the views' grid points.
pub fn dnns(a: &DescriptorView, b: &DescriptorView, ratio: RatioThreshold) -> Result<MatchSet> {
    if a.channels != b.channels {
        return Err(DfmError::ChannelMismatch {
            a: a.channels,
            b: b.channels,
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(DfmError::EmptyCandidates);
    }
    let layer = a.points[0].layer;
    if let Some(p) = a.points.iter().chain(&b.points).find(|p| p.layer != layer) {
        return Err(DfmError::LayerMismatch {
            expected: layer,
            found: p.layer,
        });
    }
    let ab = best_two_all(a, b);
    let ba = best_two_all(b, a);
    let matches = ab
        .iter()
        .enumerate()
        .filter_map(|(i, fwd)| {
            let bwd = &ba[fwd.index];
            (bwd.index == i && ratio.passes(fwd.best_sq, fwd.second_sq) && ratio.passes(bwd.best_sq, bwd.second_sq))
                .then(|| GridMatch {
                    a: a.points[i],
                    b: b.points[fwd.index],
                })
        })
        .collect();
    MatchSet::new(layer, matches)
}

/// DNNS over two complete feature maps.
pub fn dnns_maps(a: &FeatureMap, b: &FeatureMap, ratio: RatioThreshold) -> Result<MatchSet> {
    if a.layer() != b.layer() {
        return Err(DfmError::LayerMismatch {
            expected: a.layer(),
            found: b.layer(),
        });
    }
    dnns(&DescriptorView::full(a), &DescriptorView::full(b), ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(d: &[&[f64]]) -> DescriptorView {
        DescriptorView::from_descriptors(&d.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn pairs(set: &MatchSet) -> Vec<(usize, usize)> {
        set.iter().map(|m| (m.a.col, m.b.col)).collect()
    }

    #[test]
    fn nearest_two_examples() {
        let s2 = 2f64.sqrt();
        let n = nearest_two(&[1.0, 0.0], &view(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!((n.index, n.dist), (0, 0.0));
        assert!((n.second_dist - s2).abs() < 1e-15);

        let n = nearest_two(&[1.0, 0.0], &view(&[&[1.0, 0.0]])).unwrap();
        assert_eq!((n.index, n.dist, n.second_dist), (0, 0.0, f64::INFINITY));

        let n = nearest_two(&[1.0, 0.0], &view(&[&[0.0, 1.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(n.index, 0);
        assert!((n.dist - s2).abs() < 1e-15 && (n.second_dist - s2).abs() < 1e-15);
        assert_eq!(n.dist, n.second_dist);
    }

    #[test]
    fn nearest_two_errors() {
        let empty = DescriptorView::from_descriptors(&[]).unwrap();
        assert!(matches!(nearest_two(&[1.0], &empty), Err(DfmError::EmptyCandidates)));
        assert!(matches!(
            nearest_two(&[1.0, 0.0, 0.0], &view(&[&[1.0, 0.0]])),
            Err(DfmError::ChannelMismatch { a: 3, b: 2 })
        ));
    }

    #[test]
    fn dnns_examples() {
        let r = RatioThreshold::new(0.9).unwrap();
        let orth = view(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(pairs(&dnns(&orth, &orth, r).unwrap()), vec![(0, 0), (1, 1)]);

        let dup = view(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert!(dnns(&orth, &dup, r).unwrap().is_empty());
        // With the test disabled the ambiguous pair survives.
        assert_eq!(
            pairs(&dnns(&orth, &dup, RatioThreshold::DISABLED).unwrap()),
            vec![(0, 0)]
        );
    }

    #[test]
    fn dnns_channel_mismatch() {
        let a = view(&[&[1.0, 0.0]]);
        let b = view(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(
            dnns(&a, &b, RatioThreshold::DISABLED),
            Err(DfmError::ChannelMismatch { a: 2, b: 3 })
        ));
    }

    #[test]
    fn ratio_threshold_domain() {
        assert!(RatioThreshold::new(0.0).is_err());
        assert!(RatioThreshold::new(1.01).is_err());
        assert!(RatioThreshold::new(f64::NAN).is_err());
        let r = RatioThreshold::new(0.5).unwrap();
        assert!(r.passes(1.0, 4.0));
        assert!(!r.passes(1.01, 4.0));
        assert!(r.passes(3.0, f64::INFINITY));
        assert!(!r.passes(0.0, 0.0));
        assert!(RatioThreshold::DISABLED.passes(0.0, 0.0));
    }

    #[test]
    fn zero_descriptors_stay_zero() {
        let v = view(&[&[0.0, 0.0], &[3.0, 4.0]]);
        assert_eq!(v.descriptor(0), &[0.0, 0.0]);
        assert_eq!(v.descriptor(1), &[0.6, 0.8]);
    }

    #[test]
    fn tiles_span_several_candidate_blocks() {
        // 600 candidates crosses the 256-wide tile boundary twice.
        let cands: Vec<Vec<f64>> = (0..600)
            .map(|i| vec![(i as f64 * 0.01).cos(), (i as f64 * 0.01).sin()])
            .collect();
        let v = DescriptorView::from_descriptors(&cands).unwrap();
        for target in [0usize, 255, 256, 511, 599] {
            let n = nearest_two(v.descriptor(target), &v).unwrap();
            assert_eq!(n.index, target);
            let tiled = best_two_block(&v, target, target + 1, &v)[0];
            assert_eq!(tiled.index, target);
            assert_eq!(tiled.second_sq.sqrt(), n.second_dist);
        }
    }
}
