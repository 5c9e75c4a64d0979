#![allow(dead_code)]

use dfm::{FeatureMap, FeaturePyramid, GridMatch, GridPoint, MatchSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index of the nearest candidate (lowest index on ties), best and
/// second-best true distances.
fn nearest(q: &[f64], cands: &[Vec<f64>]) -> (usize, f64, f64) {
    let d: Vec<f64> = cands.iter().map(|c| l2(q, c)).collect();
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v < d[best] {
            best = i;
        }
    }
    let second = d
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    (best, d[best], second)
}

fn ratio(d1: f64, d2: f64) -> f64 {
    if d2 == f64::INFINITY {
        0.0
    } else if d2 == 0.0 {
        1.0
    } else {
        d1 / d2
    }
}

/// Naive mutual nearest neighbours with a two-sided ratio test over raw
/// (unnormalized) descriptors.
pub fn brute_dnns(a: &[Vec<f64>], b: &[Vec<f64>], r: f64) -> Vec<(usize, usize)> {
    let a: Vec<Vec<f64>> = a.iter().map(|v| normalize(v)).collect();
    let b: Vec<Vec<f64>> = b.iter().map(|v| normalize(v)).collect();
    let mut out = Vec::new();
    for (i, q) in a.iter().enumerate() {
        let (j, d1, d2) = nearest(q, &b);
        let (back, e1, e2) = nearest(&b[j], &a);
        if back == i && ratio(d1, d2) <= r && ratio(e1, e2) <= r {
            out.push((i, j));
        }
    }
    out
}

pub fn fiber(map: &FeatureMap, p: GridPoint) -> Vec<f64> {
    (0..map.channels()).map(|c| map.get(c, p.row, p.col) as f64).collect()
}

pub fn all_points(map: &FeatureMap) -> Vec<GridPoint> {
    let mut pts = Vec::new();
    for row in 0..map.rows() {
        for col in 0..map.cols() {
            pts.push(GridPoint::new(map.layer(), row, col));
        }
    }
    pts
}

/// Brute-force DNNS between two point lists of two maps.
pub fn brute_dnns_points(
    fa: &FeatureMap,
    pa: &[GridPoint],
    fb: &FeatureMap,
    pb: &[GridPoint],
    r: f64,
) -> Vec<GridMatch> {
    let da: Vec<Vec<f64>> = pa.iter().map(|&p| fiber(fa, p)).collect();
    let db: Vec<Vec<f64>> = pb.iter().map(|&p| fiber(fb, p)).collect();
    brute_dnns(&da, &db, r)
        .into_iter()
        .map(|(i, j)| GridMatch { a: pa[i], b: pb[j] })
        .collect()
}

/// Rectified Gaussian activations with occasional all-zero and duplicated
/// fibers, so ties and the 0/0 rule are exercised.
pub fn random_map(rng: &mut ChaCha8Rng, layer: u8, channels: usize, rows: usize, cols: usize) -> FeatureMap {
    let mut fibers: Vec<Vec<f32>> = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let roll: f64 = rng.random();
        let f = if roll < 0.03 {
            vec![0.0; channels]
        } else if roll < 0.08 && !fibers.is_empty() {
            fibers[rng.random_range(0..fibers.len())].clone()
        } else {
            (0..channels)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(rng);
                    v.max(0.0) as f32 * 2.5
                })
                .collect()
        };
        fibers.push(f);
    }
    let mut data = vec![0.0f32; channels * rows * cols];
    for (i, f) in fibers.iter().enumerate() {
        for (c, v) in f.iter().enumerate() {
            data[c * rows * cols + i] = *v;
        }
    }
    FeatureMap::new(layer, channels, rows, cols, data).unwrap()
}

/// Random pyramid whose layer 5 is `rows5×cols5`.
pub fn random_pyramid(rng: &mut ChaCha8Rng, rows5: usize, cols5: usize, channels: usize) -> FeaturePyramid {
    let layers = (1..=5u8)
        .map(|k| {
            let s = 1usize << (5 - k);
            random_map(rng, k, channels, rows5 * s, cols5 * s)
        })
        .collect();
    let terminal = random_map(rng, 5, channels, rows5, cols5);
    FeaturePyramid::new(layers, terminal, cols5 * 16, rows5 * 16).unwrap()
}

/// 2x2 window of a layer-`n` cell at layer `n-1`, clipped.
pub fn window(p: GridPoint, rows: usize, cols: usize) -> Vec<GridPoint> {
    let mut w = Vec::new();
    for dr in 0..2 {
        for dc in 0..2 {
            let (r, c) = (2 * p.row + dr, 2 * p.col + dc);
            if r < rows && c < cols {
                w.push(GridPoint::new(p.layer - 1, r, c));
            }
        }
    }
    w
}

/// Per-window brute-force oracle for one refinement step.
pub fn brute_hra(fa: &FeatureMap, fb: &FeatureMap, parents: &MatchSet, r: f64) -> Vec<GridMatch> {
    let mut out = Vec::new();
    for m in parents {
        let wa = window(m.a, fa.rows(), fa.cols());
        let wb = window(m.b, fb.rows(), fb.cols());
        if !wa.is_empty() && !wb.is_empty() {
            out.extend(brute_dnns_points(fa, &wa, fb, &wb, r));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Random parents: distinct layer-`n` cell pairs.
pub fn random_parents(rng: &mut ChaCha8Rng, layer: u8, rows: usize, cols: usize, count: usize) -> MatchSet {
    let pick = |rng: &mut ChaCha8Rng| GridPoint::new(layer, rng.random_range(0..rows), rng.random_range(0..cols));
    let matches = (0..count)
        .map(|_| GridMatch {
            a: pick(rng),
            b: pick(rng),
        })
        .collect();
    MatchSet::new(layer, matches).unwrap()
}

/// True when child `c` sits in the windows of parent `p` on both sides.
pub fn is_child_of(c: &GridMatch, p: &GridMatch) -> bool {
    c.a.row / 2 == p.a.row && c.a.col / 2 == p.a.col && c.b.row / 2 == p.b.row && c.b.col / 2 == p.b.col
}

/// Well-conditioned homography on a 640x480 frame: similarity about the
/// centre plus mild perspective.
pub fn random_homography(rng: &mut ChaCha8Rng) -> dfm::Homography {
    let sim = dfm::Homography::similarity(
        rng.random_range(-0.3..0.3),
        rng.random_range(0.8..1.2),
        320.0,
        240.0,
        rng.random_range(-40.0..40.0),
        rng.random_range(-40.0..40.0),
    )
    .unwrap();
    let persp = dfm::Homography::from_rows([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [rng.random_range(-1e-4..1e-4), rng.random_range(-1e-4..1e-4), 1.0],
    ])
    .unwrap();
    persp.then(&sim).unwrap()
}

/// 60 inliers of a random H with Gaussian noise (sigma 0.5 px) followed by
/// 40 uniform outliers, all in a 640x480 frame.
pub fn planted_matches(seed: u64) -> (Vec<dfm::PixelMatch>, dfm::Homography) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let h = random_homography(&mut rng);
    let noise = rand_distr::Normal::new(0.0, 0.5).unwrap();
    let mut matches = Vec::with_capacity(100);
    for _ in 0..60 {
        let (x, y) = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        let (u, v) = h.apply(x, y).unwrap();
        matches.push(dfm::PixelMatch::new(
            x,
            y,
            u + noise.sample(&mut rng),
            v + noise.sample(&mut rng),
        ));
    }
    for _ in 0..40 {
        matches.push(dfm::PixelMatch::new(
            rng.random_range(0.0..640.0),
            rng.random_range(0.0..480.0),
            rng.random_range(0.0..640.0),
            rng.random_range(0.0..480.0),
        ));
    }
    (matches, h)
}
