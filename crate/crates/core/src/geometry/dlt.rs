use nalgebra::{DMatrix, Matrix3};

use crate::{DfmError, Homography, PixelMatch, Result};

/// Relative singular-value floor below which the system is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Hartley normalization: centroid to the origin, mean distance √2.
/// Returns the normalized points and the similarity that produced them.
pub fn hartley_normalize(points: impl Iterator<Item = (f64, f64)> + Clone) -> (Vec<(f64, f64)>, Matrix3<f64>) {
    let n = points.clone().count().max(1) as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.clone().map(|(x, y)| (x - cx).hypot(y - cy)).sum::<f64>() / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    (points.map(|(x, y)| (s * (x - cx), s * (y - cy))).collect(), t)
}

/// Least-squares homography mapping the A side of `matches` onto the B side.
pub fn dlt_homography(matches: &[PixelMatch]) -> Result<Homography> {
    if matches.len() < 4 {
        return Err(DfmError::TooFewMatches(matches.len()));
    }
    let (pa, ta) = hartley_normalize(matches.iter().map(|m| (m.xa, m.ya)));
    let (pb, tb) = hartley_normalize(matches.iter().map(|m| (m.xb, m.yb)));

    // With exactly four points the system is 8x9; a zero row keeps the SVD
    // square so the null vector is available.
    let rows = (2 * matches.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (&(x, y), &(u, v))) in pa.iter().zip(&pb).enumerate() {
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(DfmError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = |k: usize| svd.singular_values[order[k]];
    if sv(7).is_nan() || sv(7) <= RANK_TOL * sv(0) {
        return Err(DfmError::DegenerateConfiguration);
    }
    let h = v_t.row(order[8]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let tb_inv = tb.try_inverse().ok_or(DfmError::DegenerateConfiguration)?;
    Homography::new(tb_inv * hn * ta).map_err(|_| DfmError::DegenerateConfiguration)
}
