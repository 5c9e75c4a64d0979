//! MSAC homography estimation.
//!
//! Each trial draws four distinct matches, rejects the sample when any
//! three of its points are collinear on either side (triangle area below
//! [`COLLINEAR_AREA`] in Hartley-normalized coordinates), fits a DLT model
//! and scores it with `Σ min(d², t²)`, where `d` is the forward transfer
//! error `‖H·a − b‖` and `t` is `max_distance`. The trial budget adapts to
//! the best inlier ratio `w` as `log(1 − confidence) / log(1 − w⁴)`,
//! capped at `max_trials`. The best model is refit by DLT on its inliers.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dlt::{dlt_homography, hartley_normalize};
use crate::{DfmError, Homography, PixelMatch, Result};

const SAMPLE_SIZE: usize = 4;
const COLLINEAR_AREA: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsacParams {
    pub confidence: f64,
    pub max_trials: usize,
    pub max_distance: f64,
    pub seed: u64,
}

impl Default for MsacParams {
    fn default() -> Self {
        Self {
            confidence: 0.9999,
            max_trials: 5000,
            max_distance: 3.0,
            seed: 0,
        }
    }
}

impl MsacParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(DfmError::InvalidParams(format!("confidence {}", self.confidence)));
        }
        if self.max_trials == 0 {
            return Err(DfmError::InvalidParams("max_trials must be at least 1".into()));
        }
        if self.max_distance.is_nan() || self.max_distance <= 0.0 {
            return Err(DfmError::InvalidParams(format!("max_distance {}", self.max_distance)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustFit {
    pub homography: Homography,
    pub inlier_flags: Vec<bool>,
    pub score: f64,
}

impl RobustFit {
    pub fn inlier_count(&self) -> usize {
        self.inlier_flags.iter().filter(|&&f| f).count()
    }
}

struct Scored {
    score: f64,
    inliers: usize,
}

fn evaluate(h: &Homography, matches: &[PixelMatch], t2: f64) -> Scored {
    let mut score = 0.0;
    let mut inliers = 0;
    for m in matches {
        let d2 = residual_sq(h, m);
        if d2 <= t2 {
            inliers += 1;
            score += d2;
        } else {
            score += t2;
        }
    }
    Scored { score, inliers }
}

#[inline]
fn residual_sq(h: &Homography, m: &PixelMatch) -> f64 {
    match h.apply(m.xa, m.ya) {
        Ok((u, v)) => {
            let d2 = (u - m.xb).powi(2) + (v - m.yb).powi(2);
            if d2.is_nan() {
                f64::INFINITY
            } else {
                d2
            }
        }
        Err(_) => f64::INFINITY,
    }
}

fn triangle_area(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    0.5 * ((q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)).abs()
}

fn has_collinear_triple(pts: [(f64, f64); 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .any(|t| triangle_area(pts[t[0]], pts[t[1]], pts[t[2]]) < COLLINEAR_AREA)
}

fn required_trials(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let p = inlier_ratio.powi(SAMPLE_SIZE as i32);
    if p >= 1.0 {
        return 1;
    }
    if p <= 0.0 {
        return cap;
    }
    let n = ((1.0 - confidence).ln() / (1.0 - p).ln()).ceil();
    if n.is_finite() && n >= 1.0 {
        (n as usize).min(cap)
    } else {
        cap
    }
}

pub fn msac_homography(matches: &[PixelMatch], params: &MsacParams) -> Result<RobustFit> {
    msac_homography_observed(matches, params, |_, _| {})
}

/// [`msac_homography`] that reports every scored candidate model.
pub fn msac_homography_observed(
    matches: &[PixelMatch],
    params: &MsacParams,
    mut observer: impl FnMut(&Homography, f64),
) -> Result<RobustFit> {
    params.validate()?;
    let n = matches.len();
    if n < SAMPLE_SIZE {
        return Err(DfmError::TooFewMatches(n));
    }
    let t2 = params.max_distance * params.max_distance;
    let (norm_a, _) = hartley_normalize(matches.iter().map(|m| (m.xa, m.ya)));
    let (norm_b, _) = hartley_normalize(matches.iter().map(|m| (m.xb, m.yb)));

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Scored)> = None;
    let mut budget = params.max_trials;
    let mut trial = 0;
    while trial < budget {
        trial += 1;
        let sample = index::sample(&mut rng, n, SAMPLE_SIZE).into_vec();
        let side = |pts: &[(f64, f64)]| [pts[sample[0]], pts[sample[1]], pts[sample[2]], pts[sample[3]]];
        if has_collinear_triple(side(&norm_a)) || has_collinear_triple(side(&norm_b)) {
            continue;
        }
        let minimal: Vec<PixelMatch> = sample.iter().map(|&i| matches[i]).collect();
        let Ok(h) = dlt_homography(&minimal) else {
            continue;
        };
        let scored = evaluate(&h, matches, t2);
        observer(&h, scored.score);
        if best.as_ref().is_none_or(|(_, b)| scored.score < b.score) {
            budget = required_trials(scored.inliers as f64 / n as f64, params.confidence, params.max_trials);
            best = Some((h, scored));
        }
    }
    let (best_h, best_scored) = best.ok_or(DfmError::NoModelFound)?;

    let inliers: Vec<PixelMatch> = matches
        .iter()
        .filter(|m| residual_sq(&best_h, m) <= t2)
        .copied()
        .collect();
    // The refit replaces the sampled model only when it does not raise the cost.
    let (homography, score) = match dlt_homography(&inliers) {
        Ok(refit) => {
            let s = evaluate(&refit, matches, t2);
            if s.score <= best_scored.score {
                (refit, s.score)
            } else {
                (best_h, best_scored.score)
            }
        }
        Err(_) => (best_h, best_scored.score),
    };
    let inlier_flags = matches.iter().map(|m| residual_sq(&homography, m) <= t2).collect();
    log::debug!("msac: {trial} trials, score {score:.3}");
    Ok(RobustFit {
        homography,
        inlier_flags,
        score,
    })
}
