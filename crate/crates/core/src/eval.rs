//! HPatches-style evaluation: dataset loading, mean matching accuracy and
//! repeated-run homography accuracy.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::geometry::{corner_error, msac_homography, MsacParams};
use crate::io::{load_image, read_homography};
use crate::pipeline::{dfm_match, PipelineConfig};
use crate::rng::derive_seed;
use crate::{DfmError, Homography, PixelMatch, Result};

pub const MMA_THRESHOLDS: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
pub const HOMOGRAPHY_THRESHOLDS: [f64; 3] = [1.0, 3.0, 5.0];
pub const DEFAULT_RUNS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Illumination,
    Viewpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequencePair {
    pub sequence: String,
    pub kind: PairKind,
    /// Target image number, 2..=6.
    pub target_index: usize,
    pub reference: PathBuf,
    pub target: PathBuf,
    /// Reference pixel → target pixel.
    pub h_gt: Homography,
}

impl SequencePair {
    pub fn id(&self) -> String {
        format!("{}/{}", self.sequence, self.target_index)
    }
}

fn find_image(dir: &Path, index: usize) -> Option<PathBuf> {
    ["ppm", "png", "pgm"]
        .iter()
        .map(|ext| dir.join(format!("{index}.{ext}")))
        .find(|p| p.is_file())
}

fn load_sequence(dir: &Path, name: &str, kind: PairKind) -> Result<Vec<SequencePair>> {
    let malformed = |reason: String| DfmError::MalformedSequence {
        sequence: name.to_string(),
        reason,
    };
    let image = |k: usize| find_image(dir, k).ok_or_else(|| malformed(format!("missing image {k}.ppm")));
    let reference = image(1)?;
    (2..=6)
        .map(|k| {
            let target = image(k)?;
            let h_path = dir.join(format!("H_1_{k}"));
            if !h_path.is_file() {
                return Err(malformed(format!("missing H_1_{k}")));
            }
            let h_gt = read_homography(&h_path).map_err(|e| malformed(format!("H_1_{k}: {e}")))?;
            Ok(SequencePair {
                sequence: name.to_string(),
                kind,
                target_index: k,
                reference: reference.clone(),
                target,
                h_gt,
            })
        })
        .collect()
}

/// Every `i_*` / `v_*` directory under `root`, in name order, five pairs
/// each. Other entries are ignored.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<SequencePair>> {
    let mut dirs: Vec<(String, PathBuf)> = fs::read_dir(root.as_ref())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| Some((e.file_name().into_string().ok()?, e.path())))
        .collect();
    dirs.sort();
    let mut pairs = Vec::new();
    for (name, path) in dirs {
        let kind = if name.starts_with("i_") {
            PairKind::Illumination
        } else if name.starts_with("v_") {
            PairKind::Viewpoint
        } else {
            log::debug!("skipping {name}: not a sequence directory");
            continue;
        };
        pairs.extend(load_sequence(&path, &name, kind)?);
    }
    Ok(pairs)
}

/// Ground-truth reprojection error of each match: `‖H_gt(pA) − pB‖`, or
/// infinity when `pA` maps to infinity.
pub fn reprojection_errors(matches: &[PixelMatch], h_gt: &Homography) -> Vec<f64> {
    matches
        .iter()
        .map(|m| match h_gt.apply(m.xa, m.ya) {
            Ok((x, y)) => (x - m.xb).hypot(y - m.yb),
            Err(_) => f64::INFINITY,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmaCurve {
    pub thresholds: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub matches: usize,
}

impl MmaCurve {
    /// `true` when the curve came from an empty match set.
    pub fn is_empty(&self) -> bool {
        self.matches == 0
    }

    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.accuracy[i])
    }
}

pub fn mma(matches: &[PixelMatch], h_gt: &Homography, thresholds: &[f64]) -> MmaCurve {
    let errors = reprojection_errors(matches, h_gt);
    let accuracy = thresholds
        .iter()
        .map(|&t| {
            if errors.is_empty() {
                0.0
            } else {
                errors.iter().filter(|&&e| e <= t).count() as f64 / errors.len() as f64
            }
        })
        .collect();
    MmaCurve {
        thresholds: thresholds.to_vec(),
        accuracy,
        matches: matches.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitMma {
    pub pairs: usize,
    pub accuracy: Vec<f64>,
    pub mean_matches: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetMma {
    pub thresholds: Vec<f64>,
    pub overall: SplitMma,
    pub illumination: SplitMma,
    pub viewpoint: SplitMma,
}

fn average(curves: &[&MmaCurve], n_thresholds: usize) -> SplitMma {
    let n = curves.len();
    let mut accuracy = vec![0.0; n_thresholds];
    let mut total_matches = 0usize;
    for c in curves {
        for (acc, v) in accuracy.iter_mut().zip(&c.accuracy) {
            *acc += v;
        }
        total_matches += c.matches;
    }
    if n > 0 {
        accuracy.iter_mut().for_each(|a| *a /= n as f64);
    }
    SplitMma {
        pairs: n,
        accuracy,
        mean_matches: if n > 0 { total_matches as f64 / n as f64 } else { 0.0 },
    }
}

/// Unweighted mean of per-pair curves, overall and per split. All curves
/// must share `thresholds`.
pub fn dataset_mma(results: &[(PairKind, MmaCurve)], thresholds: &[f64]) -> Result<DatasetMma> {
    if let Some((_, c)) = results.iter().find(|(_, c)| c.thresholds != thresholds) {
        return Err(DfmError::InvalidParams(format!(
            "curve thresholds {:?} differ from {:?}",
            c.thresholds, thresholds
        )));
    }
    let split = |kind: Option<PairKind>| {
        let curves: Vec<&MmaCurve> = results
            .iter()
            .filter(|(k, _)| kind.is_none_or(|want| *k == want))
            .map(|(_, c)| c)
            .collect();
        average(&curves, thresholds.len())
    };
    Ok(DatasetMma {
        thresholds: thresholds.to_vec(),
        overall: split(None),
        illumination: split(Some(PairKind::Illumination)),
        viewpoint: split(Some(PairKind::Viewpoint)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdStats {
    pub threshold: f64,
    pub mean: f64,
    /// Sample standard deviation over runs.
    pub std: f64,
    /// Pairs correct in at least one run.
    pub boe: f64,
    /// Pairs correct in every run.
    pub woe: f64,
}

/// Statistics from `errors[pair][run]` corner errors. Every pair needs the
/// same number of runs, at least two.
pub fn summarize_corner_errors(errors: &[Vec<f64>], thresholds: &[f64]) -> Result<Vec<ThresholdStats>> {
    let runs = errors.first().map_or(0, Vec::len);
    if runs < 2 {
        return Err(DfmError::InvalidParams(format!("need at least 2 runs, got {runs}")));
    }
    if errors.iter().any(|e| e.len() != runs) {
        return Err(DfmError::InvalidParams("pairs have different run counts".into()));
    }
    if errors.iter().flatten().any(|e| e.is_nan() || *e < 0.0) {
        return Err(DfmError::InvalidParams("corner errors must be non-negative".into()));
    }
    let pairs = errors.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let per_run: Vec<f64> = (0..runs)
                .map(|r| errors.iter().filter(|e| e[r] <= t).count() as f64 / pairs)
                .collect();
            let mean = per_run.iter().sum::<f64>() / runs as f64;
            let var = per_run.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
            let boe = errors.iter().filter(|e| e.iter().any(|&x| x <= t)).count() as f64 / pairs;
            let woe = errors.iter().filter(|e| e.iter().all(|&x| x <= t)).count() as f64 / pairs;
            ThresholdStats {
                threshold: t,
                mean,
                std: var.sqrt(),
                boe,
                woe,
            }
        })
        .collect())
}

/// Corner errors of `runs` MSAC fits on one pair's matches, run `r` seeded
/// by `derive_seed(base_seed, pair_index, r)`. Failed fits count as
/// infinitely wrong.
#[allow(clippy::too_many_arguments)]
pub fn pair_corner_errors(
    matches: &[PixelMatch],
    h_gt: &Homography,
    width: usize,
    height: usize,
    msac: &MsacParams,
    runs: usize,
    base_seed: u64,
    pair_index: u64,
) -> Vec<f64> {
    (0..runs)
        .map(|r| {
            let params = msac.with_seed(derive_seed(base_seed, pair_index, r as u64));
            match msac_homography(matches, &params) {
                Ok(fit) => corner_error(&fit.homography, h_gt, width, height),
                Err(e) => {
                    log::debug!("run {r}: {e}");
                    f64::INFINITY
                }
            }
        })
        .collect()
}

/// Homography accuracy over a set of pairs given as
/// `(matches, H_gt, reference width, reference height)`.
pub fn homography_accuracy(
    pairs: &[(Vec<PixelMatch>, Homography, usize, usize)],
    msac: &MsacParams,
    runs: usize,
    base_seed: u64,
    thresholds: &[f64],
) -> Result<Vec<ThresholdStats>> {
    if runs < 2 {
        return Err(DfmError::InvalidParams(format!("need at least 2 runs, got {runs}")));
    }
    let errors: Vec<Vec<f64>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (m, h, w, hh))| pair_corner_errors(m, h, *w, *hh, msac, runs, base_seed, i as u64))
        .collect();
    summarize_corner_errors(&errors, thresholds)
}

/// Pipeline output for one dataset pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub id: String,
    pub kind: PairKind,
    pub matches: Vec<PixelMatch>,
    pub h_gt: Homography,
    pub width: usize,
    pub height: usize,
    /// Set when the pipeline failed; `matches` is then empty.
    pub error: Option<String>,
}

fn match_pair(pair: &SequencePair, index: usize, config: &PipelineConfig, base_seed: u64) -> Result<PairOutcome> {
    let a = load_image(&pair.reference)?;
    let b = load_image(&pair.target)?;
    let config = PipelineConfig {
        msac: config.msac.with_seed(derive_seed(base_seed, index as u64, u64::MAX)),
        ..config.clone()
    };
    let (matches, error) = match dfm_match(&a, &b, &config) {
        Ok(r) => (r.matches, None),
        Err(e) => {
            log::warn!("{}: {e}", pair.id());
            (Vec::new(), Some(e.to_string()))
        }
    };
    Ok(PairOutcome {
        id: pair.id(),
        kind: pair.kind,
        matches,
        h_gt: pair.h_gt,
        width: a.width(),
        height: a.height(),
        error,
    })
}

/// Runs the matcher on every pair in parallel; results keep dataset order.
/// Unreadable images abort the whole run.
pub fn run_pairs(pairs: &[SequencePair], config: &PipelineConfig, base_seed: u64) -> Result<Vec<PairOutcome>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| match_pair(p, i, config, base_seed))
        .collect()
}

fn threshold_key(t: f64) -> String {
    format!("{t}")
}

fn curve_json(thresholds: &[f64], values: &[f64]) -> Value {
    let mut map = Map::new();
    for (t, v) in thresholds.iter().zip(values) {
        map.insert(threshold_key(*t), json!(v));
    }
    Value::Object(map)
}

pub fn mma_report(outcomes: &[PairOutcome], config: &PipelineConfig) -> Result<Value> {
    let curves: Vec<(PairKind, MmaCurve)> = outcomes
        .iter()
        .map(|o| (o.kind, mma(&o.matches, &o.h_gt, &MMA_THRESHOLDS)))
        .collect();
    let summary = dataset_mma(&curves, &MMA_THRESHOLDS)?;
    let split = |s: &SplitMma| {
        json!({
            "pairs": s.pairs,
            "accuracy": curve_json(&summary.thresholds, &s.accuracy),
            "mean_matches": s.mean_matches,
        })
    };
    let per_pair: Vec<Value> = outcomes
        .iter()
        .zip(&curves)
        .map(|(o, (_, c))| {
            json!({
                "id": o.id,
                "kind": o.kind,
                "matches": c.matches,
                "accuracy": curve_json(&c.thresholds, &c.accuracy),
                "error": o.error,
            })
        })
        .collect();
    Ok(json!({
        "mode": "mma",
        "variant": config.variant.to_string(),
        "schedule": config.schedule.to_string(),
        "splits": {
            "overall": split(&summary.overall),
            "illumination": split(&summary.illumination),
            "viewpoint": split(&summary.viewpoint),
        },
        "pairs": per_pair,
    }))
}

pub fn homography_report(
    outcomes: &[PairOutcome],
    config: &PipelineConfig,
    runs: usize,
    base_seed: u64,
) -> Result<Value> {
    if runs < 2 {
        return Err(DfmError::InvalidParams(format!("need at least 2 runs, got {runs}")));
    }
    let errors: Vec<Vec<f64>> = outcomes
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            pair_corner_errors(
                &o.matches,
                &o.h_gt,
                o.width,
                o.height,
                &config.msac,
                runs,
                base_seed,
                i as u64,
            )
        })
        .collect();
    let stats = summarize_corner_errors(&errors, &HOMOGRAPHY_THRESHOLDS)?;
    let mut table = Map::new();
    for s in &stats {
        table.insert(
            threshold_key(s.threshold),
            json!({"mean": s.mean, "std": s.std, "boe": s.boe, "woe": s.woe}),
        );
    }
    let mean_matches = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.matches.len()).sum::<usize>() as f64 / outcomes.len() as f64
    };
    let per_pair: Vec<Value> = outcomes
        .iter()
        .zip(&errors)
        .map(|(o, e)| {
            let finite: Vec<Value> = e
                .iter()
                .map(|&x| if x.is_finite() { json!(x) } else { Value::Null })
                .collect();
            json!({"id": o.id, "kind": o.kind, "matches": o.matches.len(), "corner_errors": finite, "error": o.error})
        })
        .collect();
    Ok(json!({
        "mode": "homography",
        "variant": config.variant.to_string(),
        "schedule": config.schedule.to_string(),
        "runs": runs,
        "pairs_total": outcomes.len(),
        "mean_matches": mean_matches,
        "accuracy": Value::Object(table),
        "pairs": per_pair,
    }))
}
