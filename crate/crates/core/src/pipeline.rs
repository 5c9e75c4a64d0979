//! The two-stage matcher.
//!
//! Stage-0 matches the terminal maps of A and B without a ratio test, fits
//! `H_BA` (B pixel → A pixel) with MSAC and warps B into A's padded frame.
//! Stage-1 runs DNNS on the layer-5 maps of A and the warped image and
//! refines the result to layer 1. B-side coordinates are mapped back through
//! `H_BA⁻¹`, and matches touching either image's padding are dropped.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dnns::{dnns, dnns_maps, DescriptorView, RatioThreshold};
use crate::extractor::{extract, padded_dim, ExtractorConfig};
use crate::geometry::{backmap_matches, msac_homography, warp_image, MsacParams};
use crate::refine::{refine_trace, ThresholdSchedule};
use crate::types::in_extent;
use crate::{DfmError, FeatureMap, FeaturePyramid, Homography, ImageBuffer, MatchSet, PixelMatch, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    #[serde(rename = "s1")]
    S1,
    #[serde(rename = "s0_s1")]
    S0S1,
}

impl FromStr for Variant {
    type Err = DfmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Variant::S1),
            "s0_s1" | "s0+s1" => Ok(Variant::S0S1),
            _ => Err(DfmError::Config(format!(
                "unknown variant {s:?} (expected s1 or s0_s1)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::S1 => "s1",
            Variant::S0S1 => "s0_s1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScheduleName {
    #[serde(rename = "r06")]
    R06,
    #[serde(rename = "r09")]
    R09,
}

impl ScheduleName {
    pub fn schedule(self) -> ThresholdSchedule {
        match self {
            ScheduleName::R06 => ThresholdSchedule::r06(),
            ScheduleName::R09 => ThresholdSchedule::r09(),
        }
    }
}

impl FromStr for ScheduleName {
    type Err = DfmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r06" | "0.6" => Ok(ScheduleName::R06),
            "r09" | "0.9" => Ok(ScheduleName::R09),
            _ => Err(DfmError::Config(format!(
                "unknown ratio schedule {s:?} (expected r06 or r09)"
            ))),
        }
    }
}

impl fmt::Display for ScheduleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleName::R06 => "r06",
            ScheduleName::R09 => "r09",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub schedule: ScheduleName,
    pub extractor: ExtractorConfig,
    pub msac: MsacParams,
    /// Fewer terminal-layer matches than this skips the Stage-0 fit.
    pub min_stage0_matches: usize,
    /// A Stage-0 fit supported by fewer inliers is treated as failed.
    pub min_stage0_inliers: usize,
    /// Rings of terminal cells along the border left out of Stage-0.
    pub stage0_border: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::S0S1,
            schedule: ScheduleName::R09,
            extractor: ExtractorConfig::default(),
            msac: MsacParams::default(),
            min_stage0_matches: 4,
            min_stage0_inliers: 12,
            stage0_border: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_stage0_matches < 4 {
            return Err(DfmError::Config(format!(
                "min_stage0_matches must be at least 4, got {}",
                self.min_stage0_matches
            )));
        }
        if self.min_stage0_inliers < 4 {
            return Err(DfmError::Config(format!(
                "min_stage0_inliers must be at least 4, got {}",
                self.min_stage0_inliers
            )));
        }
        Ok(())
    }
}

/// Where each pyramid comes from. `warped_b` is only consulted by the
/// two-stage variant; when absent, B's config is reused, which works for
/// the builtin extractor only.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSources {
    pub a: ExtractorConfig,
    pub b: ExtractorConfig,
    pub warped_b: Option<ExtractorConfig>,
}

impl FeatureSources {
    pub fn shared(config: &ExtractorConfig) -> Self {
        Self {
            a: config.clone(),
            b: config.clone(),
            warped_b: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Match counts for layers 5 down to 1; shorter when Stage-1 found no
    /// layer-5 matches.
    pub layer_counts: Vec<LayerCount>,
    pub stage0_matches: Option<usize>,
    pub stage0_inliers: Option<usize>,
    pub stage0_fallback: bool,
    /// Layer-1 matches dropped for touching padding or leaving B.
    pub dropped: usize,
    pub emitted: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayerCount {
    pub layer: u8,
    pub matches: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub matches: Vec<PixelMatch>,
    /// `H_BA` used for the warp; `None` for the single-stage variant and on
    /// fallback.
    pub stage0_homography: Option<Homography>,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage0 {
    pub homography: Homography,
    pub matches: usize,
    pub inliers: usize,
}

fn interior_view(map: &FeatureMap, margin: usize) -> Result<DescriptorView> {
    let (rows, cols) = (map.rows(), map.cols());
    let points = map
        .points()
        .filter(|p| p.row >= margin && p.col >= margin && p.row + margin < rows && p.col + margin < cols)
        .collect();
    DescriptorView::from_points(map, points)
}

/// Terminal-layer matching and MSAC; the returned homography maps B pixels
/// to A pixels.
pub fn stage0(pyr_a: &FeaturePyramid, pyr_b: &FeaturePyramid, config: &PipelineConfig) -> Result<Stage0> {
    let (vb, va) = (
        interior_view(pyr_b.terminal(), config.stage0_border)?,
        interior_view(pyr_a.terminal(), config.stage0_border)?,
    );
    let grid = if va.is_empty() || vb.is_empty() {
        MatchSet::empty(pyr_a.terminal().layer())
    } else {
        dnns(&vb, &va, RatioThreshold::DISABLED)?
    };
    if grid.len() < config.min_stage0_matches {
        return Err(DfmError::InsufficientMatches {
            found: grid.len(),
            required: config.min_stage0_matches,
        });
    }
    let fit = msac_homography(&grid.to_pixels(), &config.msac)?;
    let inliers = fit.inlier_count();
    if inliers < config.min_stage0_inliers {
        return Err(DfmError::InsufficientMatches {
            found: inliers,
            required: config.min_stage0_inliers,
        });
    }
    Ok(Stage0 {
        homography: fit.homography,
        matches: grid.len(),
        inliers,
    })
}

/// Layer-5 DNNS followed by refinement; returns the sets for layers 5..1.
pub fn stage1(pyr_a: &FeaturePyramid, pyr_bw: &FeaturePyramid, schedule: &ThresholdSchedule) -> Result<Vec<MatchSet>> {
    let initial = dnns_maps(pyr_a.layer(5), pyr_bw.layer(5), schedule.for_layer(5))?;
    if initial.is_empty() {
        return Err(DfmError::NoInitialMatches);
    }
    refine_trace(pyr_a, pyr_bw, initial, schedule)
}

pub fn dfm_match(a: &ImageBuffer, b: &ImageBuffer, config: &PipelineConfig) -> Result<MatchResult> {
    if let ExtractorConfig::TensorFiles { .. } = config.extractor {
        return Err(DfmError::Config(
            "tensor_files needs one manifest per image; use dfm_match_with".into(),
        ));
    }
    run(a, b, config, &FeatureSources::shared(&config.extractor), None)
}

pub fn dfm_match_with(
    a: &ImageBuffer,
    b: &ImageBuffer,
    config: &PipelineConfig,
    sources: &FeatureSources,
) -> Result<MatchResult> {
    run(a, b, config, sources, None)
}

/// Two-stage matching with Stage-0 replaced by a given `H_BA`.
pub fn dfm_match_aligned(
    a: &ImageBuffer,
    b: &ImageBuffer,
    config: &PipelineConfig,
    h_ba: &Homography,
) -> Result<MatchResult> {
    let config = PipelineConfig {
        variant: Variant::S0S1,
        ..config.clone()
    };
    run(a, b, &config, &FeatureSources::shared(&config.extractor), Some(*h_ba))
}

fn run(
    a: &ImageBuffer,
    b: &ImageBuffer,
    config: &PipelineConfig,
    sources: &FeatureSources,
    forced: Option<Homography>,
) -> Result<MatchResult> {
    config.validate()?;
    let mut diagnostics = Diagnostics::default();
    let pyr_a = extract(a, &sources.a)?;

    let (pyr_bw, h_ba) = match config.variant {
        Variant::S1 => (extract(b, &sources.b)?, None),
        Variant::S0S1 => {
            let h_ba = match forced {
                Some(h) => Some(h),
                None => {
                    let pyr_b = extract(b, &sources.b)?;
                    match stage0(&pyr_a, &pyr_b, config) {
                        Ok(s0) => {
                            diagnostics.stage0_matches = Some(s0.matches);
                            diagnostics.stage0_inliers = Some(s0.inliers);
                            Some(s0.homography)
                        }
                        Err(e) => {
                            log::warn!("stage-0 failed ({e}); continuing with the identity warp");
                            diagnostics.stage0_fallback = true;
                            None
                        }
                    }
                }
            };
            let warp = h_ba.unwrap_or_else(Homography::identity);
            let warped = warp_image(b, &warp, padded_dim(a.width()), padded_dim(a.height()))?;
            let warped_source = match &sources.warped_b {
                Some(c) => c,
                None if matches!(sources.b, ExtractorConfig::Builtin { .. }) => &sources.b,
                None => {
                    return Err(DfmError::Config(
                        "tensor_files with the two-stage variant needs features for the warped image".into(),
                    ))
                }
            };
            (extract(&warped, warped_source)?, h_ba)
        }
    };

    let trace = match stage1(&pyr_a, &pyr_bw, &config.schedule.schedule()) {
        Ok(t) => t,
        Err(DfmError::NoInitialMatches) => {
            log::warn!("stage-1 found no layer-5 matches");
            diagnostics.layer_counts.push(LayerCount { layer: 5, matches: 0 });
            return Ok(MatchResult {
                matches: Vec::new(),
                stage0_homography: h_ba,
                diagnostics,
            });
        }
        Err(e) => return Err(e),
    };
    diagnostics.layer_counts = trace
        .iter()
        .map(|s| LayerCount {
            layer: s.layer(),
            matches: s.len(),
        })
        .collect();

    let layer1 = trace.last().expect("trace covers layer 1");
    let in_a: Vec<PixelMatch> = layer1
        .to_pixels()
        .into_iter()
        .filter(|m| in_extent(m.xa, m.ya, a.width(), a.height()))
        .collect();
    let matches = match &h_ba {
        Some(h) => backmap_matches(&in_a, h, b.width(), b.height())?,
        None => in_a
            .into_iter()
            .filter(|m| in_extent(m.xb, m.yb, b.width(), b.height()))
            .collect(),
    };
    diagnostics.dropped = layer1.len() - matches.len();
    diagnostics.emitted = matches.len();
    log::info!("{} matches ({} dropped)", matches.len(), diagnostics.dropped);
    Ok(MatchResult {
        matches,
        stage0_homography: h_ba,
        diagnostics,
    })
}
