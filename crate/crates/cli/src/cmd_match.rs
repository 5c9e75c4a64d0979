use std::path::{Path, PathBuf};

use dfm::extractor::{extract, padded_dim, ExtractorConfig};
use dfm::geometry::warp_image;
use dfm::io::{format_matches, load_image};
use dfm::pipeline::{dfm_match_with, stage0, FeatureSources, MatchResult, PipelineConfig, ScheduleName, Variant};
use dfm::{Homography, ImageBuffer};
use serde_json::{json, Value};

use crate::args::{ExtractorKind, MatchArgs};
use crate::output::{encode_image, require_file, write_atomic};
use crate::{CliError, CliResult};

pub fn parse_variant(s: &str) -> CliResult<Variant> {
    s.parse().map_err(|e: dfm::DfmError| CliError::Usage(e.to_string()))
}

pub fn parse_schedule(s: &str) -> CliResult<ScheduleName> {
    s.parse().map_err(|e: dfm::DfmError| CliError::Usage(e.to_string()))
}

fn diagnostics_path(args: &MatchArgs) -> PathBuf {
    args.diagnostics.clone().unwrap_or_else(|| {
        let stem = args
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        args.out.with_file_name(format!("{stem}.diagnostics.json"))
    })
}

fn tensor(manifest: &Path) -> ExtractorConfig {
    ExtractorConfig::TensorFiles {
        manifest: manifest.to_path_buf(),
    }
}

/// Feature sources after checking that the flags agree with each other.
/// `None` for `warped_b` under tensor_files means only the warped image
/// can be produced.
fn sources(args: &MatchArgs, variant: Variant) -> CliResult<FeatureSources> {
    if args.warped_out.is_some() && variant == Variant::S1 {
        return Err(CliError::Usage("--warped-out needs --variant s0_s1".into()));
    }
    match args.extractor {
        ExtractorKind::Builtin => {
            if args.manifest_a.is_some() || args.manifest_b.is_some() || args.manifest_bw.is_some() {
                return Err(CliError::Usage(
                    "manifests are only used with --extractor tensor_files".into(),
                ));
            }
            Ok(FeatureSources::shared(&ExtractorConfig::Builtin {
                seed: args.builtin_seed,
            }))
        }
        ExtractorKind::TensorFiles => {
            let (Some(ma), Some(mb)) = (&args.manifest_a, &args.manifest_b) else {
                return Err(CliError::Usage(
                    "--extractor tensor_files requires --manifest-a and --manifest-b".into(),
                ));
            };
            require_file("--manifest-a", ma)?;
            require_file("--manifest-b", mb)?;
            if let Some(bw) = &args.manifest_bw {
                require_file("--manifest-bw", bw)?;
            }
            if variant == Variant::S0S1 && args.manifest_bw.is_none() && args.warped_out.is_none() {
                return Err(CliError::Usage(
                    "tensor_files with s0_s1 needs --manifest-bw, or --warped-out to produce the warped image first"
                        .into(),
                ));
            }
            Ok(FeatureSources {
                a: tensor(ma),
                b: tensor(mb),
                warped_b: args.manifest_bw.as_deref().map(tensor),
            })
        }
    }
}

fn write_warped(path: &Path, a: &ImageBuffer, b: &ImageBuffer, h_ba: Option<&Homography>) -> CliResult<()> {
    let h = h_ba.cloned().unwrap_or_else(Homography::identity);
    let warped = warp_image(b, &h, padded_dim(a.width()), padded_dim(a.height()))?;
    write_atomic(path, &encode_image(&warped, path)?)?;
    log::info!("warped image written to {}", path.display());
    Ok(())
}

fn diagnostics_json(args: &MatchArgs, config: &PipelineConfig, result: &MatchResult) -> CliResult<Value> {
    let mut v = serde_json::to_value(&result.diagnostics).map_err(|e| CliError::Runtime(e.to_string()))?;
    let obj = v.as_object_mut().expect("diagnostics serialize to an object");
    obj.insert("matches".into(), json!(result.matches.len()));
    obj.insert("variant".into(), json!(config.variant.to_string()));
    obj.insert("schedule".into(), json!(config.schedule.to_string()));
    obj.insert(
        "extractor".into(),
        json!(match args.extractor {
            ExtractorKind::Builtin => "builtin",
            ExtractorKind::TensorFiles => "tensor_files",
        }),
    );
    obj.insert("seed".into(), json!(args.seed));
    obj.insert(
        "stage0_homography".into(),
        json!(result.stage0_homography.as_ref().map(|h| h.rows())),
    );
    Ok(v)
}

pub fn run(args: &MatchArgs) -> CliResult<()> {
    let variant = parse_variant(&args.variant)?;
    let schedule = parse_schedule(&args.ratio)?;
    require_file("--image-a", &args.image_a)?;
    require_file("--image-b", &args.image_b)?;
    let sources = sources(args, variant)?;
    let mut config = PipelineConfig {
        variant,
        schedule,
        extractor: sources.a.clone(),
        ..Default::default()
    };
    config.msac = config.msac.with_seed(args.seed);

    let a = load_image(&args.image_a)?;
    let b = load_image(&args.image_b)?;

    if variant == Variant::S0S1 && args.extractor == ExtractorKind::TensorFiles && sources.warped_b.is_none() {
        let warped_out = args.warped_out.as_deref().expect("checked in sources()");
        let (pa, pb) = (extract(&a, &sources.a)?, extract(&b, &sources.b)?);
        let h = match stage0(&pa, &pb, &config) {
            Ok(s0) => Some(s0.homography),
            Err(e) => {
                log::warn!("stage-0 failed ({e}); writing the unwarped image");
                None
            }
        };
        write_warped(warped_out, &a, &b, h.as_ref())?;
        println!(
            "warped image written to {}; export its features and rerun with --manifest-bw",
            warped_out.display()
        );
        return Ok(());
    }

    let result = dfm_match_with(&a, &b, &config, &sources)?;
    if let Some(path) = &args.warped_out {
        write_warped(path, &a, &b, result.stage0_homography.as_ref())?;
    }
    let diagnostics = diagnostics_json(args, &config, &result)?;
    write_atomic(&args.out, format_matches(&result.matches).as_bytes())?;
    let mut text = serde_json::to_string_pretty(&diagnostics).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(&diagnostics_path(args), text.as_bytes())?;
    println!("{}", result.matches.len());
    Ok(())
}
