use std::fmt::Write;

use dfm::eval::{homography_report, load_dataset, mma_report, run_pairs};
use dfm::pipeline::PipelineConfig;
use serde_json::Value;

use crate::args::{EvalCommon, EvalMode};
use crate::cmd_match::{parse_schedule, parse_variant};
use crate::output::{require_dir, write_atomic};
use crate::{CliError, CliResult};

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => "inf".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One row per pair: id, kind, match count, then the per-threshold
/// accuracies (mma) or the per-run corner errors (homography).
fn pairs_csv(report: &Value, mode: EvalMode) -> String {
    let pairs = report["pairs"].as_array().cloned().unwrap_or_default();
    let mut out = String::new();
    let values = |p: &Value| -> Vec<(String, Value)> {
        match mode {
            EvalMode::Mma => p["accuracy"]
                .as_object()
                .map(|m| m.iter().map(|(k, v)| (format!("acc@{k}"), v.clone())).collect())
                .unwrap_or_default(),
            EvalMode::Homography => p["corner_errors"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .enumerate()
                        .map(|(i, v)| (format!("run{i}"), v.clone()))
                        .collect()
                })
                .unwrap_or_default(),
        }
    };
    let header: Vec<String> = pairs
        .first()
        .map(|p| values(p).into_iter().map(|(k, _)| k).collect())
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "id,kind,matches{}",
        header.iter().map(|h| format!(",{h}")).collect::<String>()
    );
    for p in &pairs {
        let cells: String = values(p).iter().map(|(_, v)| format!(",{}", csv_cell(v))).collect();
        let _ = writeln!(
            out,
            "{},{},{}{cells}",
            csv_cell(&p["id"]),
            csv_cell(&p["kind"]),
            csv_cell(&p["matches"])
        );
    }
    out
}

fn evaluate(args: &EvalCommon, mode: EvalMode, config: &PipelineConfig) -> CliResult<Value> {
    let pairs = load_dataset(&args.dataset)?;
    if pairs.is_empty() {
        return Err(CliError::Runtime(format!(
            "no i_*/v_* sequences under {}",
            args.dataset.display()
        )));
    }
    log::info!("{} pairs", pairs.len());
    let outcomes = run_pairs(&pairs, config, args.seed)?;
    Ok(match mode {
        EvalMode::Mma => mma_report(&outcomes, config)?,
        EvalMode::Homography => homography_report(&outcomes, config, args.runs, args.seed)?,
    })
}

pub fn run(args: &EvalCommon, mode: EvalMode) -> CliResult<()> {
    let config = PipelineConfig {
        variant: parse_variant(&args.variant)?,
        schedule: parse_schedule(&args.ratio)?,
        ..Default::default()
    };
    if mode == EvalMode::Homography && args.runs < 2 {
        return Err(CliError::Usage(format!("--runs must be at least 2, got {}", args.runs)));
    }
    if args.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    require_dir("--dataset", &args.dataset)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let report = pool.install(|| evaluate(args, mode, &config))?;

    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    if let Some(path) = &args.csv {
        write_atomic(path, pairs_csv(&report, mode).as_bytes())?;
    }
    match &args.report {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}
