//! `mirror`, `evaluate`, and `diversity`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use hml_core::dataset::{self, Split};
use hml_core::diversity::{classify, fit_nn_index, shannon_index};
use hml_core::metrics::{dtw, frechet_discrete, frechet_gaussian, mae, MetricReport};
use hml_core::motion::{self, Axis};
use hml_core::perception::VariantId;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::model::parse_split_arg;
use crate::util;

#[derive(Args, Serialize)]
pub struct MirrorArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory produced by extract-features (reads poses/)
    #[arg(long)]
    pub data: PathBuf,
    /// Rotation axis to negate: x, y, or z
    #[arg(long, value_parser = parse_axis)]
    pub axis: AxisArg,
    #[arg(long, default_value = "test", value_parser = parse_split_arg)]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Serialize)]
pub struct AxisArg(pub Axis);

fn parse_axis(s: &str) -> Result<AxisArg, String> {
    s.parse::<Axis>().map(AxisArg).map_err(|e| e.to_string())
}

pub fn mirror(args: &MirrorArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "mirror", args)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let pred_dir = args.out.join("predictions");
    std::fs::create_dir_all(&pred_dir)?;
    let utterances = manifest.utterances_in(args.split);
    if utterances.is_empty() {
        bail!("no utterances in split {}", args.split);
    }
    for utt in &utterances {
        let gt = util::read_pose_sequence(&util::gt_pose_path(&args.data, &utt.utterance_id))?;
        let mirrored = motion::mirror(&gt, args.axis.0);
        motion::write_pose_csv(
            &util::prediction_path(
                &pred_dir,
                &utt.utterance_id,
                &VariantId::Mirrored(args.axis.0),
            ),
            &mirrored,
        )?;
    }
    println!(
        "wrote {} mirrored sequences (axis {}) -> {}",
        utterances.len(),
        args.axis.0,
        pred_dir.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory produced by extract-features (reads poses/)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of prediction CSVs named `<utterance>__<variant>.csv`
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "evaluate", args)?;
    let preds = util::scan_predictions(&args.predictions)?;
    let reports: Vec<MetricReport> = preds
        .par_iter()
        .map(|(utt, variant, path)| -> Result<MetricReport> {
            let gt = util::read_pose_sequence(&util::gt_pose_path(&args.data, utt))
                .with_context(|| format!("ground truth for {utt}"))?;
            let pred = util::read_pose_sequence(path)?;
            Ok(MetricReport {
                utterance_id: utt.clone(),
                variant: variant.to_string(),
                mae: mae(&pred, &gt)?,
                dtw: dtw(&pred, &gt)?,
                fd_gaussian: frechet_gaussian(&pred, &gt)?,
                fd_discrete: frechet_discrete(&pred, &gt)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("utterance_id,variant,mae,dtw,fd_gaussian,fd_discrete\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.utterance_id, r.variant, r.mae, r.dtw, r.fd_gaussian, r.fd_discrete
        ));
    }
    let path = args.out.join("metrics.csv");
    std::fs::write(&path, csv)?;
    println!("evaluated {} predictions -> {}", reports.len(), path.display());
    Ok(())
}

#[derive(Args, Serialize)]
pub struct DiversityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory produced by extract-features (reads poses/ of the
    /// training split as the index corpus)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn diversity(args: &DiversityArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "diversity", args)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let train_utts = manifest.utterances_in(Split::Train);
    if train_utts.is_empty() {
        bail!("manifest has no training utterances");
    }
    // Index IDs follow manifest order of the training split.
    let corpus: Vec<hml_core::PoseSequence> = train_utts
        .iter()
        .map(|u| util::read_pose_sequence(&util::gt_pose_path(&args.data, &u.utterance_id)))
        .collect::<Result<_>>()?;
    let index = fit_nn_index(&corpus)?;

    let preds = util::scan_predictions(&args.predictions)?;
    let sequences: Vec<hml_core::PoseSequence> = preds
        .par_iter()
        .map(|(_, _, path)| util::read_pose_sequence(path))
        .collect::<Result<_>>()?;
    let histogram = classify(&index, &sequences)?;
    let score = shannon_index(&histogram)?;

    let mut csv = String::from("train_id,count\n");
    for (id, count) in histogram.counts().iter().enumerate() {
        csv.push_str(&format!("{id},{count}\n"));
    }
    std::fs::write(args.out.join("nn_histogram.csv"), csv)?;
    let report = serde_json::json!({
        "n_index": index.len(),
        "n_predictions": histogram.total(),
        "diversity_bits": score,
    });
    let path = args.out.join("diversity.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "diversity over {} predictions against {} training sequences: {score:.4} bits -> {}",
        histogram.total(),
        index.len(),
        path.display()
    );
    Ok(())
}
