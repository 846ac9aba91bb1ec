//! `fit-normalizer` and `extract-features`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use hml_core::dataset::{self, Manifest, Split, VideoEntry};
use hml_core::features::{self, FeatureStack};
use hml_core::motion;
use rayon::prelude::*;
use serde::Serialize;

use crate::util;

#[derive(Args, Serialize)]
pub struct FitNormalizerArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fit_normalizer(args: &FitNormalizerArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "fit-normalizer", args)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let train_videos: Vec<&VideoEntry> = manifest.videos_in(Split::Train).collect();
    if train_videos.is_empty() {
        anyhow::bail!("manifest has no training videos");
    }

    // Per-utterance mel spectrograms of the training split, in manifest
    // order (fit_normalizer reduces in a defined order).
    let mut spectrograms = Vec::new();
    for video in &train_videos {
        let wav = features::read_wav(&video.audio)?;
        for utt in manifest
            .utterances
            .iter()
            .filter(|u| u.video_id == video.video_id)
        {
            let slice = dataset::utterance_waveform(&wav, utt.start_frame)?;
            spectrograms.push(features::mel_spectrogram(&slice)?);
        }
    }
    let normalizer = features::fit_normalizer(&spectrograms)?;
    let path = args.out.join("normalizer.json");
    features::write_normalizer(&path, &normalizer)?;
    println!(
        "normalizer fitted on {} training utterances -> {}",
        spectrograms.len(),
        path.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct ExtractFeaturesArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub normalizer: PathBuf,
    /// Feature stack: delta-delta (default) or static-delta
    #[arg(long, default_value = "delta-delta", value_parser = parse_stack)]
    pub stack: FeatureStackArg,
    /// Also write per-utterance feature CSVs for debugging
    #[arg(long)]
    pub csv: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Serializable wrapper so the provenance file records the stack choice.
#[derive(Clone, Copy, Serialize)]
pub struct FeatureStackArg(pub FeatureStack);

fn parse_stack(s: &str) -> Result<FeatureStackArg, String> {
    match s {
        "delta-delta" => Ok(FeatureStackArg(FeatureStack::DeltaDelta)),
        "static-delta" => Ok(FeatureStackArg(FeatureStack::StaticDelta)),
        other => Err(format!(
            "unknown stack {other:?} (expected delta-delta or static-delta)"
        )),
    }
}

fn process_video(
    manifest: &Manifest,
    video: &VideoEntry,
    normalizer: &features::FeatureNormalizer,
    stack: FeatureStack,
    args: &ExtractFeaturesArgs,
) -> Result<usize> {
    let utterances: Vec<_> = manifest
        .utterances
        .iter()
        .filter(|u| u.video_id == video.video_id)
        .collect();
    if utterances.is_empty() {
        return Ok(0);
    }
    let table = motion::read_pose_csv(&video.pose)?;
    let wav = features::read_wav(&video.audio)?;

    // Mean pose over all retained frames of this video, then subtract it
    // from every window.
    let windows: Vec<motion::PoseSequence> = utterances
        .iter()
        .map(|u| dataset::utterance_poses(&table, u.start_frame))
        .collect::<hml_core::Result<_>>()?;
    let mean = motion::compute_mean_pose(&windows)?;

    for (utt, window) in utterances.iter().zip(&windows) {
        let normalized = motion::normalize_poses(window, &mean);
        motion::write_pose_csv(
            &util::gt_pose_path(&args.out, &utt.utterance_id),
            &normalized,
        )?;

        let slice = dataset::utterance_waveform(&wav, utt.start_frame)?;
        let mel = features::mel_spectrogram(&slice)?;
        let feats = features::featurize(&mel, normalizer, stack)?;
        features::write_features(&util::feature_path(&args.out, &utt.utterance_id), &feats)?;
        if args.csv {
            let path = args
                .out
                .join("features")
                .join(format!("{}.csv", utt.utterance_id));
            features::write_features_csv(&path, &feats)?;
        }
    }
    Ok(utterances.len())
}

pub fn extract_features(args: &ExtractFeaturesArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "extract-features", args)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let normalizer = features::read_normalizer(&args.normalizer)?;
    std::fs::create_dir_all(args.out.join("poses"))?;
    std::fs::create_dir_all(args.out.join("features"))?;

    let counts: Vec<usize> = manifest
        .videos
        .par_iter()
        .map(|video| {
            process_video(&manifest, video, &normalizer, args.stack.0, args)
                .with_context(|| format!("processing {}", video.video_id))
        })
        .collect::<Result<_>>()?;
    println!(
        "extracted features and normalized poses for {} utterances -> {}",
        counts.iter().sum::<usize>(),
        args.out.display()
    );
    Ok(())
}
