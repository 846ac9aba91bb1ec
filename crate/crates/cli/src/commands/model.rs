//! `train`, `predict`, `sample`, and `grad-check`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hml_core::dataset::{self, Manifest, Split, Utterance};
use hml_core::features::read_features;
use hml_core::model::{
    forward_deterministic, generate_k_samples, load_checkpoint, save_checkpoint, ModelConfig,
};
use hml_core::perception::VariantId;
use hml_core::seeds;
use hml_core::train::{
    self, gradient_check, hyperparameter_sweep, TrainConfig, TrainSample, SWEEP_GRID,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::util;

pub fn parse_split_arg(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split {other:?}")),
    }
}

fn load_samples(manifest: &Manifest, data_dir: &Path, split: Split) -> Result<Vec<TrainSample>> {
    manifest
        .utterances_in(split)
        .iter()
        .map(|utt| {
            let features = read_features(&util::feature_path(data_dir, &utt.utterance_id))?;
            let target = util::read_pose_sequence(&util::gt_pose_path(data_dir, &utt.utterance_id))?;
            Ok(TrainSample { features, target })
        })
        .collect()
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory produced by extract-features (features/ and poses/)
    #[arg(long)]
    pub data: PathBuf,
    /// Train the noise-conditioned model instead of the deterministic one
    #[arg(long)]
    pub stochastic: bool,
    /// Sweep the full layers x hidden grid instead of one configuration
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enable global gradient-norm clipping at this value
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "train", args)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let train_set = load_samples(&manifest, &args.data, Split::Train)?;
    let val_set = load_samples(&manifest, &args.data, Split::Val)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        seed: args.seed,
        clip_norm: args.clip_norm,
    };

    let (params, history) = if args.sweep {
        let sweep = hyperparameter_sweep(&cfg, args.stochastic, &SWEEP_GRID, &train_set, &val_set)?;
        let mut table = String::from("layers,hidden,val_loss,n_params\n");
        for e in &sweep.entries {
            table.push_str(&format!(
                "{},{},{},{}\n",
                e.num_layers, e.hidden_size, e.val_loss, e.n_params
            ));
        }
        std::fs::write(args.out.join("sweep.csv"), table)?;
        println!(
            "sweep winner: {} layers, {} hidden",
            sweep.best_config.num_layers, sweep.best_config.hidden_size
        );
        (sweep.params, sweep.history)
    } else {
        let model_cfg = if args.stochastic {
            ModelConfig::stochastic(args.layers, args.hidden)
        } else {
            ModelConfig::deterministic(args.layers, args.hidden)
        };
        train::train(&cfg, model_cfg, &train_set, &val_set)?
    };

    let ckpt = args.out.join("checkpoint.json");
    save_checkpoint(&ckpt, &params)?;
    std::fs::write(args.out.join("history.csv"), history.to_csv())?;
    let best = history.best_epoch().context("empty history")?;
    println!(
        "trained {} utterances for {} epochs; best epoch {} (val L1 {:.6}) -> {}",
        train_set.len(),
        args.epochs,
        best.epoch,
        best.val_loss,
        ckpt.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split_arg)]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "predict", args)?;
    let params = load_checkpoint(&args.checkpoint)?;
    if params.config.stochastic {
        bail!("checkpoint is stochastic; use `hml sample`");
    }
    let manifest = dataset::read_manifest(&args.manifest)?;
    let pred_dir = args.out.join("predictions");
    std::fs::create_dir_all(&pred_dir)?;
    let utterances = manifest.utterances_in(args.split);
    utterances
        .par_iter()
        .map(|utt| -> Result<()> {
            let features = read_features(&util::feature_path(&args.data, &utt.utterance_id))?;
            let pred = forward_deterministic(&params, &features)?;
            hml_core::motion::write_pose_csv(
                &util::prediction_path(&pred_dir, &utt.utterance_id, &VariantId::Deterministic),
                &pred,
            )?;
            Ok(())
        })
        .collect::<Result<()>>()?;
    println!(
        "wrote {} deterministic predictions -> {}",
        utterances.len(),
        pred_dir.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Motions to generate per utterance
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "test", value_parser = parse_split_arg)]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
}

/// Per-utterance sampling seed; shared with plot-data so the plotted
/// trajectories match the sampled ones.
pub fn utterance_sample_seed(seed: u64, utterance_id: &str) -> u64 {
    seeds::derive(seed, &format!("sample:{utterance_id}"))
}

pub fn sample_utterance(
    params: &hml_core::ModelParams,
    data_dir: &Path,
    utt: &Utterance,
    k: usize,
    seed: u64,
) -> Result<Vec<hml_core::PoseSequence>> {
    let features = read_features(&util::feature_path(data_dir, &utt.utterance_id))?;
    Ok(generate_k_samples(
        params,
        &features,
        k,
        utterance_sample_seed(seed, &utt.utterance_id),
    )?)
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "sample", args)?;
    let params = load_checkpoint(&args.checkpoint)?;
    if !params.config.stochastic {
        return Err(hml_core::Error::NotStochastic.into());
    }
    let manifest = dataset::read_manifest(&args.manifest)?;
    let pred_dir = args.out.join("predictions");
    std::fs::create_dir_all(&pred_dir)?;
    let utterances = manifest.utterances_in(args.split);
    if utterances.is_empty() {
        bail!("no utterances in split {}", args.split);
    }
    utterances
        .par_iter()
        .map(|utt| -> Result<()> {
            let samples = sample_utterance(&params, &args.data, utt, args.k, args.seed)?;
            for (i, s) in samples.iter().enumerate() {
                hml_core::motion::write_pose_csv(
                    &util::prediction_path(
                        &pred_dir,
                        &utt.utterance_id,
                        &VariantId::Sample(i as u32),
                    ),
                    s,
                )?;
            }
            Ok(())
        })
        .collect::<Result<()>>()?;
    println!(
        "wrote {} x {} sampled motions -> {}",
        utterances.len(),
        args.k,
        pred_dir.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long)]
    pub stochastic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail (exit 1) if the max relative error reaches this value
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
}

pub fn grad_check(args: &GradCheckArgs) -> Result<()> {
    let cfg = if args.stochastic {
        ModelConfig::stochastic(args.layers, args.hidden)
    } else {
        ModelConfig::deterministic(args.layers, args.hidden)
    };
    let err = gradient_check(cfg, args.seed, args.frames)?;
    println!(
        "grad-check ({} layers, {} hidden, {} frames, {}): max relative error = {err:.3e}",
        args.layers,
        args.hidden,
        args.frames,
        if args.stochastic { "stochastic" } else { "deterministic" },
    );
    if err >= args.threshold {
        bail!("gradient check failed: {err:.3e} >= {:.1e}", args.threshold);
    }
    Ok(())
}
