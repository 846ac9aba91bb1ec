//! `hml`: the experiment pipeline for speech-driven head-motion
//! synthesis and evaluation.
//!
//! Typical flow on a synthetic corpus:
//!
//! ```text
//! hml synth-data --n-videos 16 --seed 7 --out data
//! hml segment --corpus data/corpus.json --seed 7 --out run
//! hml fit-normalizer --manifest run/manifest.json --out run
//! hml extract-features --manifest run/manifest.json --normalizer run/normalizer.json --out run
//! hml train --manifest run/manifest.json --data run --stochastic --out run/model
//! hml sample --checkpoint run/model/checkpoint.json --manifest run/manifest.json --data run --k 10 --seed 7 --out run/gen
//! hml evaluate --manifest run/manifest.json --data run --predictions run/gen/predictions --out run/eval
//! hml analyze --scores run/scores/scores.csv --metrics run/eval/metrics.csv --seed 7 --out run/analysis
//! ```
//!
//! Every subcommand writes its artifacts plus a `config.json` provenance
//! file under `--out`; all randomness flows from `--seed`. `HML_THREADS`
//! caps the worker pool.

mod commands;
mod util;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    analyze, data, evaluate, features, model as model_cmd, AnalyzeArgs, DiversityArgs,
    EvaluateArgs, ExtractFeaturesArgs, FitNormalizerArgs, GradCheckArgs, IngestAnnotationsArgs,
    MirrorArgs, PlotDataArgs, PredictArgs, SampleArgs, SegmentArgs, SynthAnnotationsArgs,
    SynthDataArgs, TrainArgs,
};

#[derive(Parser)]
#[command(
    name = "hml",
    about = "Speech-driven head-motion synthesis and evaluation workbench",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic audio+pose corpus
    SynthData(SynthDataArgs),
    /// Split videos and segment them into 10-second utterances
    Segment(SegmentArgs),
    /// Fit the per-bin feature normalizer on the training split
    FitNormalizer(FitNormalizerArgs),
    /// Extract per-utterance features and normalized pose targets
    ExtractFeatures(ExtractFeaturesArgs),
    /// Train a model (optionally the full hyperparameter sweep)
    Train(TrainArgs),
    /// Run a deterministic checkpoint over a split
    Predict(PredictArgs),
    /// Draw k motions per utterance from a stochastic checkpoint
    Sample(SampleArgs),
    /// Write mirrored versions of the ground-truth poses
    Mirror(MirrorArgs),
    /// Compute MAE/DTW/Frechet metrics for a prediction directory
    Evaluate(EvaluateArgs),
    /// Nearest-neighbor Shannon diversity of a prediction directory
    Diversity(DiversityArgs),
    /// Simulate forced-choice raters from a metric report
    SynthAnnotations(SynthAnnotationsArgs),
    /// Aggregate raw annotations into perceptual scores
    IngestAnnotations(IngestAnnotationsArgs),
    /// Quality groups, regression contrasts, CIs, and correlations
    Analyze(AnalyzeArgs),
    /// Verify backpropagation against central finite differences
    GradCheck(GradCheckArgs),
    /// Emit figure-shaped trajectory and group-mean CSV data
    PlotData(PlotDataArgs),
}

fn main() -> ExitCode {
    util::init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(args) => data::synth_data(&args),
        Command::Segment(args) => data::segment(&args),
        Command::FitNormalizer(args) => features::fit_normalizer(&args),
        Command::ExtractFeatures(args) => features::extract_features(&args),
        Command::Train(args) => model_cmd::train(&args),
        Command::Predict(args) => model_cmd::predict(&args),
        Command::Sample(args) => model_cmd::sample(&args),
        Command::Mirror(args) => evaluate::mirror(&args),
        Command::Evaluate(args) => evaluate::evaluate(&args),
        Command::Diversity(args) => evaluate::diversity(&args),
        Command::SynthAnnotations(args) => analyze::synth_annotations(&args),
        Command::IngestAnnotations(args) => analyze::ingest_annotations(&args),
        Command::Analyze(args) => analyze::analyze(&args),
        Command::GradCheck(args) => model_cmd::grad_check(&args),
        Command::PlotData(args) => analyze::plot_data(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
