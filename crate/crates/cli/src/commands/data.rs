//! `synth-data` and `segment`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use hml_core::dataset;
use serde::Serialize;

use crate::util;

#[derive(Args, Serialize)]
pub struct SynthDataArgs {
    /// Number of synthetic videos to generate
    #[arg(long, default_value_t = 16)]
    pub n_videos: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth_data(args: &SynthDataArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "synth-data", args)?;
    let corpus = dataset::generate_synthetic_corpus(&args.out, args.n_videos, args.seed)?;
    let total: f64 = corpus.videos.iter().map(|v| v.duration_s).sum();
    println!(
        "generated {} videos ({total:.1} s total) under {}",
        corpus.videos.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SegmentArgs {
    /// corpus.json produced by synth-data (or hand-written)
    #[arg(long)]
    pub corpus: PathBuf,
    /// train/val/test fractions
    #[arg(long, default_value = "0.75,0.125,0.125", value_parser = parse_fractions)]
    pub fractions: (f64, f64, f64),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated fractions".into());
    }
    let mut vals = [0.0f64; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p.parse().map_err(|e| format!("bad fraction {p:?}: {e}"))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "segment", args)?;
    let corpus = dataset::read_corpus(&args.corpus)?;
    let manifest = dataset::build_manifest(&corpus, args.fractions, args.seed)
        .context("building manifest")?;
    let path = args.out.join("manifest.json");
    dataset::write_manifest(&path, &manifest)?;
    let count = |split| manifest.utterances_in(split).len();
    println!(
        "manifest: {} videos, {} utterances (train {}, val {}, test {}) -> {}",
        manifest.videos.len(),
        manifest.utterances.len(),
        count(dataset::Split::Train),
        count(dataset::Split::Val),
        count(dataset::Split::Test),
        path.display()
    );
    Ok(())
}
