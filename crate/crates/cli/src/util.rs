//! Shared plumbing: provenance files, prediction-directory layout, and
//! the worker pool.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hml_core::motion::{PoseSequence, PoseTable};
use hml_core::perception::VariantId;

/// Cap the rayon pool from HML_THREADS. Outputs do not depend on the
/// worker count; this only bounds parallelism.
pub fn init_thread_pool() {
    if let Ok(value) = std::env::var("HML_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Create `--out` and record the subcommand's full configuration in
/// `config.json` before doing any work.
pub fn prepare_out_dir<A: serde::Serialize>(out: &Path, command: &str, args: &A) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let doc = serde_json::json!({
        "command": command,
        "args": args,
    });
    let path = out.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Prediction files are named `<utterance_id>__<variant>.csv`.
pub fn prediction_path(dir: &Path, utterance_id: &str, variant: &VariantId) -> PathBuf {
    dir.join(format!("{utterance_id}__{variant}.csv"))
}

/// Scan a prediction directory; returns (utterance_id, variant, path)
/// sorted by name.
pub fn scan_predictions(dir: &Path) -> Result<Vec<(String, VariantId, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("reading prediction directory {}", dir.display()))?;
    for entry in entries {
        let entry = entry?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .context("non-utf8 file name")?;
        let Some((utt, variant)) = stem.rsplit_once("__") else {
            bail!("prediction file {} is not named <utterance>__<variant>.csv", path.display());
        };
        let variant: VariantId = variant
            .parse()
            .with_context(|| format!("bad variant in {}", path.display()))?;
        out.push((utt.to_string(), variant, path));
    }
    if out.is_empty() {
        bail!("no prediction CSVs found in {}", dir.display());
    }
    out.sort();
    Ok(out)
}

/// A pose table read from a file written by this pipeline: contiguous
/// frames from 0.
pub fn table_to_sequence(table: &PoseTable, path: &Path) -> Result<PoseSequence> {
    let n = table.len() as u64;
    if table.keys().next() != Some(&0) || table.keys().next_back() != Some(&(n - 1)) {
        bail!(
            "{}: pose file must have contiguous frames starting at 0",
            path.display()
        );
    }
    Ok(PoseSequence::new(table.values().copied().collect())?)
}

pub fn read_pose_sequence(path: &Path) -> Result<PoseSequence> {
    let table = hml_core::motion::read_pose_csv(path)?;
    table_to_sequence(&table, path)
}

/// Ground-truth pose path for one utterance under a data directory
/// produced by extract-features.
pub fn gt_pose_path(data_dir: &Path, utterance_id: &str) -> PathBuf {
    data_dir.join("poses").join(format!("{utterance_id}.csv"))
}

pub fn feature_path(data_dir: &Path, utterance_id: &str) -> PathBuf {
    data_dir.join("features").join(format!("{utterance_id}.hmf"))
}

