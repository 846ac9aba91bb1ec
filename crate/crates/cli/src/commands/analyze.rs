//! `synth-annotations`, `ingest-annotations`, `analyze`, and `plot-data`.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hml_core::dataset;
use hml_core::metrics::MetricReport;
use hml_core::model::load_checkpoint;
use hml_core::perception::{
    self, aggregate_scores, bootstrap_ci, logistic_regression, rank_and_group,
    sliding_difference_design, AnnotationRecord, Choice, PerceptualScore, VariantId,
};
use hml_core::seeds;
use rand::Rng;
use serde::Serialize;

use crate::commands::model::sample_utterance;
use crate::util;

fn read_metrics_csv(path: &Path) -> Result<Vec<MetricReport>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).with_context(|| format!("opening {display}"))?;
    let mut reports = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if lineno == 0 {
            if line != "utterance_id,variant,mae,dtw,fd_gaussian,fd_discrete" {
                bail!("{display}: unexpected metrics header {line:?}");
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("{display}:{}: expected 6 fields", lineno + 1);
        }
        reports.push(MetricReport {
            utterance_id: fields[0].to_string(),
            variant: fields[1].to_string(),
            mae: fields[2].parse()?,
            dtw: fields[3].parse()?,
            fd_gaussian: fields[4].parse()?,
            fd_discrete: fields[5].parse()?,
        });
    }
    if reports.is_empty() {
        bail!("{display} has no data rows");
    }
    Ok(reports)
}

#[derive(Args, Serialize)]
pub struct SynthAnnotationsArgs {
    /// metrics.csv from `hml evaluate` (defines the rated pairs)
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub raters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Simulated rater model: the probability of preferring the ground truth
/// rises with the sample's MAE rank within its utterance (0.45 for the
/// best up to 0.90 for the worst), sits near chance for the deterministic
/// output, and is exactly chance for mirrored motion, which has a large
/// MAE but looks natural.
fn ground_truth_probability(
    variant: &VariantId,
    mae_rank: Option<usize>,
    n_samples: usize,
) -> f64 {
    match variant {
        VariantId::Deterministic => 0.52,
        VariantId::Mirrored(_) => 0.5,
        VariantId::Sample(_) => {
            let rank = mae_rank.unwrap_or(0) as f64;
            let span = (n_samples.max(2) - 1) as f64;
            0.45 + 0.45 * rank / span
        }
    }
}

pub fn synth_annotations(args: &SynthAnnotationsArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "synth-annotations", args)?;
    if args.raters == 0 {
        bail!("--raters must be at least 1");
    }
    let reports = read_metrics_csv(&args.metrics)?;

    // MAE rank of each sample variant within its utterance.
    let mut per_utt: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
    for r in &reports {
        if let Ok(VariantId::Sample(i)) = r.variant.parse() {
            per_utt.entry(&r.utterance_id).or_default().push((i, r.mae));
        }
    }
    let mut mae_rank: BTreeMap<(String, u32), usize> = BTreeMap::new();
    let mut n_samples = 0usize;
    for (utt, mut entries) in per_utt {
        entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        n_samples = n_samples.max(entries.len());
        for (rank, (idx, _)) in entries.into_iter().enumerate() {
            mae_rank.insert((utt.to_string(), idx), rank);
        }
    }

    let mut records = Vec::with_capacity(reports.len() * args.raters);
    for r in &reports {
        let variant: VariantId = r
            .variant
            .parse()
            .with_context(|| format!("variant {:?}", r.variant))?;
        let rank = match variant {
            VariantId::Sample(i) => mae_rank.get(&(r.utterance_id.clone(), i)).copied(),
            _ => None,
        };
        let p = ground_truth_probability(&variant, rank, n_samples);
        let mut rng = seeds::rng(seeds::derive(
            args.seed,
            &format!("ann:{}:{}", r.utterance_id, r.variant),
        ));
        for rater in 0..args.raters {
            let choice = if rng.random::<f64>() < p {
                Choice::GroundTruth
            } else {
                Choice::Generated
            };
            records.push(AnnotationRecord {
                utterance_id: r.utterance_id.clone(),
                variant_id: variant,
                rater_id: format!("r{rater:02}"),
                choice,
            });
        }
    }
    let path = args.out.join("annotations.csv");
    perception::write_annotations_csv(&path, &records)?;
    println!(
        "simulated {} annotations ({} raters x {} pairs) -> {}",
        records.len(),
        args.raters,
        reports.len(),
        path.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct IngestAnnotationsArgs {
    /// Annotation CSV: utterance_id,variant_id,rater_id,choice
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ingest_annotations(args: &IngestAnnotationsArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "ingest-annotations", args)?;
    let records = perception::read_annotations_csv(&args.file)?;
    let scores = aggregate_scores(&records)?;
    let path = args.out.join("scores.csv");
    perception::write_scores_csv(&path, &scores)?;
    println!(
        "aggregated {} annotations into {} perceptual scores -> {}",
        records.len(),
        scores.len(),
        path.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct AnalyzeArgs {
    /// scores.csv from `hml ingest-annotations`
    #[arg(long)]
    pub scores: PathBuf,
    /// metrics.csv from `hml evaluate`; enables the correlation report
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Mean and bootstrap CI rows for the deterministic output and each
/// quality group, Figure-2-shaped.
pub fn group_mean_rows(
    scores: &[PerceptualScore],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(String, f64, f64, f64)>> {
    let by_key: BTreeMap<(String, VariantId), f64> = scores
        .iter()
        .map(|s| ((s.utterance_id.clone(), s.variant_id), s.score))
        .collect();
    let mut rows = Vec::new();

    let det: Vec<f64> = scores
        .iter()
        .filter(|s| s.variant_id == VariantId::Deterministic)
        .map(|s| s.score)
        .collect();
    if !det.is_empty() {
        let (lo, hi) = bootstrap_ci(&det, 0.95, replicates, seeds::derive(seed, "ci:det"))?;
        rows.push(("det".to_string(), hml_core::stats::mean(&det), lo, hi));
    }

    let groups = rank_and_group(scores)?;
    for g in &groups {
        let values: Vec<f64> = g
            .members
            .iter()
            .map(|(utt, variant)| by_key[&(utt.clone(), *variant)])
            .collect();
        let (lo, hi) = bootstrap_ci(
            &values,
            0.95,
            replicates,
            seeds::derive(seed, &format!("ci:group{}", g.group)),
        )?;
        rows.push((
            g.group.to_string(),
            hml_core::stats::mean(&values),
            lo,
            hi,
        ));
    }
    Ok(rows)
}

/// Figure-3-shaped rows for the mirrored variants present in the scores.
pub fn mirrored_mean_rows(
    scores: &[PerceptualScore],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(String, f64, f64, f64)>> {
    let mut by_variant: BTreeMap<VariantId, Vec<f64>> = BTreeMap::new();
    for s in scores {
        if matches!(s.variant_id, VariantId::Mirrored(_)) {
            by_variant.entry(s.variant_id).or_default().push(s.score);
        }
    }
    let mut rows = Vec::new();
    for (variant, values) in by_variant {
        let (lo, hi) = bootstrap_ci(
            &values,
            0.95,
            replicates,
            seeds::derive(seed, &format!("ci:{variant}")),
        )?;
        rows.push((variant.to_string(), hml_core::stats::mean(&values), lo, hi));
    }
    Ok(rows)
}

/// Binomial expansion of a perceptual score back into per-rating
/// outcomes: `round(score * n_raters)` ground-truth choices.
fn expand_outcomes(score: &PerceptualScore) -> (usize, usize) {
    let successes = (score.score * score.n_raters as f64).round() as usize;
    (score.n_raters, successes)
}

/// Table-1-shaped regression: intercept plus sliding-difference contrasts
/// over levels [det, group 0, ..., group k-1], fitted on the per-rating
/// binaries with the utterance as the bootstrap cluster.
pub fn contrast_regression(
    scores: &[PerceptualScore],
    replicates: usize,
    seed: u64,
) -> Result<Vec<perception::RegressionResult>> {
    let groups = rank_and_group(scores)?;
    let n_levels = groups.len() + 1; // det + groups
    let coding = sliding_difference_design(n_levels)?;

    // Level of each (utterance, variant): det = 0, group g = g + 1.
    let mut level_of: BTreeMap<(String, VariantId), usize> = BTreeMap::new();
    for s in scores {
        if s.variant_id == VariantId::Deterministic {
            level_of.insert((s.utterance_id.clone(), s.variant_id), 0);
        }
    }
    for g in &groups {
        for (utt, variant) in &g.members {
            level_of.insert((utt.clone(), *variant), g.group + 1);
        }
    }

    let mut design = Vec::new();
    let mut outcomes = Vec::new();
    let mut clusters = Vec::new();
    for s in scores {
        let Some(&level) = level_of.get(&(s.utterance_id.clone(), s.variant_id)) else {
            continue; // mirrored variants are analyzed separately
        };
        let (trials, successes) = expand_outcomes(s);
        let mut row = vec![1.0];
        row.extend_from_slice(&coding[level]);
        for i in 0..trials {
            design.push(row.clone());
            outcomes.push(i < successes);
            clusters.push(s.utterance_id.clone());
        }
    }

    let mut names = vec!["intercept".to_string()];
    names.push("group_0_vs_det".to_string());
    for g in 1..groups.len() {
        names.push(format!("group_{g}_vs_{}", g - 1));
    }
    Ok(logistic_regression(
        &design,
        &outcomes,
        &clusters,
        &names,
        replicates,
        seeds::derive(seed, "table1"),
    )?)
}

/// Intercept-only regression of the mirrored ratings against no
/// preference (0 on the logit scale).
pub fn mirrored_regression(
    scores: &[PerceptualScore],
    replicates: usize,
    seed: u64,
) -> Result<Option<perception::RegressionResult>> {
    let mut design = Vec::new();
    let mut outcomes = Vec::new();
    let mut clusters = Vec::new();
    for s in scores {
        if !matches!(s.variant_id, VariantId::Mirrored(_)) {
            continue;
        }
        let (trials, successes) = expand_outcomes(s);
        for i in 0..trials {
            design.push(vec![1.0]);
            outcomes.push(i < successes);
            clusters.push(s.utterance_id.clone());
        }
    }
    if design.is_empty() {
        return Ok(None);
    }
    let results = logistic_regression(
        &design,
        &outcomes,
        &clusters,
        &["mirrored_vs_no_preference".to_string()],
        replicates,
        seeds::derive(seed, "mirror-regression"),
    )?;
    Ok(Some(results.into_iter().next().unwrap()))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "analyze", args)?;
    let scores = perception::read_scores_csv(&args.scores)?;

    let fig2 = group_mean_rows(&scores, args.replicates, args.seed)?;
    perception::write_group_means_csv(&args.out.join("fig2_group_means.csv"), &fig2)?;

    let table1 = contrast_regression(&scores, args.replicates, args.seed)?;
    perception::write_regression_csv(&args.out.join("table1_contrasts.csv"), &table1)?;

    let fig3 = mirrored_mean_rows(&scores, args.replicates, args.seed)?;
    if !fig3.is_empty() {
        perception::write_group_means_csv(&args.out.join("fig3_mirrored_means.csv"), &fig3)?;
    }
    if let Some(mirror_reg) = mirrored_regression(&scores, args.replicates, args.seed)? {
        perception::write_regression_csv(
            &args.out.join("mirror_regression.csv"),
            &[mirror_reg],
        )?;
    }

    if let Some(metrics_path) = &args.metrics {
        let reports = read_metrics_csv(metrics_path)?;
        // Correlate over the generated variants (deterministic + samples);
        // mirrored motion is the adversarial set and is reported above.
        let gen_scores: Vec<PerceptualScore> = scores
            .iter()
            .filter(|s| !matches!(s.variant_id, VariantId::Mirrored(_)))
            .cloned()
            .collect();
        let keys: std::collections::BTreeSet<(String, String)> = gen_scores
            .iter()
            .map(|s| (s.utterance_id.clone(), s.variant_id.to_string()))
            .collect();
        let gen_reports: Vec<MetricReport> = reports
            .into_iter()
            .filter(|r| keys.contains(&(r.utterance_id.clone(), r.variant.clone())))
            .collect();
        let correlations = perception::correlate_with_metrics(&gen_scores, &gen_reports)?;
        perception::write_correlations_csv(
            &args.out.join("metric_correlations.csv"),
            &correlations,
        )?;
    }

    println!(
        "analysis over {} scores -> {}",
        scores.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct PlotDataArgs {
    /// Stochastic checkpoint used to draw the sample trajectories
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory produced by extract-features
    #[arg(long)]
    pub data: PathBuf,
    /// Utterance to plot; defaults to the first test utterance
    #[arg(long)]
    pub utterance: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// scores.csv; when given, Figure-2/3 group-mean CSVs are emitted too
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plot_data(args: &PlotDataArgs) -> Result<()> {
    util::prepare_out_dir(&args.out, "plot-data", args)?;
    let params = load_checkpoint(&args.checkpoint)?;
    let manifest = dataset::read_manifest(&args.manifest)?;
    let test_utts = manifest.utterances_in(dataset::Split::Test);
    let utt = match &args.utterance {
        Some(id) => test_utts
            .iter()
            .chain(manifest.utterances_in(dataset::Split::Train).iter())
            .chain(manifest.utterances_in(dataset::Split::Val).iter())
            .find(|u| &u.utterance_id == id)
            .copied()
            .with_context(|| format!("utterance {id} not in manifest"))?,
        None => *test_utts.first().context("manifest has no test utterances")?,
    };

    let gt = util::read_pose_sequence(&util::gt_pose_path(&args.data, &utt.utterance_id))?;
    let samples = sample_utterance(&params, &args.data, utt, args.k, args.seed)?;

    // One frame per row; per axis: ground truth then the k samples.
    let mut header = String::from("frame");
    for axis in ["rx", "ry", "rz"] {
        header.push_str(&format!(",gt_{axis}"));
        for i in 0..args.k {
            header.push_str(&format!(",sample_{i}_{axis}"));
        }
    }
    let mut csv = header;
    csv.push('\n');
    for t in 0..gt.len() {
        csv.push_str(&t.to_string());
        for axis in hml_core::motion::Axis::ALL {
            csv.push_str(&format!(",{}", gt.frames()[t].component(axis)));
            for s in &samples {
                csv.push_str(&format!(",{}", s.frames()[t].component(axis)));
            }
        }
        csv.push('\n');
    }
    let path = args.out.join("fig1_trajectories.csv");
    std::fs::write(&path, csv)?;
    println!(
        "trajectories for {} (ground truth + {} samples) -> {}",
        utt.utterance_id,
        args.k,
        path.display()
    );
    println!(
        "sampling seed note: trajectories match `hml sample --seed {}`",
        args.seed
    );

    if let Some(scores_path) = &args.scores {
        let scores = perception::read_scores_csv(scores_path)?;
        let fig2 = group_mean_rows(&scores, args.replicates, args.seed)?;
        perception::write_group_means_csv(&args.out.join("fig2_group_means.csv"), &fig2)?;
        let fig3 = mirrored_mean_rows(&scores, args.replicates, args.seed)?;
        if !fig3.is_empty() {
            perception::write_group_means_csv(&args.out.join("fig3_mirrored_means.csv"), &fig3)?;
        }
    }
    Ok(())
}
