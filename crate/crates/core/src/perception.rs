//! Perceptual-study analysis: forced-choice rating ingestion, perceptual
//! scores, quality-group ranking, logistic regression with
//! cluster-bootstrap standard errors, bootstrap confidence intervals, and
//! metric-vs-perception correlation.
//!
//! A perceptual score is the fraction of raters who preferred the
//! ground-truth video in a forced-choice pair: 1 means the ground truth
//! was consistently preferred, 0 means the generated motion was, and 0.5
//! means no preference. "Most natural" therefore means lowest score.
//!
//! The mixed-effects model behind the original analysis is approximated
//! here by a fixed-effects logistic fit with utterance-level cluster
//! bootstrap errors, which addresses the same within-utterance
//! dependence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{CorrelationResult, MetricReport};
use crate::motion::Axis;
use crate::seeds;
use crate::stats;

/// Which side of a forced-choice pair a rater preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    GroundTruth,
    Generated,
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_truth" => Ok(Choice::GroundTruth),
            "generated" => Ok(Choice::Generated),
            other => Err(Error::InvalidValue(format!("unknown choice {other:?}"))),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::GroundTruth => write!(f, "ground_truth"),
            Choice::Generated => write!(f, "generated"),
        }
    }
}

/// A rated stimulus variant for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariantId {
    Deterministic,
    Sample(u32),
    Mirrored(Axis),
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantId::Deterministic => write!(f, "deterministic"),
            VariantId::Sample(i) => write!(f, "sample_{i}"),
            VariantId::Mirrored(axis) => write!(f, "mirrored_{axis}"),
        }
    }
}

impl FromStr for VariantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "deterministic" {
            return Ok(VariantId::Deterministic);
        }
        if let Some(idx) = s.strip_prefix("sample_") {
            let i: u32 = idx
                .parse()
                .map_err(|_| Error::InvalidValue(format!("bad variant {s:?}")))?;
            return Ok(VariantId::Sample(i));
        }
        if let Some(axis) = s.strip_prefix("mirrored_") {
            return Ok(VariantId::Mirrored(axis.parse()?));
        }
        Err(Error::InvalidValue(format!("unknown variant {s:?}")))
    }
}

/// One rater's forced choice on one (utterance, variant) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub utterance_id: String,
    pub variant_id: VariantId,
    pub rater_id: String,
    pub choice: Choice,
}

/// Mean of the binary annotations for one (utterance, variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualScore {
    pub utterance_id: String,
    pub variant_id: VariantId,
    pub score: f64,
    pub n_raters: usize,
}

/// Quality group g holds, for each utterance, its (g+1)-th most natural
/// non-deterministic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityGroup {
    pub group: usize,
    pub members: Vec<(String, VariantId)>,
}

/// One contrast of a logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub contrast: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Average the binary choices per (utterance, variant); ground truth
/// counts as 1. Duplicate (utterance, variant, rater) rows are rejected.
pub fn aggregate_scores(records: &[AnnotationRecord]) -> Result<Vec<PerceptualScore>> {
    let mut seen: BTreeSet<(&str, VariantId, &str)> = BTreeSet::new();
    let mut acc: BTreeMap<(&str, VariantId), (u64, u64)> = BTreeMap::new();
    for r in records {
        if !seen.insert((&r.utterance_id, r.variant_id, &r.rater_id)) {
            return Err(Error::InvalidValue(format!(
                "duplicate annotation: {} {} rater {}",
                r.utterance_id, r.variant_id, r.rater_id
            )));
        }
        let slot = acc.entry((&r.utterance_id, r.variant_id)).or_insert((0, 0));
        slot.0 += 1;
        if r.choice == Choice::GroundTruth {
            slot.1 += 1;
        }
    }
    if acc.is_empty() {
        return Err(Error::EmptyInput("no annotation records"));
    }
    Ok(acc
        .into_iter()
        .map(|((utt, variant), (n, gt))| PerceptualScore {
            utterance_id: utt.to_string(),
            variant_id: variant,
            score: gt as f64 / n as f64,
            n_raters: n as usize,
        })
        .collect())
}

/// Rank each utterance's non-deterministic samples from most natural
/// (lowest score) to least, then group by rank across utterances. Every
/// utterance must carry scores for the same sample set; ties break by
/// sample index.
pub fn rank_and_group(scores: &[PerceptualScore]) -> Result<Vec<QualityGroup>> {
    let mut per_utt: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();
    for s in scores {
        if let VariantId::Sample(i) = s.variant_id {
            per_utt.entry(&s.utterance_id).or_default().push((i, s.score));
        }
    }
    if per_utt.is_empty() {
        return Err(Error::EmptyInput("no sample-variant scores"));
    }
    let k = per_utt.values().map(|v| v.len()).max().unwrap();
    for (utt, samples) in &per_utt {
        let present: BTreeSet<u32> = samples.iter().map(|(i, _)| *i).collect();
        for want in 0..k as u32 {
            if !present.contains(&want) {
                return Err(Error::InvalidValue(format!(
                    "utterance {utt} is missing variant sample_{want}"
                )));
            }
        }
        if samples.len() != k {
            return Err(Error::InvalidValue(format!(
                "utterance {utt} has {} sample variants, expected {k}",
                samples.len()
            )));
        }
    }
    let mut groups: Vec<QualityGroup> = (0..k)
        .map(|g| QualityGroup {
            group: g,
            members: Vec::new(),
        })
        .collect();
    for (utt, mut samples) in per_utt {
        samples.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        for (rank, (idx, _)) in samples.into_iter().enumerate() {
            groups[rank]
                .members
                .push((utt.to_string(), VariantId::Sample(idx)));
        }
    }
    Ok(groups)
}

/// Backward-difference contrast coding for k ordered levels: k-1 columns,
/// column j compares level j+1 to level j. Each column sums to zero, and
/// the fitted coefficient j equals mean(level j+1) - mean(level j) on the
/// link scale.
pub fn sliding_difference_design(levels: usize) -> Result<Vec<Vec<f64>>> {
    if levels < 2 {
        return Err(Error::InvalidValue(
            "sliding difference coding needs at least 2 levels".into(),
        ));
    }
    let k = levels as f64;
    Ok((0..levels)
        .map(|level| {
            (0..levels - 1)
                .map(|j| {
                    if level <= j {
                        -((levels - 1 - j) as f64) / k
                    } else {
                        (j + 1) as f64 / k
                    }
                })
                .collect()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Logistic regression (IRLS + cluster bootstrap)
// ---------------------------------------------------------------------------

const IRLS_TOL: f64 = 1e-10;
const IRLS_MAX_ITER: usize = 100;
const BETA_DIVERGENCE_BOUND: f64 = 30.0;

/// Observations aggregated over identical covariate rows.
struct AggRow {
    x: Vec<f64>,
    trials: f64,
    successes: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maximum-likelihood logistic fit by iteratively reweighted least
/// squares on binomially aggregated rows.
fn irls(rows: &[AggRow], n_coef: usize) -> Result<Vec<f64>> {
    let total_trials: f64 = rows.iter().map(|r| r.trials).sum();
    let total_successes: f64 = rows.iter().map(|r| r.successes).sum();
    if total_successes == 0.0 || total_successes == total_trials {
        return Err(Error::Separation);
    }
    let mut beta = vec![0.0; n_coef];
    for _iter in 0..IRLS_MAX_ITER {
        let mut score = vec![0.0; n_coef];
        let mut hessian = vec![vec![0.0; n_coef]; n_coef];
        for row in rows {
            let eta: f64 = row.x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let resid = row.successes - row.trials * mu;
            let w = row.trials * mu * (1.0 - mu);
            for i in 0..n_coef {
                score[i] += row.x[i] * resid;
                for j in 0..n_coef {
                    hessian[i][j] += w * row.x[i] * row.x[j];
                }
            }
        }
        let delta = linalg::solve(hessian, score)?;
        let mut max_step = 0.0f64;
        for (b, d) in beta.iter_mut().zip(&delta) {
            *b += d;
            max_step = max_step.max(d.abs());
        }
        if beta.iter().any(|b| b.abs() > BETA_DIVERGENCE_BOUND) {
            return Err(Error::Separation);
        }
        if max_step < IRLS_TOL {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence(IRLS_MAX_ITER))
}

/// Key for aggregating identical covariate rows (bit-exact).
fn row_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Per-cluster pre-aggregation: covariate row -> (trials, successes).
type ClusterAgg = BTreeMap<Vec<u64>, (Vec<f64>, f64, f64)>;

fn aggregate_by_cluster(
    design: &[Vec<f64>],
    outcomes: &[bool],
    cluster_ids: &[String],
) -> Result<BTreeMap<String, ClusterAgg>> {
    if design.len() != outcomes.len() || design.len() != cluster_ids.len() {
        return Err(Error::ShapeMismatch {
            context: "logistic_regression: row counts",
            expected: design.len(),
            actual: outcomes.len().min(cluster_ids.len()),
        });
    }
    if design.is_empty() {
        return Err(Error::EmptyInput("logistic regression design"));
    }
    let n_coef = design[0].len();
    let mut clusters: BTreeMap<String, ClusterAgg> = BTreeMap::new();
    for ((x, &y), cid) in design.iter().zip(outcomes).zip(cluster_ids) {
        if x.len() != n_coef {
            return Err(Error::ShapeMismatch {
                context: "logistic_regression: design width",
                expected: n_coef,
                actual: x.len(),
            });
        }
        let slot = clusters
            .entry(cid.clone())
            .or_default()
            .entry(row_key(x))
            .or_insert_with(|| (x.clone(), 0.0, 0.0));
        slot.1 += 1.0;
        if y {
            slot.2 += 1.0;
        }
    }
    Ok(clusters)
}

fn rows_from_clusters<'a>(clusters: impl Iterator<Item = &'a ClusterAgg>) -> Vec<AggRow> {
    let mut merged: BTreeMap<Vec<u64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
    for cluster in clusters {
        for (key, (x, trials, successes)) in cluster {
            let slot = merged
                .entry(key.clone())
                .or_insert_with(|| (x.clone(), 0.0, 0.0));
            slot.1 += trials;
            slot.2 += successes;
        }
    }
    merged
        .into_values()
        .map(|(x, trials, successes)| AggRow {
            x,
            trials,
            successes,
        })
        .collect()
}

/// Point fit only (no uncertainty): design rows must include the
/// intercept column if one is wanted.
pub fn fit_logistic(design: &[Vec<f64>], outcomes: &[bool]) -> Result<Vec<f64>> {
    let ids = vec![String::new(); design.len()];
    let clusters = aggregate_by_cluster(design, outcomes, &ids)?;
    let rows = rows_from_clusters(clusters.values());
    irls(&rows, design[0].len())
}

/// Logistic regression with cluster-bootstrap standard errors: fit the
/// full data by IRLS, then resample whole clusters with replacement
/// `replicates` times. `names` labels the coefficients; z and the
/// two-sided p use the bootstrap standard error, and ci bounds are the
/// 2.5/97.5 percentile of the replicates.
pub fn logistic_regression(
    design: &[Vec<f64>],
    outcomes: &[bool],
    cluster_ids: &[String],
    names: &[String],
    replicates: usize,
    seed: u64,
) -> Result<Vec<RegressionResult>> {
    let clusters = aggregate_by_cluster(design, outcomes, cluster_ids)?;
    if clusters.len() < 2 {
        return Err(Error::InvalidValue(
            "cluster bootstrap needs at least 2 clusters".into(),
        ));
    }
    let n_coef = design[0].len();
    if names.len() != n_coef {
        return Err(Error::ShapeMismatch {
            context: "logistic_regression: coefficient names",
            expected: n_coef,
            actual: names.len(),
        });
    }
    let full_rows = rows_from_clusters(clusters.values());
    let beta = irls(&full_rows, n_coef)?;

    let cluster_list: Vec<&ClusterAgg> = clusters.values().collect();
    let mut rng = seeds::rng(seeds::derive(seed, "cluster-bootstrap"));
    let mut replicate_betas: Vec<Vec<f64>> = Vec::with_capacity(replicates);
    let mut failed = 0usize;
    for _ in 0..replicates {
        let resample: Vec<&ClusterAgg> = (0..cluster_list.len())
            .map(|_| cluster_list[rng.random_range(0..cluster_list.len())])
            .collect();
        let rows = rows_from_clusters(resample.into_iter());
        match irls(&rows, n_coef) {
            Ok(b) => replicate_betas.push(b),
            // Degenerate resamples (separation in a replicate) are
            // dropped; the replicate count below reflects survivors.
            Err(_) => failed += 1,
        }
    }
    if replicate_betas.len() < replicates / 2 {
        return Err(Error::NoConvergence(failed));
    }

    let m = replicate_betas.len() as f64;
    let mut results = Vec::with_capacity(n_coef);
    for j in 0..n_coef {
        let values: Vec<f64> = replicate_betas.iter().map(|b| b[j]).collect();
        let mean = stats::mean(&values);
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        let se = var.sqrt();
        let z = if se > 0.0 { beta[j] / se } else { f64::INFINITY };
        let mut sorted = values;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        results.push(RegressionResult {
            contrast: names[j].clone(),
            estimate: beta[j],
            std_error: se,
            z,
            p: stats::z_test_two_sided(z),
            ci_low: stats::quantile_sorted(&sorted, 0.025)?,
            ci_high: stats::quantile_sorted(&sorted, 0.975)?,
        });
    }
    Ok(results)
}

/// Percentile bootstrap confidence interval for the mean.
pub fn bootstrap_ci(
    values: &[f64],
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidValue(
            "bootstrap_ci needs at least 2 values".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidValue("level must be in (0, 1)".into()));
    }
    let mut rng = seeds::rng(seeds::derive(seed, "bootstrap-ci"));
    let mut means = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut acc = 0.0;
        for _ in 0..values.len() {
            acc += values[rng.random_range(0..values.len())];
        }
        means.push(acc / values.len() as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    Ok((
        stats::quantile_sorted(&means, alpha)?,
        stats::quantile_sorted(&means, 1.0 - alpha)?,
    ))
}

/// Pearson correlation between perceptual scores and each objective
/// metric over matched (utterance, variant) keys. Unmatched keys on
/// either side are an error.
pub fn correlate_with_metrics(
    scores: &[PerceptualScore],
    reports: &[MetricReport],
) -> Result<Vec<(String, CorrelationResult)>> {
    let score_map: BTreeMap<(String, String), f64> = scores
        .iter()
        .map(|s| {
            (
                (s.utterance_id.clone(), s.variant_id.to_string()),
                s.score,
            )
        })
        .collect();
    let report_map: BTreeMap<(String, String), &MetricReport> = reports
        .iter()
        .map(|r| ((r.utterance_id.clone(), r.variant.clone()), r))
        .collect();
    let unmatched: Vec<String> = score_map
        .keys()
        .filter(|k| !report_map.contains_key(*k))
        .chain(report_map.keys().filter(|k| !score_map.contains_key(*k)))
        .map(|(u, v)| format!("{u}/{v}"))
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::InvalidValue(format!(
            "unmatched (utterance, variant) keys: {}",
            unmatched.join(", ")
        )));
    }
    let mut score_vec = Vec::with_capacity(score_map.len());
    let mut mae_vec = Vec::with_capacity(score_map.len());
    let mut dtw_vec = Vec::with_capacity(score_map.len());
    let mut fdg_vec = Vec::with_capacity(score_map.len());
    let mut fdd_vec = Vec::with_capacity(score_map.len());
    for (key, &score) in &score_map {
        let r = report_map[key];
        score_vec.push(score);
        mae_vec.push(r.mae);
        dtw_vec.push(r.dtw);
        fdg_vec.push(r.fd_gaussian);
        fdd_vec.push(r.fd_discrete);
    }
    let mut out = Vec::with_capacity(4);
    for (name, values) in [
        ("mae", &mae_vec),
        ("dtw", &dtw_vec),
        ("fd_gaussian", &fdg_vec),
        ("fd_discrete", &fdd_vec),
    ] {
        out.push((name.to_string(), crate::metrics::pearson(values, &score_vec)?));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

/// Read annotations: `utterance_id,variant_id,rater_id,choice`.
pub fn read_annotations_csv(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        let line = line.trim();
        if lineno == 0 {
            if line != "utterance_id,variant_id,rater_id,choice" {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    message: format!(
                        "expected header 'utterance_id,variant_id,rater_id,choice', got {line:?}"
                    ),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        records.push(AnnotationRecord {
            utterance_id: fields[0].to_string(),
            variant_id: fields[1].parse()?,
            rater_id: fields[2].to_string(),
            choice: fields[3].parse()?,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("annotation file has no data rows"));
    }
    Ok(records)
}

pub fn write_annotations_csv(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("utterance_id,variant_id,rater_id,choice\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.utterance_id, r.variant_id, r.rater_id, r.choice
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

/// Write perceptual scores: `utterance_id,variant_id,score,n_raters`.
pub fn write_scores_csv(path: &Path, scores: &[PerceptualScore]) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("utterance_id,variant_id,score,n_raters\n");
    for s in scores {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.utterance_id, s.variant_id, s.score, s.n_raters
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<PerceptualScore>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut scores = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        let line = line.trim();
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: display.clone(),
                line: lineno + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse_err = |m: String| Error::Parse {
            path: display.clone(),
            line: lineno + 1,
            message: m,
        };
        scores.push(PerceptualScore {
            utterance_id: fields[0].to_string(),
            variant_id: fields[1].parse()?,
            score: fields[2]
                .parse()
                .map_err(|e| parse_err(format!("bad score: {e}")))?,
            n_raters: fields[3]
                .parse()
                .map_err(|e| parse_err(format!("bad n_raters: {e}")))?,
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("score file has no data rows"));
    }
    Ok(scores)
}

/// Write regression contrasts: `contrast,estimate,std_error,z,p`.
pub fn write_regression_csv(path: &Path, results: &[RegressionResult]) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("contrast,estimate,std_error,z,p\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.contrast, r.estimate, r.std_error, r.z, r.p
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

/// Write group means with bootstrap CIs: `group,mean_score,ci_low,ci_high`.
pub fn write_group_means_csv(
    path: &Path,
    rows: &[(String, f64, f64, f64)],
) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("group,mean_score,ci_low,ci_high\n");
    for (group, mean, lo, hi) in rows {
        out.push_str(&format!("{group},{mean},{lo},{hi}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

/// Write metric correlations: `metric,r,p`.
pub fn write_correlations_csv(
    path: &Path,
    rows: &[(String, CorrelationResult)],
) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::from("metric,r,p\n");
    for (metric, c) in rows {
        out.push_str(&format!("{metric},{},{}\n", c.r, c.p));
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}
