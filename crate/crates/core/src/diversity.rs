//! Nearest-neighbor Shannon-index diversity of generated motion corpora.
//!
//! Each training sequence is flattened to a T*3 vector; every prediction
//! is assigned the ID of its nearest training sequence (Euclidean
//! distance, exact linear scan, ties broken toward the lower ID), and the
//! diversity score is the base-2 Shannon entropy of the resulting ID
//! histogram.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::PoseSequence;

/// Exact nearest-neighbor index over a training corpus.
#[derive(Debug, Clone)]
pub struct NnIndex {
    seq_len: usize,
    vectors: Vec<Vec<f64>>,
}

/// Histogram of nearest-neighbor IDs; one count per training sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl NnIndex {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn sequence_len(&self) -> usize {
        self.seq_len
    }
}

impl NnHistogram {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Build the index. All training sequences must have the same length.
pub fn fit_nn_index(train: &[PoseSequence]) -> Result<NnIndex> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training corpus for nn index"));
    }
    let seq_len = train[0].len();
    for (i, s) in train.iter().enumerate() {
        if s.len() != seq_len {
            return Err(Error::ShapeMismatch {
                context: "fit_nn_index: sequence length",
                expected: seq_len,
                actual: train[i].len(),
            });
        }
    }
    Ok(NnIndex {
        seq_len,
        vectors: train.iter().map(|s| s.flattened()).collect(),
    })
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest training ID for one prediction.
pub fn nearest_id(index: &NnIndex, pred: &PoseSequence) -> Result<usize> {
    if pred.len() != index.seq_len {
        return Err(Error::ShapeMismatch {
            context: "classify: prediction length",
            expected: index.seq_len,
            actual: pred.len(),
        });
    }
    let v = pred.flattened();
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (id, train_v) in index.vectors.iter().enumerate() {
        let d = squared_dist(&v, train_v);
        // Strict inequality keeps the lower ID on ties.
        if d < best_d {
            best_d = d;
            best = id;
        }
    }
    Ok(best)
}

/// Assign each prediction its nearest training ID and histogram the IDs.
pub fn classify(index: &NnIndex, preds: &[PoseSequence]) -> Result<NnHistogram> {
    let mut counts = vec![0u64; index.len()];
    for p in preds {
        counts[nearest_id(index, p)?] += 1;
    }
    Ok(NnHistogram {
        total: counts.iter().sum(),
        counts,
    })
}

/// Shannon index in bits: H = -sum p_i log2 p_i over nonzero bins.
pub fn shannon_index(h: &NnHistogram) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::EmptyInput("empty histogram"));
    }
    let total = h.total as f64;
    let mut entropy = 0.0;
    for &c in &h.counts {
        if c > 0 {
            let p = c as f64 / total;
            entropy -= p * p.log2();
        }
    }
    Ok(entropy)
}

/// shannon_index(classify(index, preds)).
pub fn diversity_score(index: &NnIndex, preds: &[PoseSequence]) -> Result<f64> {
    shannon_index(&classify(index, preds)?)
}

/// Build a histogram directly from counts (for ingestion and tests).
pub fn histogram_from_counts(counts: Vec<u64>) -> NnHistogram {
    NnHistogram {
        total: counts.iter().sum(),
        counts,
    }
}
