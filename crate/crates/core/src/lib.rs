//! # hml-core
//!
//! A workbench for speech-driven head-motion synthesis and evaluation.
//!
//! The crate covers the full experimental loop at desk scale:
//!
//! - **motion**: head-pose sequences (3 rotation parameters per frame at
//!   25 fps), per-video mean normalization, and the axis-mirroring
//!   transform used as a metric-adversarial stimulus.
//! - **features**: 16 kHz audio to 64-band log-mel spectrograms (40 ms
//!   Hann window, one frame per video frame) and to the 128-dimensional
//!   delta/delta-delta feature stack the models consume.
//! - **model**: a multi-layer bidirectional GRU with a fully-connected
//!   head, in a deterministic form and a noise-conditioned form that maps
//!   one utterance to many motions.
//! - **train**: L1-loss training via backpropagation through time with
//!   Adam, hyperparameter sweeps, and a finite-difference gradient check.
//! - **metrics**: MAE, dynamic time warping, discrete and Gaussian
//!   Frechet distances, and Pearson correlation with significance.
//! - **diversity**: the nearest-neighbor Shannon-index diversity score of
//!   generated motion corpora against a training set.
//! - **perception**: forced-choice rating ingestion, perceptual scores,
//!   quality-group ranking, logistic regression with cluster-bootstrap
//!   errors, and bootstrap confidence intervals.
//! - **dataset**: corpus manifests, video-level splits, utterance
//!   segmentation, and a synthetic audio+pose corpus generator.
//!
//! All randomness flows from explicit seeds (see [`seeds`]); every
//! operation is deterministic given its inputs.

// Indexed loops are the clearest form for the dense numeric kernels here.
#![allow(clippy::needless_range_loop)]

pub mod dataset;
pub mod diversity;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod perception;
pub mod seeds;
pub mod stats;
pub mod train;

pub use error::{Error, Result};
pub use features::{FeatureNormalizer, FeatureSequence, MelSpectrogram, Waveform};
pub use metrics::{CorrelationResult, MetricReport};
pub use model::{ModelConfig, ModelParams, NoiseVector};
pub use motion::{Axis, PoseFrame, PoseSequence};
pub use perception::{AnnotationRecord, PerceptualScore, QualityGroup, RegressionResult};
