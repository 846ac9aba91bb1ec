//! The sequence model: a multi-layer bidirectional GRU followed by a
//! per-frame fully-connected projection onto the 3 head-pose parameters.
//!
//! Gate convention (pinned for the whole crate):
//!
//! ```text
//! r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//! u_t = sigmoid(W_u x_t + U_u h_{t-1} + b_u)
//! c_t = tanh(W_c x_t + U_c (r_t . h_{t-1}) + b_c)
//! h_t = u_t . h_{t-1} + (1 - u_t) . c_t         h_{-1} = 0
//! ```
//!
//! Layer l >= 1 consumes the concatenated bidirectional output of layer
//! l-1 (width 2*hidden). The deterministic model takes the 128-wide
//! acoustic features; the stochastic model concatenates one 128-wide
//! standard-normal noise vector per utterance to every frame (width 256),
//! so one utterance maps to as many motions as there are noise draws.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, FEATURE_DIM};
use crate::linalg::Mat;
use crate::motion::{PoseFrame, PoseSequence};
use crate::seeds;

/// Dimensionality of the per-utterance noise vector; matches the
/// acoustic feature width.
pub const NOISE_DIM: usize = FEATURE_DIM;

/// Pose parameters predicted per frame.
pub const OUTPUT_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub bidirectional: bool,
    pub stochastic: bool,
}

impl ModelConfig {
    /// Deterministic model: 128-wide input.
    pub fn deterministic(num_layers: usize, hidden_size: usize) -> Self {
        ModelConfig {
            num_layers,
            hidden_size,
            input_dim: FEATURE_DIM,
            output_dim: OUTPUT_DIM,
            bidirectional: true,
            stochastic: false,
        }
    }

    /// Noise-conditioned model: features plus noise, 256-wide input.
    pub fn stochastic(num_layers: usize, hidden_size: usize) -> Self {
        ModelConfig {
            num_layers,
            hidden_size,
            input_dim: FEATURE_DIM + NOISE_DIM,
            output_dim: OUTPUT_DIM,
            bidirectional: true,
            stochastic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_size == 0 {
            return Err(Error::InvalidValue(
                "num_layers and hidden_size must be positive".into(),
            ));
        }
        if self.output_dim != OUTPUT_DIM {
            return Err(Error::InvalidValue(format!(
                "output_dim must be {OUTPUT_DIM}"
            )));
        }
        if !self.bidirectional {
            return Err(Error::InvalidValue("model is always bidirectional".into()));
        }
        let expected = if self.stochastic {
            FEATURE_DIM + NOISE_DIM
        } else {
            FEATURE_DIM
        };
        if self.input_dim != expected {
            return Err(Error::ShapeMismatch {
                context: "model input_dim",
                expected,
                actual: self.input_dim,
            });
        }
        Ok(())
    }

    /// Input width of a given layer: raw input for layer 0, concatenated
    /// bidirectional output below otherwise.
    fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            2 * self.hidden_size
        }
    }
}

/// One direction's GRU weights for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub w_r: Mat,
    pub w_u: Mat,
    pub w_c: Mat,
    pub u_r: Mat,
    pub u_u: Mat,
    pub u_c: Mat,
    pub b_r: Vec<f64>,
    pub b_u: Vec<f64>,
    pub b_c: Vec<f64>,
}

impl GruCellParams {
    fn zeros(hidden: usize, input: usize) -> Self {
        GruCellParams {
            w_r: Mat::zeros(hidden, input),
            w_u: Mat::zeros(hidden, input),
            w_c: Mat::zeros(hidden, input),
            u_r: Mat::zeros(hidden, hidden),
            u_u: Mat::zeros(hidden, hidden),
            u_c: Mat::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            b_u: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
        }
    }

    fn tensors(&self) -> [(&'static str, &[f64]); 9] {
        [
            ("w_r", &self.w_r.data),
            ("w_u", &self.w_u.data),
            ("w_c", &self.w_c.data),
            ("u_r", &self.u_r.data),
            ("u_u", &self.u_u.data),
            ("u_c", &self.u_c.data),
            ("b_r", &self.b_r),
            ("b_u", &self.b_u),
            ("b_c", &self.b_c),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 9] {
        [
            ("w_r", self.w_r.data.as_mut_slice()),
            ("w_u", self.w_u.data.as_mut_slice()),
            ("w_c", self.w_c.data.as_mut_slice()),
            ("u_r", self.u_r.data.as_mut_slice()),
            ("u_u", self.u_u.data.as_mut_slice()),
            ("u_c", self.u_c.data.as_mut_slice()),
            ("b_r", self.b_r.as_mut_slice()),
            ("b_u", self.b_u.as_mut_slice()),
            ("b_c", self.b_c.as_mut_slice()),
        ]
    }
}

/// Forward- and backward-direction weights for one stacked layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub fwd: GruCellParams,
    pub bwd: GruCellParams,
}

/// All weights of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<LayerParams>,
    /// Fully-connected head: (2*hidden x 3) weight applied as
    /// y = weight^T h + bias.
    pub fc_weight: Mat,
    pub fc_bias: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters (also the gradient container shape).
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let layers = (0..config.num_layers)
            .map(|l| {
                let d = config.layer_input_dim(l);
                LayerParams {
                    fwd: GruCellParams::zeros(h, d),
                    bwd: GruCellParams::zeros(h, d),
                }
            })
            .collect();
        Ok(ModelParams {
            config,
            layers,
            fc_weight: Mat::zeros(2 * h, OUTPUT_DIM),
            fc_bias: vec![0.0; OUTPUT_DIM],
        })
    }

    /// Seeded uniform initialization in [-1/sqrt(hidden), +1/sqrt(hidden)].
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let bound = 1.0 / (config.hidden_size as f64).sqrt();
        let mut rng = seeds::rng(seed);
        params.for_each_value_mut(|v| *v = rng.random_range(-bound..bound));
        Ok(params)
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit(|_, slice| n += slice.len());
        n
    }

    /// Visit every tensor in a fixed order with a stable name.
    pub fn visit(&self, mut f: impl FnMut(&str, &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                for (name, slice) in cell.tensors() {
                    f(&format!("layers.{l}.{dir}.{name}"), slice);
                }
            }
        }
        f("fc.weight", &self.fc_weight.data);
        f("fc.bias", &self.fc_bias);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (dir, cell) in [("fwd", &mut layer.fwd), ("bwd", &mut layer.bwd)] {
                for (name, slice) in cell.tensors_mut() {
                    f(&format!("layers.{l}.{dir}.{name}"), slice);
                }
            }
        }
        f("fc.weight", self.fc_weight.data.as_mut_slice());
        f("fc.bias", self.fc_bias.as_mut_slice());
    }

    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.visit_mut(|_, slice| {
            for v in slice.iter_mut() {
                f(v);
            }
        });
    }

    /// Flatten all parameters in visit order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.visit(|_, slice| out.extend_from_slice(slice));
        out
    }

    /// Overwrite all parameters from a flat vector in visit order.
    pub fn copy_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::ShapeMismatch {
                context: "flat parameter vector",
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut off = 0;
        self.visit_mut(|_, slice| {
            slice.copy_from_slice(&flat[off..off + slice.len()]);
            off += slice.len();
        });
        Ok(())
    }

    /// Name of the first non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        let mut found = None;
        self.visit(|name, slice| {
            if found.is_none() && slice.iter().any(|v| !v.is_finite()) {
                found = Some(name.to_string());
            }
        });
        found
    }
}

/// Per-utterance standard-normal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseVector {
    values: Vec<f64>,
}

impl NoiseVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != NOISE_DIM {
            return Err(Error::ShapeMismatch {
                context: "noise vector length",
                expected: NOISE_DIM,
                actual: values.len(),
            });
        }
        Ok(NoiseVector { values })
    }

    pub fn zeros() -> Self {
        NoiseVector {
            values: vec![0.0; NOISE_DIM],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draw a 128-dimensional standard-normal sample from a seeded generator
/// (Box-Muller over ChaCha8).
pub fn sample_noise(rng_seed: u64) -> NoiseVector {
    let mut rng = seeds::rng(rng_seed);
    let mut values = Vec::with_capacity(NOISE_DIM);
    while values.len() < NOISE_DIM {
        let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let u2: f64 = rng.random();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        values.push(radius * angle.cos());
        if values.len() < NOISE_DIM {
            values.push(radius * angle.sin());
        }
    }
    NoiseVector { values }
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one direction over one layer, in scan order, kept for
/// backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub r: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub hr: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

/// Run one direction over `inputs` given in scan order.
pub(crate) fn gru_scan(cell: &GruCellParams, inputs: &[&[f64]]) -> GruCache {
    let t_len = inputs.len();
    let h_dim = cell.b_r.len();
    let mut cache = GruCache {
        r: Vec::with_capacity(t_len),
        u: Vec::with_capacity(t_len),
        c: Vec::with_capacity(t_len),
        hr: Vec::with_capacity(t_len),
        h: Vec::with_capacity(t_len),
    };
    let mut h_prev = vec![0.0; h_dim];
    for &x in inputs {
        let mut a_r = cell.b_r.clone();
        cell.w_r.matvec_acc(x, &mut a_r);
        cell.u_r.matvec_acc(&h_prev, &mut a_r);
        let r: Vec<f64> = a_r.iter().map(|&v| sigmoid(v)).collect();

        let mut a_u = cell.b_u.clone();
        cell.w_u.matvec_acc(x, &mut a_u);
        cell.u_u.matvec_acc(&h_prev, &mut a_u);
        let u: Vec<f64> = a_u.iter().map(|&v| sigmoid(v)).collect();

        let hr: Vec<f64> = r.iter().zip(&h_prev).map(|(ri, hi)| ri * hi).collect();
        let mut a_c = cell.b_c.clone();
        cell.w_c.matvec_acc(x, &mut a_c);
        cell.u_c.matvec_acc(&hr, &mut a_c);
        let c: Vec<f64> = a_c.iter().map(|&v| v.tanh()).collect();

        let h: Vec<f64> = (0..h_dim)
            .map(|i| u[i] * h_prev[i] + (1.0 - u[i]) * c[i])
            .collect();

        cache.r.push(r);
        cache.u.push(u);
        cache.c.push(c);
        cache.hr.push(hr);
        h_prev = h.clone();
        cache.h.push(h);
    }
    cache
}

/// Everything the backward pass needs from a forward run.
pub(crate) struct ForwardPass {
    /// Input sequence to each layer, in time order (layer 0 holds the raw
    /// model input).
    pub layer_inputs: Vec<Vec<Vec<f64>>>,
    /// (forward-direction, backward-direction) caches per layer.
    pub caches: Vec<(GruCache, GruCache)>,
    /// FC input per frame (top-layer bidirectional output), time order.
    pub top_output: Vec<Vec<f64>>,
    /// Final predictions, time order.
    pub predictions: Vec<[f64; 3]>,
}

pub(crate) fn run_forward(params: &ModelParams, input: Vec<Vec<f64>>) -> ForwardPass {
    let t_len = input.len();
    let h_dim = params.config.hidden_size;
    let mut layer_inputs = vec![input];
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let seq = layer_inputs.last().unwrap();
        let fwd_inputs: Vec<&[f64]> = seq.iter().map(|v| v.as_slice()).collect();
        let fwd = gru_scan(&layer.fwd, &fwd_inputs);
        let bwd_inputs: Vec<&[f64]> = seq.iter().rev().map(|v| v.as_slice()).collect();
        let bwd = gru_scan(&layer.bwd, &bwd_inputs);
        let output: Vec<Vec<f64>> = (0..t_len)
            .map(|t| {
                let mut o = Vec::with_capacity(2 * h_dim);
                o.extend_from_slice(&fwd.h[t]);
                o.extend_from_slice(&bwd.h[t_len - 1 - t]);
                o
            })
            .collect();
        caches.push((fwd, bwd));
        layer_inputs.push(output);
    }
    let top_output = layer_inputs.pop().unwrap();
    let predictions = top_output
        .iter()
        .map(|o| {
            let mut y = [params.fc_bias[0], params.fc_bias[1], params.fc_bias[2]];
            params.fc_weight.matvec_t_acc(o, &mut y);
            y
        })
        .collect();
    ForwardPass {
        layer_inputs,
        caches,
        top_output,
        predictions,
    }
}

fn check_forward_inputs(params: &ModelParams, width: usize) -> Result<()> {
    if let Some(name) = params.first_non_finite() {
        return Err(Error::NonFinite(format!("model parameter {name}")));
    }
    if width != params.config.input_dim {
        return Err(Error::ShapeMismatch {
            context: "forward input width",
            expected: params.config.input_dim,
            actual: width,
        });
    }
    Ok(())
}

fn predictions_to_sequence(preds: Vec<[f64; 3]>) -> Result<PoseSequence> {
    PoseSequence::new(
        preds
            .into_iter()
            .map(|y| PoseFrame::new(y[0], y[1], y[2]))
            .collect(),
    )
}

/// Deterministic forward map from acoustic features to a pose sequence.
pub fn forward_deterministic(params: &ModelParams, x: &FeatureSequence) -> Result<PoseSequence> {
    if params.config.stochastic {
        return Err(Error::InvalidValue(
            "stochastic model requires a noise vector; use forward_stochastic".into(),
        ));
    }
    check_forward_inputs(params, x.width())?;
    let input: Vec<Vec<f64>> = x.frames().to_vec();
    predictions_to_sequence(run_forward(params, input).predictions)
}

/// Build the stochastic model's per-frame input: features with the noise
/// vector broadcast to every time step.
pub(crate) fn stochastic_input(x: &FeatureSequence, z: &NoiseVector) -> Vec<Vec<f64>> {
    x.frames()
        .iter()
        .map(|frame| {
            let mut row = Vec::with_capacity(frame.len() + z.values.len());
            row.extend_from_slice(frame);
            row.extend_from_slice(&z.values);
            row
        })
        .collect()
}

/// Noise-conditioned forward map.
pub fn forward_stochastic(
    params: &ModelParams,
    x: &FeatureSequence,
    z: &NoiseVector,
) -> Result<PoseSequence> {
    if !params.config.stochastic {
        return Err(Error::NotStochastic);
    }
    check_forward_inputs(params, x.width() + z.values.len())?;
    predictions_to_sequence(run_forward(params, stochastic_input(x, z)).predictions)
}

/// Generate k motions for one utterance; noise seeds are derived from
/// (seed, sample index), so the list is reproducible.
pub fn generate_k_samples(
    params: &ModelParams,
    x: &FeatureSequence,
    k: usize,
    seed: u64,
) -> Result<Vec<PoseSequence>> {
    if !params.config.stochastic {
        return Err(Error::NotStochastic);
    }
    if k == 0 {
        return Err(Error::InvalidValue("k must be at least 1".into()));
    }
    (0..k)
        .map(|i| {
            let z = sample_noise(seeds::derive_indexed(seed, "sample-noise", i as u64));
            forward_stochastic(params, x, &z)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TensorJson {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointJson {
    version: String,
    config: ModelConfig,
    tensors: BTreeMap<String, TensorJson>,
}

/// Save a checkpoint: JSON with the config and one named, shaped, flat
/// array per tensor. Version "v1".
pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let display = path.display().to_string();
    let h = params.config.hidden_size;
    let mut tensors = BTreeMap::new();
    for (l, layer) in params.layers.iter().enumerate() {
        let d = params.config.layer_input_dim(l);
        for (dir, cell) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
            for (name, slice) in cell.tensors() {
                let shape = if name.starts_with("w_") {
                    vec![h, d]
                } else if name.starts_with("u_") {
                    vec![h, h]
                } else {
                    vec![h]
                };
                tensors.insert(
                    format!("layers.{l}.{dir}.{name}"),
                    TensorJson {
                        shape,
                        data: slice.to_vec(),
                    },
                );
            }
        }
    }
    tensors.insert(
        "fc.weight".to_string(),
        TensorJson {
            shape: vec![2 * h, OUTPUT_DIM],
            data: params.fc_weight.data.clone(),
        },
    );
    tensors.insert(
        "fc.bias".to_string(),
        TensorJson {
            shape: vec![OUTPUT_DIM],
            data: params.fc_bias.clone(),
        },
    );
    let doc = CheckpointJson {
        version: "v1".to_string(),
        config: params.config,
        tensors,
    };
    let json = serde_json::to_string(&doc).map_err(|e| Error::json(&display, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(&display, e))
}

/// Load a v1 checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let doc: CheckpointJson = serde_json::from_str(&text).map_err(|e| Error::json(&display, e))?;
    if doc.version != "v1" {
        return Err(Error::InvalidValue(format!(
            "{display}: unsupported checkpoint version {:?}",
            doc.version
        )));
    }
    let mut params = ModelParams::zeros(doc.config)?;
    let mut missing = Vec::new();
    params.visit_mut(|name, slice| match doc.tensors.get(name) {
        Some(t) => {
            let n: usize = t.shape.iter().product();
            if n == slice.len() && t.data.len() == n {
                slice.copy_from_slice(&t.data);
            } else {
                missing.push(format!("{name} (shape mismatch)"));
            }
        }
        None => missing.push(name.to_string()),
    });
    if !missing.is_empty() {
        return Err(Error::InvalidValue(format!(
            "{display}: bad checkpoint tensors: {}",
            missing.join(", ")
        )));
    }
    Ok(params)
}
