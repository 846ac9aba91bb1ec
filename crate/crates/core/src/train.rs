//! Training: L1 loss, exact backpropagation through time, Adam updates,
//! the epoch loop with best-validation-epoch selection, the
//! hyperparameter sweep, and a central finite-difference gradient check.
//!
//! Batch size is one utterance per Adam step. A training run is
//! single-threaded and bitwise reproducible from (seed, config, data).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::model::{
    self, run_forward, stochastic_input, GruCache, GruCellParams, ModelConfig, ModelParams,
    NoiseVector,
};
use crate::motion::PoseSequence;
use crate::seeds;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Optional global gradient-norm clip for divergent runs.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 50,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidValue("epochs must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidValue("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Adam accumulators over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One training utterance: matched features and target poses.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: FeatureSequence,
    pub target: PoseSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch mean training and validation losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn best_epoch(&self) -> Option<&EpochStats> {
        self.epochs
            .iter()
            .min_by(|a, b| a.val_loss.partial_cmp(&b.val_loss).unwrap())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        out
    }
}

/// Mean absolute difference over all T x 3 entries. The training loss and
/// the MAE metric share this definition.
pub fn l1_loss(pred: &PoseSequence, target: &PoseSequence) -> Result<f64> {
    crate::metrics::mae(pred, target)
}

// ---------------------------------------------------------------------------
// Backpropagation through time
// ---------------------------------------------------------------------------

pub struct BackwardResult {
    pub loss: f64,
    pub grads: ModelParams,
}

/// Backward pass of one direction over one layer. All sequences are in
/// scan order; `dh_out[s]` is the gradient flowing into h at scan
/// position s from the layers above, `dx[s]` accumulates the gradient on
/// this layer's input.
fn gru_backward(
    cell: &GruCellParams,
    grad: &mut GruCellParams,
    inputs: &[&[f64]],
    cache: &GruCache,
    dh_out: &[Vec<f64>],
    dx: &mut [Vec<f64>],
) {
    let t_len = inputs.len();
    let h_dim = cell.b_r.len();
    let zeros = vec![0.0; h_dim];
    let mut carry = vec![0.0; h_dim];
    for s in (0..t_len).rev() {
        let h_prev: &[f64] = if s == 0 { &zeros } else { &cache.h[s - 1] };
        let r = &cache.r[s];
        let u = &cache.u[s];
        let c = &cache.c[s];
        let hr = &cache.hr[s];

        let dh: Vec<f64> = dh_out[s].iter().zip(&carry).map(|(a, b)| a + b).collect();

        // h = u . h_prev + (1-u) . c
        let mut da_u = vec![0.0; h_dim];
        let mut da_c = vec![0.0; h_dim];
        for i in 0..h_dim {
            let du = dh[i] * (h_prev[i] - c[i]);
            da_u[i] = du * u[i] * (1.0 - u[i]);
            let dc = dh[i] * (1.0 - u[i]);
            da_c[i] = dc * (1.0 - c[i] * c[i]);
        }

        // c = tanh(W_c x + U_c (r . h_prev) + b_c)
        let mut dhr = vec![0.0; h_dim];
        cell.u_c.matvec_t_acc(&da_c, &mut dhr);
        let mut da_r = vec![0.0; h_dim];
        for i in 0..h_dim {
            let dr = dhr[i] * h_prev[i];
            da_r[i] = dr * r[i] * (1.0 - r[i]);
        }

        // Input gradient.
        cell.w_r.matvec_t_acc(&da_r, &mut dx[s]);
        cell.w_u.matvec_t_acc(&da_u, &mut dx[s]);
        cell.w_c.matvec_t_acc(&da_c, &mut dx[s]);

        // Gradient into h_{s-1}.
        let mut next_carry: Vec<f64> = (0..h_dim).map(|i| dh[i] * u[i] + dhr[i] * r[i]).collect();
        cell.u_r.matvec_t_acc(&da_r, &mut next_carry);
        cell.u_u.matvec_t_acc(&da_u, &mut next_carry);
        carry = next_carry;

        // Parameter gradients.
        grad.w_r.outer_acc(&da_r, inputs[s]);
        grad.w_u.outer_acc(&da_u, inputs[s]);
        grad.w_c.outer_acc(&da_c, inputs[s]);
        grad.u_r.outer_acc(&da_r, h_prev);
        grad.u_u.outer_acc(&da_u, h_prev);
        grad.u_c.outer_acc(&da_c, hr);
        for i in 0..h_dim {
            grad.b_r[i] += da_r[i];
            grad.b_u[i] += da_u[i];
            grad.b_c[i] += da_c[i];
        }
    }
}

/// L1 loss and its exact gradient with respect to every parameter. The
/// subgradient of |x| at x = 0 is taken as 0. For a stochastic model the
/// per-utterance noise vector must be supplied.
pub fn backward(
    params: &ModelParams,
    x: &FeatureSequence,
    target: &PoseSequence,
    noise: Option<&NoiseVector>,
) -> Result<BackwardResult> {
    if let Some(name) = params.first_non_finite() {
        return Err(Error::NonFinite(format!("model parameter {name}")));
    }
    if x.len() != target.len() {
        return Err(Error::ShapeMismatch {
            context: "backward: feature/target lengths",
            expected: x.len(),
            actual: target.len(),
        });
    }
    let input = match (params.config.stochastic, noise) {
        (true, Some(z)) => stochastic_input(x, z),
        (true, None) => {
            return Err(Error::InvalidValue(
                "stochastic model requires a noise vector".into(),
            ))
        }
        (false, None) => x.frames().to_vec(),
        (false, Some(_)) => {
            return Err(Error::InvalidValue(
                "deterministic model does not take a noise vector".into(),
            ))
        }
    };
    if input[0].len() != params.config.input_dim {
        return Err(Error::ShapeMismatch {
            context: "backward: input width",
            expected: params.config.input_dim,
            actual: input[0].len(),
        });
    }

    let t_len = input.len();
    let h_dim = params.config.hidden_size;
    let pass = run_forward(params, input);

    // Loss and dL/dy: sign(pred - target) / (3T), 0 at exact ties.
    let scale = 1.0 / (3 * t_len) as f64;
    let mut loss = 0.0;
    let mut dy: Vec<[f64; 3]> = Vec::with_capacity(t_len);
    for (pred, tgt) in pass.predictions.iter().zip(target.frames()) {
        let t3 = tgt.as_array();
        let mut row = [0.0; 3];
        for k in 0..3 {
            let diff = pred[k] - t3[k];
            loss += diff.abs() * scale;
            row[k] = if diff > 0.0 {
                scale
            } else if diff < 0.0 {
                -scale
            } else {
                0.0
            };
        }
        dy.push(row);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }

    let mut grads = ModelParams::zeros(params.config)?;

    // Fully-connected head.
    let mut d_top: Vec<Vec<f64>> = vec![vec![0.0; 2 * h_dim]; t_len];
    for t in 0..t_len {
        grads.fc_weight.outer_acc(&pass.top_output[t], &dy[t]);
        for k in 0..3 {
            grads.fc_bias[k] += dy[t][k];
        }
        params.fc_weight.matvec_acc(&dy[t], &mut d_top[t]);
    }

    // Layers, top to bottom.
    let mut d_out = d_top;
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let (fwd_cache, bwd_cache) = &pass.caches[l];
        let layer_input = &pass.layer_inputs[l];
        let in_dim = layer_input[0].len();

        let fwd_inputs: Vec<&[f64]> = layer_input.iter().map(|v| v.as_slice()).collect();
        let dh_fwd: Vec<Vec<f64>> = (0..t_len).map(|s| d_out[s][..h_dim].to_vec()).collect();
        let mut dx_fwd = vec![vec![0.0; in_dim]; t_len];
        gru_backward(
            &layer.fwd,
            &mut grads.layers[l].fwd,
            &fwd_inputs,
            fwd_cache,
            &dh_fwd,
            &mut dx_fwd,
        );

        let bwd_inputs: Vec<&[f64]> = layer_input.iter().rev().map(|v| v.as_slice()).collect();
        let dh_bwd: Vec<Vec<f64>> = (0..t_len)
            .map(|s| d_out[t_len - 1 - s][h_dim..].to_vec())
            .collect();
        let mut dx_bwd = vec![vec![0.0; in_dim]; t_len];
        gru_backward(
            &layer.bwd,
            &mut grads.layers[l].bwd,
            &bwd_inputs,
            bwd_cache,
            &dh_bwd,
            &mut dx_bwd,
        );

        // Gradient on this layer's input, back in time order.
        d_out = (0..t_len)
            .map(|t| {
                (0..in_dim)
                    .map(|i| dx_fwd[t][i] + dx_bwd[t_len - 1 - t][i])
                    .collect()
            })
            .collect();
    }

    Ok(BackwardResult { loss, grads })
}

/// One bias-corrected Adam update; increments the step counter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let mut flat = params.to_flat();
    let gflat = grads.to_flat();
    if gflat.len() != flat.len() || state.m.len() != flat.len() {
        return Err(Error::ShapeMismatch {
            context: "adam_step: parameter count",
            expected: flat.len(),
            actual: gflat.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..flat.len() {
        let g = gflat[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        flat[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    params.copy_from_flat(&flat)
}

fn clip_gradients(grads: &mut ModelParams, max_norm: f64) {
    let mut sq = 0.0;
    grads.visit(|_, slice| {
        for v in slice {
            sq += v * v;
        }
    });
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.for_each_value_mut(|v| *v *= scale);
    }
}

fn validation_loss(
    params: &ModelParams,
    val_set: &[TrainSample],
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for (idx, sample) in val_set.iter().enumerate() {
        let pred = if params.config.stochastic {
            // Fixed per-utterance validation noise keeps epochs comparable.
            let z = model::sample_noise(seeds::derive_indexed(seed, "val-noise", idx as u64));
            model::forward_stochastic(params, &sample.features, &z)?
        } else {
            model::forward_deterministic(params, &sample.features)?
        };
        total += l1_loss(&pred, &sample.target)?;
    }
    Ok(total / val_set.len() as f64)
}

/// Train a model: per-utterance Adam steps over shuffled epochs, fresh
/// noise per utterance per epoch for the stochastic variant, and the
/// parameters from the epoch with the lowest validation loss returned.
pub fn train(
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    model_cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptyInput("validation set"));
    }
    for s in train_set.iter().chain(val_set.iter()) {
        if s.features.len() != s.target.len() {
            return Err(Error::ShapeMismatch {
                context: "train: sample feature/pose lengths",
                expected: s.features.len(),
                actual: s.target.len(),
            });
        }
    }

    let mut params = ModelParams::init(model_cfg, seeds::derive(cfg.seed, "init"))?;
    let mut adam = AdamState::new(params.n_params());
    let n = train_set.len() as u64;

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams)> = None;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = seeds::rng(seeds::derive_indexed(cfg.seed, "epoch-order", epoch as u64));
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for &idx in &order {
            let sample = &train_set[idx];
            let noise = if model_cfg.stochastic {
                Some(model::sample_noise(seeds::derive_indexed(
                    cfg.seed,
                    "train-noise",
                    epoch as u64 * n + idx as u64,
                )))
            } else {
                None
            };
            let mut res = backward(&params, &sample.features, &sample.target, noise.as_ref())?;
            if !res.loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            epoch_loss += res.loss;
            if let Some(max_norm) = cfg.clip_norm {
                clip_gradients(&mut res.grads, max_norm);
            }
            adam_step(&mut params, &res.grads, &mut adam, cfg.learning_rate)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = validation_loss(&params, val_set, cfg.seed)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, params.clone()));
        }
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}

/// One grid point's outcome in a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub val_loss: f64,
    pub n_params: usize,
}

pub struct SweepResult {
    pub best_config: ModelConfig,
    pub params: ModelParams,
    pub history: TrainHistory,
    pub entries: Vec<SweepEntry>,
}

/// The sweep grid: GRU layers x hidden-state features.
pub const SWEEP_GRID: [(usize, usize); 9] = [
    (1, 16),
    (1, 32),
    (1, 64),
    (2, 16),
    (2, 32),
    (2, 64),
    (3, 16),
    (3, 32),
    (3, 64),
];

/// Train every grid configuration and keep the one with the lowest
/// validation loss; ties break toward fewer parameters.
pub fn hyperparameter_sweep(
    cfg: &TrainConfig,
    stochastic: bool,
    grid: &[(usize, usize)],
    train_set: &[TrainSample],
    val_set: &[TrainSample],
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    let mut entries = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize, ModelConfig, ModelParams, TrainHistory)> = None;
    for &(layers, hidden) in grid {
        let model_cfg = if stochastic {
            ModelConfig::stochastic(layers, hidden)
        } else {
            ModelConfig::deterministic(layers, hidden)
        };
        let (params, history) = train(cfg, model_cfg, train_set, val_set)?;
        let val_loss = history.best_epoch().expect("nonempty history").val_loss;
        let n_params = params.n_params();
        entries.push(SweepEntry {
            num_layers: layers,
            hidden_size: hidden,
            val_loss,
            n_params,
        });
        let better = match &best {
            None => true,
            Some((best_loss, best_n, ..)) => {
                val_loss < *best_loss || (val_loss == *best_loss && n_params < *best_n)
            }
        };
        if better {
            best = Some((val_loss, n_params, model_cfg, params, history));
        }
    }
    let (_, _, best_config, params, history) = best.expect("nonempty grid");
    Ok(SweepResult {
        best_config,
        params,
        history,
        entries,
    })
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// Max relative error between the analytic gradient and central finite
/// differences over every parameter of a small seeded instance. Targets
/// are offset from the predictions by at least `offset_lo` so the L1
/// kinks stay out of reach of the h = 1e-5 probes.
///
/// The relative error is |g_a - g_n| / max(1e-6, |g_a| + |g_n|). Central
/// differences at h = 1e-5 on an O(0.1) loss carry roughly 1e-11 of
/// rounding noise in 64-bit arithmetic, so gradients below that scale
/// cannot be compared relatively; the denominator floor absorbs them
/// while leaving every measurable parameter's comparison untouched.
pub fn gradient_check_with_offset(
    model_cfg: ModelConfig,
    seed: u64,
    t_len: usize,
    offset_lo: f64,
    offset_hi: f64,
) -> Result<f64> {
    use rand::Rng;
    const H_STEP: f64 = 1e-5;

    let params = ModelParams::init(model_cfg, seeds::derive(seed, "gc-params"))?;
    let mut rng = seeds::rng(seeds::derive(seed, "gc-data"));
    let x = FeatureSequence::new(
        (0..t_len)
            .map(|_| {
                (0..crate::features::FEATURE_DIM)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect(),
    )?;
    let noise = if model_cfg.stochastic {
        Some(model::sample_noise(seeds::derive(seed, "gc-noise")))
    } else {
        None
    };

    // Target = prediction +- offset, keeping every |pred - target| away
    // from the kink at 0.
    let pred = match &noise {
        Some(z) => model::forward_stochastic(&params, &x, z)?,
        None => model::forward_deterministic(&params, &x)?,
    };
    let target = PoseSequence::new(
        pred.frames()
            .iter()
            .map(|f| {
                let mut a = f.as_array();
                for v in &mut a {
                    let mag = rng.random_range(offset_lo..offset_hi);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *v += sign * mag;
                }
                crate::motion::PoseFrame::new(a[0], a[1], a[2])
            })
            .collect(),
    )?;

    let analytic = backward(&params, &x, &target, noise.as_ref())?.grads.to_flat();
    let base_flat = params.to_flat();
    let mut probe = params.clone();

    let mut loss_at = |flat: &[f64]| -> Result<f64> {
        probe.copy_from_flat(flat)?;
        let pred = match &noise {
            Some(z) => model::forward_stochastic(&probe, &x, z)?,
            None => model::forward_deterministic(&probe, &x)?,
        };
        l1_loss(&pred, &target)
    };

    let mut max_rel = 0.0f64;
    let mut flat = base_flat.clone();
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + H_STEP;
        let plus = loss_at(&flat)?;
        flat[i] = orig - H_STEP;
        let minus = loss_at(&flat)?;
        flat[i] = orig;
        let numeric = (plus - minus) / (2.0 * H_STEP);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

/// Gradient check with the default kink-avoiding target offsets.
pub fn gradient_check(model_cfg: ModelConfig, seed: u64, t_len: usize) -> Result<f64> {
    gradient_check_with_offset(model_cfg, seed, t_len, 0.1, 0.5)
}
