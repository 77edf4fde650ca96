//! Dense feed-forward function approximator trained by backpropagation with
//! the Adam optimizer.
//!
//! Hidden layers use rectifier activations, the output layer is linear. The
//! training loss is the mean squared error between per-sample targets and
//! the output selected by each sample's action index; gradients flow only
//! through the selected outputs. Analytic gradients are checkable against
//! central finite differences via [`finite_diff_check`].

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

const CHECKPOINT_MAGIC: &[u8; 4] = b"DNET";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("need at least two layer sizes, all nonzero")]
    BadSizes,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("layer shapes differ between networks")]
    ShapeMismatch,
    #[error("batch fields have inconsistent lengths")]
    BadBatch,
    #[error("action index {action} out of range for output dimension {dim}")]
    BadAction { action: usize, dim: usize },
    #[error("targets must be finite")]
    NonFiniteTarget,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One training mini-batch: inputs, the action column each sample trains,
/// and the regression target for that column.
#[derive(Debug)]
pub struct Batch<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub actions: Vec<usize>,
    pub targets: Vec<f64>,
}

impl<'a> Batch<'a> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Per-layer gradient accumulators, shaped like the network parameters.
#[derive(Debug, Clone)]
pub struct Grads {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Fully-connected network. `weights[l]` is row-major with shape
/// `sizes[l] x sizes[l+1]` (input index selects the row).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl DenseNet {
    /// Initialize with zero-mean Gaussian weights scaled by fan-in
    /// (variance 2/fan-in on rectifier layers, 1/fan-in on the linear
    /// output layer) and zero biases.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NetError::BadSizes);
        }
        let n_layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let fan_in = sizes[l];
            let fan_out = sizes[l + 1];
            let variance = if l + 1 < n_layers {
                2.0 / fan_in as f64
            } else {
                1.0 / fan_in as f64
            };
            let normal = Normal::new(0.0, variance.sqrt()).expect("finite std");
            weights.push((0..fan_in * fan_out).map(|_| normal.sample(rng)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Build a network from explicit parameters (mainly for tests and
    /// checkpoint loading).
    pub fn from_parts(
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, NetError> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NetError::BadSizes);
        }
        let n_layers = sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(NetError::ShapeMismatch);
        }
        for l in 0..n_layers {
            if weights[l].len() != sizes[l] * sizes[l + 1] || biases[l].len() != sizes[l + 1] {
                return Err(NetError::ShapeMismatch);
            }
        }
        Ok(Self {
            sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `out += x^T W` for one row; skips zero inputs, which makes one-hot
    /// encodings and rectified activations cheap.
    fn affine(input: &[f64], w: &[f64], bias: &[f64], out: &mut [f64]) {
        out.copy_from_slice(bias);
        let n_out = bias.len();
        for (k, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w[k * n_out..(k + 1) * n_out];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += x * wv;
            }
        }
    }

    /// Forward pass for a single input row.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(
            input.len(),
            self.input_dim(),
            "input dimension mismatch: expected {}, got {}",
            self.input_dim(),
            input.len()
        );
        let n_layers = self.n_layers();
        let mut cur = input.to_vec();
        for l in 0..n_layers {
            let mut next = vec![0.0; self.sizes[l + 1]];
            Self::affine(&cur, &self.weights[l], &self.biases[l], &mut next);
            if l + 1 < n_layers {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            cur = next;
        }
        cur
    }

    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Vec<Vec<f64>> {
        inputs.iter().map(|x| self.forward(x)).collect()
    }

    fn zero_grads(&self) -> Grads {
        Grads {
            w: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            b: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn validate_batch(&self, batch: &Batch) -> Result<(), NetError> {
        let n = batch.inputs.len();
        if batch.actions.len() != n || batch.targets.len() != n || n == 0 {
            return Err(NetError::BadBatch);
        }
        for input in &batch.inputs {
            if input.len() != self.input_dim() {
                return Err(NetError::DimMismatch {
                    expected: self.input_dim(),
                    got: input.len(),
                });
            }
        }
        let dim = self.output_dim();
        for &a in &batch.actions {
            if a >= dim {
                return Err(NetError::BadAction { action: a, dim });
            }
        }
        if batch.targets.iter().any(|t| !t.is_finite()) {
            return Err(NetError::NonFiniteTarget);
        }
        Ok(())
    }

    /// Mean-squared-error loss, per-sample predictions for the selected
    /// actions, and parameter gradients, all at the current parameters.
    fn gradients(&self, batch: &Batch) -> Result<(f64, Vec<f64>, Grads), NetError> {
        self.validate_batch(batch)?;
        let n_layers = self.n_layers();
        let batch_len = batch.len() as f64;
        let mut grads = self.zero_grads();
        let mut preds = Vec::with_capacity(batch.len());
        let mut loss = 0.0;

        // activations[l] holds the post-activation values entering layer l.
        let mut activations: Vec<Vec<f64>> = self.sizes.iter().map(|&s| vec![0.0; s]).collect();

        for (i, input) in batch.inputs.iter().enumerate() {
            activations[0].copy_from_slice(input);
            for l in 0..n_layers {
                let (before, after) = activations.split_at_mut(l + 1);
                Self::affine(&before[l], &self.weights[l], &self.biases[l], &mut after[0]);
                if l + 1 < n_layers {
                    for v in after[0].iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }

            let action = batch.actions[i];
            let pred = activations[n_layers][action];
            let err = pred - batch.targets[i];
            loss += err * err;
            preds.push(pred);

            // Output delta is 1-sparse: d(loss)/d(output[action]).
            let mut delta = vec![0.0; self.output_dim()];
            delta[action] = 2.0 * err / batch_len;

            for l in (0..n_layers).rev() {
                let n_out = self.sizes[l + 1];
                let input_act = &activations[l];
                let gw = &mut grads.w[l];
                for (k, &x) in input_act.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let row = &mut gw[k * n_out..(k + 1) * n_out];
                    for (g, &d) in row.iter_mut().zip(&delta) {
                        *g += x * d;
                    }
                }
                for (g, &d) in grads.b[l].iter_mut().zip(&delta) {
                    *g += d;
                }
                if l > 0 {
                    // Propagate: delta_prev[k] = relu'(act[k]) * W[k] . delta
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; self.sizes[l]];
                    for (k, p) in prev.iter_mut().enumerate() {
                        if input_act[k] > 0.0 {
                            let row = &w[k * n_out..(k + 1) * n_out];
                            *p = row.iter().zip(&delta).map(|(&wv, &d)| wv * d).sum();
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss / batch_len, preds, grads))
    }

    /// One optimization step toward the batch targets. Returns the
    /// pre-update loss.
    pub fn train_batch(&mut self, batch: &Batch, adam: &mut AdamState) -> Result<f64, NetError> {
        let (loss, _, grads) = self.gradients(batch)?;
        adam.apply(self, &grads)?;
        Ok(loss)
    }

    /// Like [`DenseNet::train_batch`] but also returns the pre-update
    /// predictions for the selected actions (handy for priority updates).
    pub fn train_batch_detailed(
        &mut self,
        batch: &Batch,
        adam: &mut AdamState,
    ) -> Result<(f64, Vec<f64>), NetError> {
        let (loss, preds, grads) = self.gradients(batch)?;
        adam.apply(self, &grads)?;
        Ok((loss, preds))
    }

    /// Copy all parameters from `source` into `self`.
    pub fn copy_params_from(&mut self, source: &DenseNet) -> Result<(), NetError> {
        if self.sizes != source.sizes {
            return Err(NetError::ShapeMismatch);
        }
        self.weights.clone_from(&source.weights);
        self.biases.clone_from(&source.biases);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn params_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn param_slot(&mut self, idx: usize) -> &mut f64 {
        let mut i = idx;
        for l in 0..self.weights.len() {
            if i < self.weights[l].len() {
                return &mut self.weights[l][i];
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                return &mut self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("parameter index {idx} out of range");
    }

    fn grad_at(grads: &Grads, idx: usize) -> f64 {
        let mut i = idx;
        for l in 0..grads.w.len() {
            if i < grads.w[l].len() {
                return grads.w[l][i];
            }
            i -= grads.w[l].len();
            if i < grads.b[l].len() {
                return grads.b[l][i];
            }
            i -= grads.b[l].len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Serialize layer shapes and parameters (little-endian, row-major).
    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in 0..self.n_layers() {
            for &v in &self.weights[l] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &self.biases[l] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], NetError> {
            let end = *cursor + n;
            let slice = bytes
                .get(*cursor..end)
                .ok_or_else(|| NetError::Corrupt("truncated file".into()))?;
            *cursor = end;
            Ok(slice)
        };
        if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
            return Err(NetError::Corrupt("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(NetError::Corrupt(format!("unsupported version {version}")));
        }
        let n_sizes = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize);
        }
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(NetError::Corrupt("bad layer sizes".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let mut w = Vec::with_capacity(sizes[l] * sizes[l + 1]);
            for _ in 0..sizes[l] * sizes[l + 1] {
                w.push(f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
            }
            let mut b = Vec::with_capacity(sizes[l + 1]);
            for _ in 0..sizes[l + 1] {
                b.push(f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
            }
            weights.push(w);
            biases.push(b);
        }
        if cursor != bytes.len() {
            return Err(NetError::Corrupt("trailing bytes".into()));
        }
        Self::from_parts(sizes, weights, biases)
    }
}

/// Adam optimizer state shaped like a specific network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    fn apply(&mut self, net: &mut DenseNet, grads: &Grads) -> Result<(), NetError> {
        if self.m_w.len() != net.weights.len()
            || self
                .m_w
                .iter()
                .zip(&net.weights)
                .any(|(m, w)| m.len() != w.len())
        {
            return Err(NetError::ShapeMismatch);
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        };
        for l in 0..net.weights.len() {
            update(
                &mut net.weights[l],
                &grads.w[l],
                &mut self.m_w[l],
                &mut self.v_w[l],
            );
            update(
                &mut net.biases[l],
                &grads.b[l],
                &mut self.m_b[l],
                &mut self.v_b[l],
            );
        }
        Ok(())
    }
}

/// Compare analytic gradients against central finite differences for a
/// single-sample loss `(target - Q(input, action))^2`. Returns the maximum
/// over parameters of `|analytic - numeric| / max(|analytic|, |numeric|,
/// 1e-8)`.
pub fn finite_diff_check(
    net: &mut DenseNet,
    input: &[f64],
    action: usize,
    target: f64,
    h: f64,
) -> f64 {
    assert!(h > 0.0, "perturbation must be positive");
    let batch = Batch {
        inputs: vec![input],
        actions: vec![action],
        targets: vec![target],
    };
    let (_, _, grads) = net.gradients(&batch).expect("valid probe batch");

    let loss_at = |net: &DenseNet| {
        let out = net.forward(input);
        let err = out[action] - target;
        err * err
    };

    let mut max_rel = 0.0_f64;
    for idx in 0..net.param_count() {
        let original = *net.param_slot(idx);
        *net.param_slot(idx) = original + h;
        let plus = loss_at(net);
        *net.param_slot(idx) = original - h;
        let minus = loss_at(net);
        *net.param_slot(idx) = original;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = DenseNet::grad_at(&grads, idx);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    max_rel
}
