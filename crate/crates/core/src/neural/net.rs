use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use super::optim::{OptimizerKind, OptimizerState};
use super::{bce_with_logit, relu, relu_grad, sigmoid, MlpConfig, NeuralError};
use crate::container::{Container, Section};
use crate::seed;

pub const BN_EPS: f64 = 1e-5;
/// Weight of the previous running statistic in the batch-norm update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenLayer {
    in_dim: usize,
    out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    w: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

/// Dropout masks for one batch: entries are 0 or `1 / keep`.
#[derive(Debug, Clone, PartialEq)]
pub struct Masks {
    pub input: Vec<f64>,
    pub hidden: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    z: Vec<f64>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    u: Vec<f64>,
    a: Vec<f64>,
}

/// Intermediate values of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    n: usize,
    input: Vec<f64>,
    layers: Vec<LayerCache>,
    pub masks: Masks,
}

impl ForwardCache {
    /// Normalised hidden pre-activations of layer `l` (batch-norm only).
    pub fn normalized(&self, layer: usize) -> &[f64] {
        &self.layers[layer].xhat
    }

    /// Affine output `W x + b` of layer `l`.
    pub fn affine(&self, layer: usize) -> &[f64] {
        &self.layers[layer].z
    }

    /// Pre-activation of layer `l` right before ReLU.
    pub fn pre_activation(&self, layer: usize) -> &[f64] {
        &self.layers[layer].u
    }
}

/// Gradients in [`OneClassNet::parameter_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

/// One binary classifier: hidden ReLU layers, single logit output.
#[derive(Debug, Clone)]
pub struct OneClassNet {
    config: MlpConfig,
    hidden: Vec<HiddenLayer>,
    out_w: Vec<f64>,
    out_b: Vec<f64>,
    optimizer: OptimizerState,
    dropout_rng: ChaCha8Rng,
    version: u64,
}

/// Kaiming-He normal init: `fan_out * fan_in` draws from N(0, 2 / fan_in).
pub fn kaiming_init(fan_in: usize, fan_out: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
    (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect()
}

impl OneClassNet {
    pub fn new(config: MlpConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = seed::derived_rng(config.seed, &[seed::stream::INIT]);
        let mut hidden = Vec::with_capacity(config.hidden_layers.len());
        let mut in_dim = config.input_dim;
        for &out_dim in &config.hidden_layers {
            hidden.push(HiddenLayer {
                in_dim,
                out_dim,
                w: kaiming_init(in_dim, out_dim, &mut rng),
                b: vec![0.0; out_dim],
                gamma: vec![1.0; out_dim],
                beta: vec![0.0; out_dim],
                running_mean: vec![0.0; out_dim],
                running_var: vec![1.0; out_dim],
            });
            in_dim = out_dim;
        }
        let out_w = kaiming_init(in_dim, 1, &mut rng);
        let mut net = OneClassNet {
            optimizer: OptimizerState::new(config.optimizer, &[]),
            dropout_rng: seed::derived_rng(config.seed, &[seed::stream::DROPOUT]),
            config,
            hidden,
            out_w,
            out_b: vec![0.0],
            version: 0,
        };
        net.optimizer = OptimizerState::new(net.config.optimizer, &net.parameter_sizes());
        Ok(net)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.optimizer.steps
    }

    /// Names of the trainable tensors, in gradient order. Batch-norm scale
    /// and shift are only present when batch-norm is enabled.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.hidden.len() {
            names.push(format!("hidden{l}.weight"));
            names.push(format!("hidden{l}.bias"));
            if self.config.batch_norm {
                names.push(format!("hidden{l}.bn_gamma"));
                names.push(format!("hidden{l}.bn_beta"));
            }
        }
        names.push("output.weight".into());
        names.push("output.bias".into());
        names
    }

    /// Whether each tensor in gradient order takes L2 decay.
    pub fn decays(&self) -> Vec<bool> {
        let mut d = Vec::new();
        for _ in &self.hidden {
            d.extend([true, false]);
            if self.config.batch_norm {
                d.extend([false, false]);
            }
        }
        d.extend([true, false]);
        d
    }

    pub fn parameters(&self) -> Vec<&Vec<f64>> {
        let mut p = Vec::new();
        for l in &self.hidden {
            p.push(&l.w);
            p.push(&l.b);
            if self.config.batch_norm {
                p.push(&l.gamma);
                p.push(&l.beta);
            }
        }
        p.push(&self.out_w);
        p.push(&self.out_b);
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let bn = self.config.batch_norm;
        let mut p = Vec::new();
        for l in &mut self.hidden {
            p.push(&mut l.w);
            p.push(&mut l.b);
            if bn {
                p.push(&mut l.gamma);
                p.push(&mut l.beta);
            }
        }
        p.push(&mut self.out_w);
        p.push(&mut self.out_b);
        // parameters may be edited through this handle; stale any cache
        self.version += 1;
        p
    }

    fn parameter_sizes(&self) -> Vec<usize> {
        self.parameters().iter().map(|t| t.len()).collect()
    }

    pub fn count_params(&self) -> usize {
        self.parameter_sizes().iter().sum()
    }

    /// Multiply-adds per sample: sum of `in * out` over the dense layers.
    pub fn count_muladds(&self) -> usize {
        self.hidden.iter().map(|l| l.in_dim * l.out_dim).sum::<usize>() + self.out_w.len()
    }

    pub fn running_stats(&self, layer: usize) -> (&[f64], &[f64]) {
        let l = &self.hidden[layer];
        (&l.running_mean, &l.running_var)
    }

    fn check_batch(&self, batch: &[f64]) -> Result<usize, NeuralError> {
        let d = self.config.input_dim;
        if !batch.len().is_multiple_of(d) {
            return Err(NeuralError::DimensionMismatch {
                expected: d,
                got: batch.len(),
            });
        }
        Ok(batch.len() / d)
    }

    /// Draws dropout masks for a batch of `n` rows from the net's own stream.
    pub fn sample_masks(&mut self, n: usize) -> Masks {
        let mut draw = |len: usize, keep: f64| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    if keep >= 1.0 {
                        1.0
                    } else if self.dropout_rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let input = draw(n * self.config.input_dim, self.config.keep_input);
        let hidden = self
            .hidden
            .iter()
            .map(|l| draw(n * l.out_dim, self.config.keep_hidden))
            .collect();
        Masks { input, hidden }
    }

    /// Training-mode forward pass with the given masks and batch statistics.
    /// Does not touch the running statistics.
    pub fn forward_train_masked(&self, batch: &[f64], masks: &Masks) -> Result<(Vec<f64>, ForwardCache), NeuralError> {
        let n = self.check_batch(batch)?;
        let input: Vec<f64> = batch.iter().zip(&masks.input).map(|(x, m)| x * m).collect();
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut prev = input.clone();
        for (li, l) in self.hidden.iter().enumerate() {
            let z = affine(&prev, n, l.in_dim, &l.w, &l.b, l.out_dim);
            let (xhat, inv_std, batch_mean, batch_var, u) = if self.config.batch_norm {
                let (mean, var) = column_moments(&z, n, l.out_dim);
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                let mut xhat = vec![0.0; z.len()];
                let mut u = vec![0.0; z.len()];
                for i in 0..n {
                    for j in 0..l.out_dim {
                        let k = i * l.out_dim + j;
                        xhat[k] = (z[k] - mean[j]) * inv_std[j];
                        u[k] = l.gamma[j] * xhat[k] + l.beta[j];
                    }
                }
                (xhat, inv_std, mean, var, u)
            } else {
                (Vec::new(), Vec::new(), Vec::new(), Vec::new(), z.clone())
            };
            let a: Vec<f64> = u
                .iter()
                .zip(&masks.hidden[li])
                .map(|(&x, m)| relu(x) * m)
                .collect();
            prev = a.clone();
            layers.push(LayerCache {
                z,
                xhat,
                inv_std,
                batch_mean,
                batch_var,
                u,
                a,
            });
        }
        let logits = affine(&prev, n, prev.len() / n.max(1), &self.out_w, &self.out_b, 1);
        let cache = ForwardCache {
            version: self.version,
            n,
            input,
            layers,
            masks: masks.clone(),
        };
        Ok((logits, cache))
    }

    /// Forward pass. `Train` samples fresh dropout masks, normalises with
    /// batch statistics and folds them into the running statistics; `Infer`
    /// is deterministic and uses the running statistics.
    pub fn forward(&mut self, batch: &[f64], mode: Mode) -> Result<(Vec<f64>, Option<ForwardCache>), NeuralError> {
        match mode {
            Mode::Infer => Ok((self.predict_logits(batch)?, None)),
            Mode::Train => {
                let n = self.check_batch(batch)?;
                let masks = self.sample_masks(n);
                let (logits, cache) = self.forward_train_masked(batch, &masks)?;
                if self.config.batch_norm {
                    for (l, c) in self.hidden.iter_mut().zip(&cache.layers) {
                        let unbias = if n > 1 { n as f64 / (n as f64 - 1.0) } else { 1.0 };
                        for j in 0..l.out_dim {
                            l.running_mean[j] = BN_MOMENTUM * l.running_mean[j] + (1.0 - BN_MOMENTUM) * c.batch_mean[j];
                            l.running_var[j] =
                                BN_MOMENTUM * l.running_var[j] + (1.0 - BN_MOMENTUM) * c.batch_var[j] * unbias;
                        }
                    }
                }
                Ok((logits, Some(cache)))
            }
        }
    }

    /// Inference logits (running batch-norm statistics, no dropout).
    pub fn predict_logits(&self, batch: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let n = self.check_batch(batch)?;
        let mut prev = batch.to_vec();
        for l in &self.hidden {
            let mut z = affine(&prev, n, l.in_dim, &l.w, &l.b, l.out_dim);
            for i in 0..n {
                for j in 0..l.out_dim {
                    let k = i * l.out_dim + j;
                    let u = if self.config.batch_norm {
                        l.gamma[j] * (z[k] - l.running_mean[j]) / (l.running_var[j] + BN_EPS).sqrt() + l.beta[j]
                    } else {
                        z[k]
                    };
                    z[k] = relu(u);
                }
            }
            prev = z;
        }
        let width = self.out_w.len();
        Ok(affine(&prev, n, width, &self.out_w, &self.out_b, 1))
    }

    pub fn predict_proba(&self, batch: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.predict_logits(batch)?.into_iter().map(sigmoid).collect())
    }

    /// Half the squared Frobenius norm of the weight matrices.
    fn weight_norm_sq_half(&self) -> f64 {
        let sq = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
        0.5 * (self.hidden.iter().map(|l| sq(&l.w)).sum::<f64>() + sq(&self.out_w))
    }

    /// Mean binary cross-entropy over the batch plus the L2 penalty
    /// `lambda / 2 * sum ||W||^2`.
    pub fn objective(&self, logits: &[f64], targets: &[f64]) -> f64 {
        let n = logits.len() as f64;
        let data: f64 = logits.iter().zip(targets).map(|(&z, &y)| bce_with_logit(z, y)).sum::<f64>() / n;
        data + self.config.l2_lambda * self.weight_norm_sq_half()
    }

    /// Analytic gradient of [`Self::objective`] for the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, logits: &[f64], targets: &[f64]) -> Result<Gradients, NeuralError> {
        if cache.version != self.version {
            return Err(NeuralError::StaleCache);
        }
        let n = cache.n;
        if targets.len() != n || logits.len() != n {
            return Err(NeuralError::DimensionMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        let lambda = self.config.l2_lambda;
        let inv_n = 1.0 / n as f64;
        let dlogit: Vec<f64> = logits
            .iter()
            .zip(targets)
            .map(|(&z, &y)| (sigmoid(z) - y) * inv_n)
            .collect();

        let last_a = cache.layers.last().map(|c| &c.a).unwrap_or(&cache.input);
        let width = self.out_w.len();
        let mut g_out_w: Vec<f64> = self.out_w.iter().map(|w| lambda * w).collect();
        let mut g_out_b = vec![0.0];
        let mut da = vec![0.0; n * width];
        for i in 0..n {
            g_out_b[0] += dlogit[i];
            for j in 0..width {
                g_out_w[j] += dlogit[i] * last_a[i * width + j];
                da[i * width + j] = dlogit[i] * self.out_w[j];
            }
        }

        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.hidden.len()];
        for li in (0..self.hidden.len()).rev() {
            let l = &self.hidden[li];
            let c = &cache.layers[li];
            let h = l.out_dim;
            let mask = &cache.masks.hidden[li];
            let du: Vec<f64> = (0..n * h).map(|k| da[k] * mask[k] * relu_grad(c.u[k])).collect();
            let mut tensors = Vec::new();
            let dz = if self.config.batch_norm {
                let mut dgamma = vec![0.0; h];
                let mut dbeta = vec![0.0; h];
                let mut sum_dxhat = vec![0.0; h];
                let mut sum_dxhat_xhat = vec![0.0; h];
                for i in 0..n {
                    for j in 0..h {
                        let k = i * h + j;
                        dgamma[j] += du[k] * c.xhat[k];
                        dbeta[j] += du[k];
                        let dxhat = du[k] * l.gamma[j];
                        sum_dxhat[j] += dxhat;
                        sum_dxhat_xhat[j] += dxhat * c.xhat[k];
                    }
                }
                let mut dz = vec![0.0; n * h];
                for i in 0..n {
                    for j in 0..h {
                        let k = i * h + j;
                        let dxhat = du[k] * l.gamma[j];
                        dz[k] = c.inv_std[j] * inv_n
                            * (n as f64 * dxhat - sum_dxhat[j] - c.xhat[k] * sum_dxhat_xhat[j]);
                    }
                }
                tensors.push(dgamma);
                tensors.push(dbeta);
                dz
            } else {
                du
            };
            let prev: &[f64] = if li == 0 { &cache.input } else { &cache.layers[li - 1].a };
            let mut gw: Vec<f64> = l.w.iter().map(|w| lambda * w).collect();
            let mut gb = vec![0.0; h];
            for i in 0..n {
                for j in 0..h {
                    let g = dz[i * h + j];
                    if g == 0.0 {
                        continue;
                    }
                    gb[j] += g;
                    let row = &mut gw[j * l.in_dim..(j + 1) * l.in_dim];
                    for (r, x) in row.iter_mut().zip(&prev[i * l.in_dim..(i + 1) * l.in_dim]) {
                        *r += g * x;
                    }
                }
            }
            if li > 0 {
                let mut da_prev = vec![0.0; n * l.in_dim];
                for i in 0..n {
                    for j in 0..h {
                        let g = dz[i * h + j];
                        if g == 0.0 {
                            continue;
                        }
                        let w = &l.w[j * l.in_dim..(j + 1) * l.in_dim];
                        for (d, wv) in da_prev[i * l.in_dim..(i + 1) * l.in_dim].iter_mut().zip(w) {
                            *d += g * wv;
                        }
                    }
                }
                da = da_prev;
            }
            let mut ordered = vec![gw, gb];
            ordered.extend(tensors);
            per_layer[li] = ordered;
        }
        let mut out = Vec::new();
        for t in per_layer {
            out.extend(t);
        }
        out.push(g_out_w);
        out.push(g_out_b);
        Ok(Gradients { tensors: out })
    }

    /// Applies one optimizer update with the configured learning rate.
    pub fn apply_gradients(&mut self, grads: &Gradients) {
        let lr = self.config.lr;
        let mut opt = std::mem::replace(&mut self.optimizer, OptimizerState::new(self.config.optimizer, &[]));
        {
            let mut params = self.parameters_mut();
            opt.step(&mut params, &grads.tensors, lr);
        }
        self.optimizer = opt;
    }

    /// Forward, backward and update on one mini-batch. Returns per-sample
    /// cross-entropy losses (without the L2 term) from the training pass.
    pub fn train_batch(&mut self, batch: &[f64], targets: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let (logits, cache) = self.forward(batch, Mode::Train)?;
        let cache = cache.expect("train mode returns a cache");
        let grads = self.backward(&cache, &logits, targets)?;
        self.apply_gradients(&grads);
        Ok(logits.iter().zip(targets).map(|(&z, &y)| bce_with_logit(z, y)).collect())
    }

    /// Serialises parameters, running statistics, optimizer moments and
    /// the dropout stream position.
    pub fn to_container(&self) -> Container {
        let names = self.parameter_names();
        let meta = json!({
            "kind": "one_class_net",
            "config": self.config,
            "optimizer_steps": self.optimizer.steps,
            "dropout_word_pos": self.dropout_rng.get_word_pos().to_string(),
            "parameters": names,
            "hidden_layers": self.hidden.len(),
        });
        let mut c = Container::new(meta);
        for (name, t) in names.iter().zip(self.parameters()) {
            c.push(Section::vector(name.clone(), t.clone()));
        }
        for (l, layer) in self.hidden.iter().enumerate() {
            c.push(Section::vector(format!("hidden{l}.running_mean"), layer.running_mean.clone()));
            c.push(Section::vector(format!("hidden{l}.running_var"), layer.running_var.clone()));
            if !self.config.batch_norm {
                // keep gamma/beta for exact reload even when unused
                c.push(Section::vector(format!("hidden{l}.bn_gamma"), layer.gamma.clone()));
                c.push(Section::vector(format!("hidden{l}.bn_beta"), layer.beta.clone()));
            }
        }
        for (name, (m, v)) in names.iter().zip(self.optimizer.first.iter().zip(&self.optimizer.second)) {
            c.push(Section::vector(format!("optim.first.{name}"), m.clone()));
            c.push(Section::vector(format!("optim.second.{name}"), v.clone()));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self, NeuralError> {
        let bad = |m: String| NeuralError::BadCheckpoint(m);
        if c.metadata["kind"] != "one_class_net" {
            return Err(bad("kind is not one_class_net".into()));
        }
        let config: MlpConfig =
            serde_json::from_value(c.metadata["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let mut net = OneClassNet::new(config)?;
        let names = net.parameter_names();
        let get = |name: &str, len: usize| -> Result<Vec<f64>, NeuralError> {
            let s = c.section(name)?;
            if s.data.len() != len {
                return Err(NeuralError::BadCheckpoint(format!("{name}: expected {len} values, got {}", s.data.len())));
            }
            Ok(s.data.clone())
        };
        let sizes = net.parameter_sizes();
        let loaded: Vec<Vec<f64>> = names
            .iter()
            .zip(&sizes)
            .map(|(n, &len)| get(n, len))
            .collect::<Result<_, _>>()?;
        for (dst, src) in net.parameters_mut().into_iter().zip(loaded) {
            *dst = src;
        }
        for l in 0..net.hidden.len() {
            let h = net.hidden[l].out_dim;
            net.hidden[l].running_mean = get(&format!("hidden{l}.running_mean"), h)?;
            net.hidden[l].running_var = get(&format!("hidden{l}.running_var"), h)?;
            if !net.config.batch_norm {
                net.hidden[l].gamma = get(&format!("hidden{l}.bn_gamma"), h)?;
                net.hidden[l].beta = get(&format!("hidden{l}.bn_beta"), h)?;
            }
        }
        for (k, (name, &len)) in names.iter().zip(&sizes).enumerate() {
            net.optimizer.first[k] = get(&format!("optim.first.{name}"), len)?;
            net.optimizer.second[k] = get(&format!("optim.second.{name}"), len)?;
        }
        net.optimizer.steps = c.metadata["optimizer_steps"]
            .as_u64()
            .ok_or_else(|| bad("optimizer_steps".into()))?;
        let pos: u128 = c.metadata["dropout_word_pos"]
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("dropout_word_pos".into()))?;
        net.dropout_rng.set_word_pos(pos);
        net.version = 0;
        Ok(net)
    }

    /// True when both nets hold bit-identical parameters, statistics and
    /// optimizer state.
    pub fn bit_identical(&self, other: &OneClassNet) -> bool {
        let bits = |c: Container| c.to_bytes().ok();
        bits(self.to_container()) == bits(other.to_container())
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.kind
    }
}

/// `x (n x in) * w^T (in x out) + b`.
fn affine(x: &[f64], n: usize, in_dim: usize, w: &[f64], b: &[f64], out_dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * out_dim];
    for i in 0..n {
        let xi = &x[i * in_dim..(i + 1) * in_dim];
        for j in 0..out_dim {
            let wj = &w[j * in_dim..(j + 1) * in_dim];
            out[i * out_dim + j] = xi.iter().zip(wj).map(|(a, b)| a * b).sum::<f64>() + b[j];
        }
    }
    out
}

/// Per-column mean and biased variance.
fn column_moments(z: &[f64], n: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; cols];
    for i in 0..n {
        for j in 0..cols {
            mean[j] += z[i * cols + j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; cols];
    for i in 0..n {
        for j in 0..cols {
            let d = z[i * cols + j] - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::OptimizerKind;

    fn batch(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..n * d).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn counts() {
        let net = OneClassNet::new(MlpConfig::with_input_dim(3)).unwrap();
        // 3*100 + 100 + (100 + 100) + 100 + 1
        assert_eq!(net.count_params(), 701);
        assert_eq!(net.count_muladds(), 400);
        let net = OneClassNet::new(MlpConfig::with_input_dim(13)).unwrap();
        assert_eq!(net.count_params(), 1701);
        let no_bn = OneClassNet::new(MlpConfig {
            batch_norm: false,
            ..MlpConfig::default()
        })
        .unwrap();
        assert_eq!(no_bn.count_params(), 501);
    }

    #[test]
    fn init_zero_biases_and_determinism() {
        let a = OneClassNet::new(MlpConfig { seed: 3, ..MlpConfig::default() }).unwrap();
        let b = OneClassNet::new(MlpConfig { seed: 3, ..MlpConfig::default() }).unwrap();
        assert!(a.bit_identical(&b));
        assert!(a.hidden[0].b.iter().all(|&x| x == 0.0));
        assert_eq!(a.out_b, vec![0.0]);
        let c = OneClassNet::new(MlpConfig { seed: 4, ..MlpConfig::default() }).unwrap();
        assert!(!a.bit_identical(&c));
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let mut net = OneClassNet::new(MlpConfig::default()).unwrap();
        for p in net.parameters_mut() {
            p.iter_mut().for_each(|x| *x = 0.0);
        }
        let x = batch(4, 3, 1);
        assert_eq!(net.predict_logits(&x).unwrap(), vec![0.0; 4]);
        let (logits, _) = net.forward(&x, Mode::Train).unwrap();
        assert_eq!(logits, vec![0.0; 4]);
    }

    #[test]
    fn inference_is_pure() {
        let mut net = OneClassNet::new(MlpConfig::default()).unwrap();
        let x = batch(16, 3, 2);
        for _ in 0..3 {
            net.train_batch(&x, &[1.0; 16]).unwrap();
        }
        let (a, _) = net.forward(&x, Mode::Infer).unwrap();
        let (b, _) = net.forward(&x, Mode::Infer).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn keep_one_masks_are_identity() {
        let cfg = MlpConfig {
            keep_input: 1.0,
            keep_hidden: 1.0,
            ..MlpConfig::default()
        };
        let mut net = OneClassNet::new(cfg).unwrap();
        let x = batch(8, 3, 5);
        let (with_dropout, _) = net.forward(&x, Mode::Train).unwrap();
        let ones = Masks {
            input: vec![1.0; x.len()],
            hidden: vec![vec![1.0; 8 * 100]],
        };
        let (plain, _) = net.forward_train_masked(&x, &ones).unwrap();
        assert_eq!(with_dropout, plain);
    }

    #[test]
    fn batch_norm_normalises() {
        let net = OneClassNet::new(MlpConfig::with_input_dim(3)).unwrap();
        let masks = Masks {
            input: vec![1.0; 32 * 3],
            hidden: vec![vec![1.0; 32 * 100]],
        };
        for scale in [1.0, 1000.0] {
            let x: Vec<f64> = batch(32, 3, 6).into_iter().map(|v| v * scale).collect();
            let (_, cache) = net.forward_train_masked(&x, &masks).unwrap();
            let (mean, var) = column_moments(cache.normalized(0), 32, 100);
            for j in 0..100 {
                assert!(mean[j].abs() < 1e-6);
                // eps shrinks the variance to var / (var + eps)
                let raw_var = cache.layers[0].batch_var[j];
                assert!((var[j] - raw_var / (raw_var + BN_EPS)).abs() < 1e-9);
                if raw_var > 10.0 {
                    assert!((var[j] - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = OneClassNet::new(MlpConfig::default()).unwrap();
        let x = batch(4, 3, 7);
        let (logits, cache) = net.forward(&x, Mode::Train).unwrap();
        let cache = cache.unwrap();
        let y = [1.0, 0.0, 1.0, 0.0];
        let g = net.backward(&cache, &logits, &y).unwrap();
        net.apply_gradients(&g);
        assert_eq!(net.backward(&cache, &logits, &y), Err(NeuralError::StaleCache));
    }

    #[test]
    fn dimension_mismatch() {
        let mut net = OneClassNet::new(MlpConfig::default()).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0], Mode::Infer),
            Err(NeuralError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn l2_adds_lambda_w() {
        let base = MlpConfig {
            l2_lambda: 0.0,
            seed: 11,
            ..MlpConfig::default()
        };
        let decayed = MlpConfig { l2_lambda: 1e-4, ..base.clone() };
        let mut a = OneClassNet::new(base).unwrap();
        let b = OneClassNet::new(decayed).unwrap();
        let x = batch(8, 3, 8);
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let masks = a.sample_masks(8);
        let (la, ca) = a.forward_train_masked(&x, &masks).unwrap();
        let (lb, cb) = b.forward_train_masked(&x, &masks).unwrap();
        let ga = a.backward(&ca, &la, &y).unwrap();
        let gb = b.backward(&cb, &lb, &y).unwrap();
        let decays = b.decays();
        for (k, (ta, tb)) in ga.tensors.iter().zip(&gb.tensors).enumerate() {
            let params = b.parameters()[k];
            for i in 0..ta.len() {
                let expect = if decays[k] { ta[i] + 1e-4 * params[i] } else { ta[i] };
                assert!((tb[i] - expect).abs() <= 1e-15 * (1.0 + expect.abs()), "tensor {k}");
            }
        }
    }

    #[test]
    fn output_bias_gradient_vanishes_at_exact_targets() {
        let cfg = MlpConfig {
            keep_input: 1.0,
            keep_hidden: 1.0,
            ..MlpConfig::default()
        };
        let mut net = OneClassNet::new(cfg).unwrap();
        let x = batch(6, 3, 9);
        let (logits, cache) = net.forward(&x, Mode::Train).unwrap();
        let y: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let g = net.backward(&cache.unwrap(), &logits, &y).unwrap();
        assert_eq!(g.tensors.last().unwrap()[0], 0.0);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        for optimizer in [OptimizerKind::Adam, OptimizerKind::RMSProp] {
            for batch_norm in [true, false] {
                let cfg = MlpConfig {
                    optimizer,
                    batch_norm,
                    seed: 21,
                    ..MlpConfig::default()
                };
                let mut net = OneClassNet::new(cfg).unwrap();
                let x = batch(16, 3, 10);
                for _ in 0..4 {
                    net.train_batch(&x, &[0.0; 16]).unwrap();
                }
                let bytes = net.to_container().to_bytes().unwrap();
                let mut back = OneClassNet::from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
                assert!(net.bit_identical(&back));
                // training continues identically, dropout stream included
                let la = net.train_batch(&x, &[1.0; 16]).unwrap();
                let lb = back.train_batch(&x, &[1.0; 16]).unwrap();
                assert_eq!(la, lb);
                assert!(net.bit_identical(&back));
            }
        }
    }

    #[test]
    fn kaiming_variance() {
        let mut rng = seed::rng(1);
        let w = kaiming_init(100, 1000, &mut rng);
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        assert!((0.018..=0.022).contains(&var), "{var}");
    }
}
