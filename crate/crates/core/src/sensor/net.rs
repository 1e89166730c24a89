//! Feed-forward envelope regressor: 2 → 32 → 32 → 4 with batch
//! normalization and a rectifier on both hidden layers.
//!
//! Outputs are `(μ_u, σ_u, μ_l, σ_l)` in the standardized target frame;
//! the σ heads go through `softplus(·) + σ_min`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{beta_weights, weighted_nll};
use crate::error::{Error, Result};

pub const INPUTS: usize = 2;
pub const HIDDEN: usize = 32;
pub const OUTPUTS: usize = 4;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

// flat parameter layout
const W1: usize = 0;
const B1: usize = W1 + HIDDEN * INPUTS;
const G1: usize = B1 + HIDDEN;
const BETA1: usize = G1 + HIDDEN;
const W2: usize = BETA1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const G2: usize = B2 + HIDDEN;
const BETA2: usize = G2 + HIDDEN;
const W3: usize = BETA2 + HIDDEN;
const B3: usize = W3 + OUTPUTS * HIDDEN;
pub const N_PARAMS: usize = B3 + OUTPUTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics.
    Train,
    /// Running statistics.
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    fn new() -> Self {
        Self {
            mean: vec![0.0; HIDDEN],
            var: vec![1.0; HIDDEN],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNet {
    pub params: Vec<f64>,
    pub bn: [RunningStats; 2],
    /// False until the first training batch has updated the running stats.
    pub stats_ready: bool,
    pub sigma_min: f64,
}

/// Network outputs for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetOutput {
    pub mu_u: f64,
    pub sigma_u: f64,
    pub mu_l: f64,
    pub sigma_l: f64,
}

struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

struct Cache {
    x: Vec<f64>,
    h1: Vec<f64>,
    z1: Vec<f64>,
    bn1: BnCache,
    h2: Vec<f64>,
    z2: Vec<f64>,
    bn2: BnCache,
    raw: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out[b, i] = Σ_j w[i, j] · x[b, j] + bias[i]`
fn affine(x: &[f64], n_in: usize, w: &[f64], bias: &[f64], n_out: usize) -> Vec<f64> {
    let batch = x.len() / n_in;
    let mut out = Vec::with_capacity(batch * n_out);
    for b in 0..batch {
        let row = &x[b * n_in..(b + 1) * n_in];
        for i in 0..n_out {
            let wi = &w[i * n_in..(i + 1) * n_in];
            let mut acc = bias[i];
            for j in 0..n_in {
                acc += wi[j] * row[j];
            }
            out.push(acc);
        }
    }
    out
}

impl SensorNet {
    /// Uniform `±1/√fan_in` initialization for weights and biases, unit
    /// batch-norm scale and zero shift.
    pub fn init<R: Rng>(rng: &mut R, sigma_min: f64) -> Self {
        let mut params = vec![0.0; N_PARAMS];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(W1..G1, INPUTS);
        fill(W2..G2, HIDDEN);
        fill(W3..N_PARAMS, HIDDEN);
        params[G1..BETA1].fill(1.0);
        params[BETA1..W2].fill(0.0);
        params[G2..BETA2].fill(1.0);
        params[BETA2..W3].fill(0.0);
        Self {
            params,
            bn: [RunningStats::new(), RunningStats::new()],
            stats_ready: false,
            sigma_min,
        }
    }

    fn batch_norm(&self, a: &[f64], layer: usize, mode: Mode) -> (Vec<f64>, BnCache) {
        let (g, beta) = if layer == 0 { (G1, BETA1) } else { (G2, BETA2) };
        let batch = a.len() / HIDDEN;
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![0.0; HIDDEN];
                let mut var = vec![0.0; HIDDEN];
                for b in 0..batch {
                    for j in 0..HIDDEN {
                        mean[j] += a[b * HIDDEN + j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= batch as f64);
                for b in 0..batch {
                    for j in 0..HIDDEN {
                        let d = a[b * HIDDEN + j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= batch as f64);
                (mean, var)
            }
            Mode::Infer => (self.bn[layer].mean.clone(), self.bn[layer].var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = Vec::with_capacity(a.len());
        let mut z = Vec::with_capacity(a.len());
        for b in 0..batch {
            for j in 0..HIDDEN {
                let xh = (a[b * HIDDEN + j] - mean[j]) * inv_std[j];
                xhat.push(xh);
                z.push(self.params[g + j] * xh + self.params[beta + j]);
            }
        }
        (
            z,
            BnCache {
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        )
    }

    fn forward_cached(&self, x: &[f64], mode: Mode) -> Result<Cache> {
        if mode == Mode::Infer && !self.stats_ready {
            return Err(Error::UntrainedNet);
        }
        let p = &self.params;
        let a1 = affine(x, INPUTS, &p[W1..B1], &p[B1..G1], HIDDEN);
        let (z1, bn1) = self.batch_norm(&a1, 0, mode);
        let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let a2 = affine(&h1, HIDDEN, &p[W2..B2], &p[B2..G2], HIDDEN);
        let (z2, bn2) = self.batch_norm(&a2, 1, mode);
        let h2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let raw = affine(&h2, HIDDEN, &p[W3..B3], &p[B3..N_PARAMS], OUTPUTS);
        Ok(Cache {
            x: x.to_vec(),
            h1,
            z1,
            bn1,
            h2,
            z2,
            bn2,
            raw,
        })
    }

    fn outputs(&self, raw: &[f64]) -> Vec<NetOutput> {
        raw.chunks(OUTPUTS)
            .map(|r| NetOutput {
                mu_u: r[0],
                sigma_u: softplus(r[1]) + self.sigma_min,
                mu_l: r[2],
                sigma_l: softplus(r[3]) + self.sigma_min,
            })
            .collect()
    }

    /// Forward pass over a batch of `(ω, o)` rows, already normalized.
    pub fn forward_batch(&self, x: &[[f64; INPUTS]], mode: Mode) -> Result<Vec<NetOutput>> {
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        let cache = self.forward_cached(&flat, mode)?;
        Ok(self.outputs(&cache.raw))
    }

    pub fn forward(&self, omega: f64, opening: f64, mode: Mode) -> Result<NetOutput> {
        Ok(self.forward_batch(&[[omega, opening]], mode)?[0])
    }

    /// β-NLL summed over both heads (batch statistics) and its gradient
    /// with respect to [`SensorNet::params`]. Running statistics are left
    /// untouched.
    pub fn loss_and_grad(
        &self,
        x: &[[f64; INPUTS]],
        targets: &[[f64; 2]],
        beta: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, grad, _) = self.loss_grad_stats(x, targets, beta)?;
        Ok((loss, grad))
    }

    /// Loss with externally supplied per-sample head weights, for checking
    /// that the β factor carries no gradient.
    pub fn loss_with_weights(
        &self,
        x: &[[f64; INPUTS]],
        targets: &[[f64; 2]],
        weights_u: &[f64],
        weights_l: &[f64],
    ) -> Result<f64> {
        let out = self.forward_batch(x, Mode::Train)?;
        let (mu_u, s_u, mu_l, s_l) = split(&out);
        let y_u: Vec<f64> = targets.iter().map(|t| t[0]).collect();
        let y_l: Vec<f64> = targets.iter().map(|t| t[1]).collect();
        Ok(weighted_nll(&mu_u, &s_u, &y_u, weights_u)?.loss
            + weighted_nll(&mu_l, &s_l, &y_l, weights_l)?.loss)
    }

    /// The `σ^{2β}` weights of both heads at the current parameters.
    pub fn beta_weights(&self, x: &[[f64; INPUTS]], beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.forward_batch(x, Mode::Train)?;
        let (_, s_u, _, s_l) = split(&out);
        Ok((beta_weights(&s_u, beta), beta_weights(&s_l, beta)))
    }

    fn loss_grad_stats(
        &self,
        x: &[[f64; INPUTS]],
        targets: &[[f64; 2]],
        beta: f64,
    ) -> Result<(f64, Vec<f64>, [(Vec<f64>, Vec<f64>); 2])> {
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        let cache = self.forward_cached(&flat, Mode::Train)?;
        let out = self.outputs(&cache.raw);
        let (mu_u, s_u, mu_l, s_l) = split(&out);
        let y_u: Vec<f64> = targets.iter().map(|t| t[0]).collect();
        let y_l: Vec<f64> = targets.iter().map(|t| t[1]).collect();
        let lu = super::loss::beta_nll_loss(&mu_u, &s_u, &y_u, beta)?;
        let ll = super::loss::beta_nll_loss(&mu_l, &s_l, &y_l, beta)?;

        let batch = x.len();
        let mut d_raw = Vec::with_capacity(batch * OUTPUTS);
        for b in 0..batch {
            let r = &cache.raw[b * OUTPUTS..(b + 1) * OUTPUTS];
            d_raw.push(lu.d_mu[b]);
            d_raw.push(lu.d_sigma[b] * sigmoid(r[1]));
            d_raw.push(ll.d_mu[b]);
            d_raw.push(ll.d_sigma[b] * sigmoid(r[3]));
        }
        let grad = self.backward(&cache, &d_raw);
        let stats = [
            (cache.bn1.batch_mean, cache.bn1.batch_var),
            (cache.bn2.batch_mean, cache.bn2.batch_var),
        ];
        Ok((lu.loss + ll.loss, grad, stats))
    }

    fn backward(&self, c: &Cache, d_raw: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut g = vec![0.0; N_PARAMS];
        let batch = d_raw.len() / OUTPUTS;

        // output layer
        let mut d_h2 = vec![0.0; batch * HIDDEN];
        for b in 0..batch {
            for i in 0..OUTPUTS {
                let d = d_raw[b * OUTPUTS + i];
                g[B3 + i] += d;
                for j in 0..HIDDEN {
                    g[W3 + i * HIDDEN + j] += d * c.h2[b * HIDDEN + j];
                    d_h2[b * HIDDEN + j] += d * p[W3 + i * HIDDEN + j];
                }
            }
        }
        let d_a2 = bn_relu_backward(&mut g, p, &d_h2, &c.z2, &c.bn2, G2, BETA2, batch);

        // hidden layer 2 affine
        let mut d_h1 = vec![0.0; batch * HIDDEN];
        for b in 0..batch {
            for i in 0..HIDDEN {
                let d = d_a2[b * HIDDEN + i];
                g[B2 + i] += d;
                for j in 0..HIDDEN {
                    g[W2 + i * HIDDEN + j] += d * c.h1[b * HIDDEN + j];
                    d_h1[b * HIDDEN + j] += d * p[W2 + i * HIDDEN + j];
                }
            }
        }
        let d_a1 = bn_relu_backward(&mut g, p, &d_h1, &c.z1, &c.bn1, G1, BETA1, batch);

        for b in 0..batch {
            for i in 0..HIDDEN {
                let d = d_a1[b * HIDDEN + i];
                g[B1 + i] += d;
                for j in 0..INPUTS {
                    g[W1 + i * INPUTS + j] += d * c.x[b * INPUTS + j];
                }
            }
        }
        g
    }

    /// Loss, gradient, and the running-statistics update for one batch.
    pub(crate) fn train_batch(
        &mut self,
        x: &[[f64; INPUTS]],
        targets: &[[f64; 2]],
        beta: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (loss, grad, stats) = self.loss_grad_stats(x, targets, beta)?;
        let n = x.len() as f64;
        for (layer, (mean, var)) in stats.into_iter().enumerate() {
            let rs = &mut self.bn[layer];
            for j in 0..HIDDEN {
                let unbiased = if n > 1.0 { var[j] * n / (n - 1.0) } else { var[j] };
                rs.mean[j] = (1.0 - BN_MOMENTUM) * rs.mean[j] + BN_MOMENTUM * mean[j];
                rs.var[j] = (1.0 - BN_MOMENTUM) * rs.var[j] + BN_MOMENTUM * unbiased;
            }
        }
        self.stats_ready = true;
        Ok((loss, grad))
    }
}

#[allow(clippy::too_many_arguments)]
fn bn_relu_backward(
    g: &mut [f64],
    p: &[f64],
    d_h: &[f64],
    z: &[f64],
    bn: &BnCache,
    gamma: usize,
    shift: usize,
    batch: usize,
) -> Vec<f64> {
    let nb = batch as f64;
    let mut d_a = vec![0.0; batch * HIDDEN];
    for j in 0..HIDDEN {
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        let mut dxhat = vec![0.0; batch];
        for b in 0..batch {
            let k = b * HIDDEN + j;
            let dz = if z[k] > 0.0 { d_h[k] } else { 0.0 };
            g[gamma + j] += dz * bn.xhat[k];
            g[shift + j] += dz;
            dxhat[b] = dz * p[gamma + j];
            sum_dxhat += dxhat[b];
            sum_dxhat_xhat += dxhat[b] * bn.xhat[k];
        }
        for b in 0..batch {
            let k = b * HIDDEN + j;
            d_a[k] = bn.inv_std[j] / nb * (nb * dxhat[b] - sum_dxhat - bn.xhat[k] * sum_dxhat_xhat);
        }
    }
    d_a
}

fn split(out: &[NetOutput]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        out.iter().map(|o| o.mu_u).collect(),
        out.iter().map(|o| o.sigma_u).collect(),
        out.iter().map(|o| o.mu_l).collect(),
        out.iter().map(|o| o.sigma_l).collect(),
    )
}
