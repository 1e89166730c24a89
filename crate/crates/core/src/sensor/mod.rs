//! Virtual strain sensor: an ensemble of five heteroscedastic regressors
//! mapping the instantaneous `(ω, o)` to normal distributions of the upper
//! and lower strain envelope.
//!
//! Aleatoric spread comes from each member's σ heads; epistemic spread is
//! the sample standard deviation, across members, of the `μ + σ` sums.

pub mod loss;
pub mod net;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::envelope::EnvelopedTrajectory;
use crate::error::{Error, Result};
pub use net::{Mode, NetOutput, SensorNet};

pub const ENSEMBLE_SIZE: usize = 5;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Exponent of the stop-gradient `σ^{2β}` weight.
    pub beta: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Floor added to the σ heads (standardized units).
    pub sigma_min: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            learning_rate: 1e-3,
            batch_size: 32,
            beta: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            sigma_min: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig("beta must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.sigma_min > 0.0) {
            return Err(Error::InvalidConfig("learning_rate and sigma_min must be positive".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Affine standardization `(x − mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    pub fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Self {
            mean,
            scale: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub omega: Standardizer,
    pub opening: Standardizer,
    pub upper: Standardizer,
    pub lower: Standardizer,
}

/// Ensemble prediction at one `(ω, o)` point, in strain units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePrediction {
    pub mu_u: f64,
    pub sigma_u: f64,
    pub mu_l: f64,
    pub sigma_l: f64,
    /// Mean over members of `μ_u + σ_u`.
    pub sum_u: f64,
    /// Mean over members of `μ_l + σ_l`.
    pub sum_l: f64,
    pub sigma_ep_u: f64,
    pub sigma_ep_l: f64,
}

impl EnvelopePrediction {
    /// Aggregates per-member predictions (already in strain units).
    pub fn from_members(members: &[NetOutput]) -> Self {
        let n = members.len() as f64;
        let mean = |f: &dyn Fn(&NetOutput) -> f64| members.iter().map(f).sum::<f64>() / n;
        let sum_u = mean(&|m| m.mu_u + m.sigma_u);
        let sum_l = mean(&|m| m.mu_l + m.sigma_l);
        // offsets from the first member, so identical members give exactly 0
        let spread = |f: &dyn Fn(&NetOutput) -> f64| {
            if members.len() < 2 {
                return 0.0;
            }
            let d: Vec<f64> = members.iter().map(|m| f(m) - f(&members[0])).collect();
            let centre = d.iter().sum::<f64>() / n;
            (d.iter().map(|v| (v - centre).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            mu_u: mean(&|m| m.mu_u),
            sigma_u: mean(&|m| m.sigma_u),
            mu_l: mean(&|m| m.mu_l),
            sigma_l: mean(&|m| m.sigma_l),
            sum_u,
            sum_l,
            sigma_ep_u: spread(&|m| m.mu_u + m.sigma_u),
            sigma_ep_l: spread(&|m| m.mu_l + m.sigma_l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEnsemble {
    pub members: Vec<SensorNet>,
    pub member_seeds: Vec<u64>,
    pub norm: Normalization,
    pub config: TrainConfig,
}

/// Flattened training rows `(ω, o; s_u, s_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRows {
    pub inputs: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
}

impl TrainingRows {
    pub fn from_trajectories(dataset: &[EnvelopedTrajectory]) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for t in dataset {
            for n in 0..t.len() {
                let row = [t.omega[n], t.opening[n]];
                let tgt = [t.upper[n], t.lower[n]];
                if row.iter().chain(&tgt).any(|v| !v.is_finite()) {
                    return Err(Error::ValidationFailure("non-finite training sample".into()));
                }
                inputs.push(row);
                targets.push(tgt);
            }
        }
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { inputs, targets })
    }
}

fn member_seed(base: u64, k: usize) -> u64 {
    crate::derive_seed(base, k as u64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Trains one member from scratch on standardized rows.
fn train_member(
    inputs: &[[f64; 2]],
    targets: &[[f64; 2]],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SensorNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = SensorNet::init(&mut rng, cfg.sigma_min);
    let mut adam = Adam::new(net.params.len());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut xb = Vec::with_capacity(cfg.batch_size);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            xb.extend(chunk.iter().map(|&i| inputs[i]));
            yb.extend(chunk.iter().map(|&i| targets[i]));
            let (_, grad) = net.train_batch(&xb, &yb, cfg.beta)?;
            adam.step(&mut net.params, &grad, cfg);
        }
    }
    Ok(net)
}

impl SensorEnsemble {
    /// Trains a fresh ensemble on all samples of all trajectories.
    pub fn train(dataset: &[EnvelopedTrajectory], cfg: &TrainConfig) -> Result<Self> {
        Self::train_rows(&TrainingRows::from_trajectories(dataset)?, cfg)
    }

    pub fn train_rows(rows: &TrainingRows, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if rows.inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let norm = Normalization {
            omega: Standardizer::fit(rows.inputs.iter().map(|r| r[0])),
            opening: Standardizer::fit(rows.inputs.iter().map(|r| r[1])),
            upper: Standardizer::fit(rows.targets.iter().map(|r| r[0])),
            lower: Standardizer::fit(rows.targets.iter().map(|r| r[1])),
        };
        let inputs: Vec<[f64; 2]> = rows
            .inputs
            .iter()
            .map(|r| [norm.omega.apply(r[0]), norm.opening.apply(r[1])])
            .collect();
        let targets: Vec<[f64; 2]> = rows
            .targets
            .iter()
            .map(|t| [norm.upper.apply(t[0]), norm.lower.apply(t[1])])
            .collect();
        let member_seeds: Vec<u64> = (0..ENSEMBLE_SIZE).map(|k| member_seed(cfg.seed, k)).collect();
        let members = member_seeds
            .par_iter()
            .map(|&s| train_member(&inputs, &targets, cfg, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            members,
            member_seeds,
            norm,
            config: cfg.clone(),
        })
    }

    /// Per-member predictions in strain units.
    pub fn member_outputs(&self, omega: &[f64], opening: &[f64]) -> Result<Vec<Vec<NetOutput>>> {
        let x: Vec<[f64; 2]> = omega
            .iter()
            .zip(opening)
            .map(|(&w, &o)| [self.norm.omega.apply(w), self.norm.opening.apply(o)])
            .collect();
        let (nu, nl) = (self.norm.upper, self.norm.lower);
        self.members
            .iter()
            .map(|m| {
                Ok(m.forward_batch(&x, Mode::Infer)?
                    .into_iter()
                    .map(|o| NetOutput {
                        mu_u: nu.invert(o.mu_u),
                        sigma_u: o.sigma_u * nu.scale,
                        mu_l: nl.invert(o.mu_l),
                        sigma_l: o.sigma_l * nl.scale,
                    })
                    .collect())
            })
            .collect()
    }

    /// Ensemble predictions along a sequence of `(ω, o)` points.
    pub fn predict_batch(&self, omega: &[f64], opening: &[f64]) -> Result<Vec<EnvelopePrediction>> {
        let per_member = self.member_outputs(omega, opening)?;
        let mut row = Vec::with_capacity(self.members.len());
        Ok((0..omega.len())
            .map(|n| {
                row.clear();
                row.extend(per_member.iter().map(|m| m[n]));
                EnvelopePrediction::from_members(&row)
            })
            .collect())
    }

    pub fn predict(&self, omega: f64, opening: f64) -> Result<EnvelopePrediction> {
        Ok(self.predict_batch(&[omega], &[opening])?[0])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let ck = CheckpointRef {
            schema_version: CHECKPOINT_VERSION,
            config_hash: self.config.hash(),
            ensemble: self,
        };
        let tmp = path.as_ref().with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&ck)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.schema_version != CHECKPOINT_VERSION {
            return Err(Error::StateVersion {
                found: ck.schema_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if ck.config_hash != ck.ensemble.config.hash() {
            return Err(Error::ValidationFailure("checkpoint config hash mismatch".into()));
        }
        Ok(ck.ensemble)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    schema_version: u32,
    config_hash: String,
    ensemble: &'a SensorEnsemble,
}

#[derive(Deserialize)]
struct Checkpoint {
    schema_version: u32,
    config_hash: String,
    ensemble: SensorEnsemble,
}
