//! β-weighted Gaussian negative log-likelihood.
//!
//! Per sample and head: `w · [(y − μ)² / (2σ²) + ½ ln σ²]` with
//! `w = σ^{2β}` treated as a constant during differentiation.

use crate::error::{Error, Result};

/// Loss value and its gradient with respect to every μ and σ.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub d_mu: Vec<f64>,
    pub d_sigma: Vec<f64>,
}

/// The stop-gradient weights `σ^{2β}`.
pub fn beta_weights(sigma: &[f64], beta: f64) -> Vec<f64> {
    sigma.iter().map(|s| s.powf(2.0 * beta)).collect()
}

/// Mean β-NLL of one head over a batch.
pub fn beta_nll_loss(mu: &[f64], sigma: &[f64], target: &[f64], beta: f64) -> Result<LossGrad> {
    check_sigma(sigma)?;
    weighted_nll(mu, sigma, target, &beta_weights(sigma, beta))
}

/// Mean of `weights[i] · nll_i`; `weights` are constants.
pub fn weighted_nll(mu: &[f64], sigma: &[f64], target: &[f64], weights: &[f64]) -> Result<LossGrad> {
    check_sigma(sigma)?;
    let n = mu.len();
    assert!(sigma.len() == n && target.len() == n && weights.len() == n);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut d_mu = Vec::with_capacity(n);
    let mut d_sigma = Vec::with_capacity(n);
    for i in 0..n {
        let (m, s, y, w) = (mu[i], sigma[i], target[i], weights[i]);
        let r = y - m;
        let s2 = s * s;
        loss += w * (r * r / (2.0 * s2) + s.ln());
        d_mu.push(inv_n * w * (m - y) / s2);
        d_sigma.push(inv_n * w * (1.0 / s - r * r / (s2 * s)));
    }
    Ok(LossGrad {
        loss: loss * inv_n,
        d_mu,
        d_sigma,
    })
}

fn check_sigma(sigma: &[f64]) -> Result<()> {
    match sigma.iter().find(|s| !(**s > 0.0)) {
        Some(&s) => Err(Error::NonPositiveSigma(s)),
        None => Ok(()),
    }
}
