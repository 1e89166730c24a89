//! Seeded synthetic turbine used in place of strain-gauge measurements.
//!
//! Speed and opening come from the shared simulator; strain is drawn from
//! `M(ω, o) + A sin(2π f t) + G(ω, o)·ε` with a ridge of high mean strain at
//! large opening and low speed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::OptBox;
use crate::envelope::{LargestCycle, MeasuredTrajectory};
use crate::error::{Error, Result};
use crate::sim::{SimContext, StartupParams, StartupTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantStrainModel {
    /// Ridge gain of `o·exp(−ω/ridge_speed)`.
    pub ridge_gain: f64,
    pub ridge_speed: f64,
    /// Gain of `o²`.
    pub opening_gain: f64,
    /// Gain of the `−ω·o` relief term.
    pub relief_gain: f64,
    /// Noise standard deviation `noise_base + noise_slope·o`.
    pub noise_base: f64,
    pub noise_slope: f64,
    pub oscillation_amplitude: f64,
    pub oscillation_hz: f64,
    /// Measurement rate.
    pub f_m: f64,
    pub seed: u64,
}

impl Default for PlantStrainModel {
    fn default() -> Self {
        Self {
            ridge_gain: 4.0,
            ridge_speed: 0.35,
            opening_gain: 0.5,
            relief_gain: 0.5,
            noise_base: 0.02,
            noise_slope: 0.05,
            oscillation_amplitude: 0.05,
            oscillation_hz: 20.0,
            f_m: 500.0,
            seed: 0,
        }
    }
}

impl PlantStrainModel {
    /// No oscillation and a vanishing noise floor.
    pub fn noiseless(self) -> Self {
        Self {
            noise_base: 1e-9,
            noise_slope: 0.0,
            oscillation_amplitude: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.ridge_speed, self.noise_base, self.f_m];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("ridge_speed, noise_base and f_m must be positive".into()));
        }
        let finite = [
            self.ridge_gain,
            self.opening_gain,
            self.relief_gain,
            self.noise_slope,
            self.oscillation_amplitude,
            self.oscillation_hz,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.noise_slope < 0.0 {
            return Err(Error::InvalidConfig("plant gains must be finite, noise_slope >= 0".into()));
        }
        Ok(())
    }

    pub fn mean_strain(&self, omega: f64, opening: f64) -> f64 {
        self.ridge_gain * opening * (-omega / self.ridge_speed).exp() + self.opening_gain * opening * opening
            - self.relief_gain * omega * opening
    }

    pub fn noise_scale(&self, _omega: f64, opening: f64) -> f64 {
        self.noise_base + self.noise_slope * opening
    }
}

/// Linear interpolation of a series sampled at `f_src` onto `f_dst`.
fn resample_linear(x: &[f64], f_src: f64, f_dst: f64) -> Vec<f64> {
    let duration = (x.len() - 1) as f64 / f_src;
    let n = (duration * f_dst).round() as usize + 1;
    (0..n)
        .map(|k| {
            let pos = k as f64 * f_src / f_dst;
            let i = (pos.floor() as usize).min(x.len() - 1);
            if i + 1 >= x.len() {
                x[x.len() - 1]
            } else {
                let frac = pos - i as f64;
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect()
}

/// Simulates θ and samples strain at `rate`.
pub fn run_startup_at(
    theta: &StartupParams,
    plant: &PlantStrainModel,
    sim: &SimContext,
    run_seed: u64,
    rate: f64,
) -> Result<(MeasuredTrajectory, StartupTime)> {
    plant.validate()?;
    let dyn_traj = sim.simulate(theta)?;
    let omega = resample_linear(&dyn_traj.omega, dyn_traj.f_d, rate);
    let opening = resample_linear(&dyn_traj.opening, dyn_traj.f_d, rate);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(plant.seed, run_seed));
    let w = 2.0 * std::f64::consts::PI * plant.oscillation_hz;
    let strain = omega
        .iter()
        .zip(&opening)
        .enumerate()
        .map(|(k, (&om, &op))| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            plant.mean_strain(om, op)
                + plant.oscillation_amplitude * (w * k as f64 / rate).sin()
                + plant.noise_scale(om, op) * eps
        })
        .collect();
    Ok((
        MeasuredTrajectory {
            f_m: rate,
            omega,
            opening,
            strain,
            params: *theta,
        },
        dyn_traj.t_st,
    ))
}

/// One measured startup at the plant's rate `f_m`.
pub fn run_startup(
    theta: &StartupParams,
    plant: &PlantStrainModel,
    sim: &SimContext,
    run_seed: u64,
) -> Result<MeasuredTrajectory> {
    Ok(run_startup_at(theta, plant, sim, run_seed, plant.f_m)?.0)
}

/// Mean and standard error of the largest cycle over `repeats` runs with
/// seeds `first_seed..first_seed + repeats`.
pub fn expected_cycle(
    theta: &StartupParams,
    plant: &PlantStrainModel,
    sim: &SimContext,
    repeats: usize,
    first_seed: u64,
) -> Result<(f64, f64)> {
    let cycles = (0..repeats as u64)
        .map(|r| Ok(run_startup(theta, plant, sim, first_seed + r)?.largest_cycle()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_stderr(&cycles))
}

fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub theta: StartupParams,
    pub expected_cycle: f64,
    pub std_error: f64,
    pub t_st: f64,
    pub feasible_points: usize,
    pub grid_points: usize,
}

/// Exhaustive grid search of the expected largest cycle over feasible θ.
///
/// Every grid point uses the same run seeds, so differences between points
/// are not blurred by independent noise.
pub fn oracle_optimum(
    plant: &PlantStrainModel,
    sim: &SimContext,
    bbox: &OptBox,
    resolution: usize,
    repeats: usize,
) -> Result<OracleResult> {
    if resolution < 2 || repeats == 0 {
        return Err(Error::InvalidConfig("oracle needs resolution >= 2 and repeats >= 1".into()));
    }
    let axis = |i: usize, k: usize| {
        bbox.lower[i] + (bbox.upper[i] - bbox.lower[i]) * k as f64 / (resolution - 1) as f64
    };
    let grid: Vec<StartupParams> = (0..resolution.pow(4))
        .map(|idx| {
            let mut rem = idx;
            StartupParams::from_array(std::array::from_fn(|i| {
                let k = rem % resolution;
                rem /= resolution;
                axis(i, k)
            }))
        })
        .collect();
    let limit = sim.physics.t_st_limit;
    let scored = grid
        .par_iter()
        .map(|theta| {
            let traj = sim.simulate(theta)?;
            let t = traj.t_st.seconds(limit);
            if t >= limit {
                return Ok(None);
            }
            let (mean, se) = expected_cycle(theta, plant, sim, repeats, 0)?;
            Ok(Some((*theta, mean, se, t)))
        })
        .collect::<Result<Vec<_>>>()?;
    let feasible: Vec<_> = scored.into_iter().flatten().collect();
    let best = feasible
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.3.total_cmp(&b.3)))
        .ok_or(Error::NoFeasiblePoint)?;
    Ok(OracleResult {
        theta: best.0,
        expected_cycle: best.1,
        std_error: best.2,
        t_st: best.3,
        feasible_points: feasible.len(),
        grid_points: grid.len(),
    })
}
