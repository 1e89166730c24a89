//! Black-box cost of a startup and its derivative-free minimization.
//!
//! A candidate is simulated, the virtual sensor is run along the simulated
//! speed and opening, and the predicted strain envelope is scored together
//! with a penalty on the startup time.

mod mads;

pub use mads::{mads_optimize, HistoryEntry, OptBudget, OptResult};

use serde::{Deserialize, Serialize};

use crate::envelope::MeasuredTrajectory;
use crate::error::{Error, Result};
use crate::sensor::{EnvelopePrediction, SensorEnsemble};
use crate::sim::{SimContext, StartupParams, StartupTime};

/// Hard limits of the four startup parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptBox {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for OptBox {
    fn default() -> Self {
        Self {
            // r_o as a fraction per second: 1 to 10 %/s
            lower: [0.01, 0.0, 0.0, 0.0],
            upper: [0.10, 0.34, 0.95, 0.21],
        }
    }
}

impl OptBox {
    pub fn new(lower: [f64; 4], upper: [f64; 4]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite() && self.lower[i] < self.upper[i]) {
                return Err(Error::InvalidConfig(format!("box axis {i} needs min < max")));
            }
        }
        Ok(())
    }

    pub fn center(&self) -> StartupParams {
        StartupParams::from_array(std::array::from_fn(|i| 0.5 * (self.lower[i] + self.upper[i])))
    }

    pub fn contains(&self, p: &StartupParams) -> bool {
        p.to_array()
            .iter()
            .enumerate()
            .all(|(i, v)| (self.lower[i]..=self.upper[i]).contains(v))
    }

    pub fn to_unit(&self, p: &StartupParams) -> [f64; 4] {
        let a = p.to_array();
        std::array::from_fn(|i| (a[i] - self.lower[i]) / (self.upper[i] - self.lower[i]))
    }

    /// Maps unit coordinates back, snapping to the box.
    pub fn from_unit(&self, x: &[f64; 4]) -> StartupParams {
        StartupParams::from_array(std::array::from_fn(|i| {
            self.lower[i] + x[i].clamp(0.0, 1.0) * (self.upper[i] - self.lower[i])
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    #[default]
    Standard,
    Active,
}

/// Simulated trajectory with the sensor's predictions at every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTrajectory {
    pub f_s: f64,
    pub omega: Vec<f64>,
    pub opening: Vec<f64>,
    pub predictions: Vec<EnvelopePrediction>,
    pub t_st: StartupTime,
}

impl SimulatedTrajectory {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c_s: f64,
    pub c_c: f64,
    pub alpha_d: f64,
    pub total: f64,
    /// Seconds, timeout counted as twice the constraint.
    pub t_st: f64,
    pub mode: CostMode,
}

impl CostBreakdown {
    pub fn new(c_s: f64, c_c: f64, alpha_d: f64, t_st: f64, mode: CostMode) -> Self {
        Self {
            c_s,
            c_c,
            alpha_d,
            total: alpha_d * c_s + c_c,
            t_st,
            mode,
        }
    }
}

fn spread(upper: impl Iterator<Item = f64>, lower: impl Iterator<Item = f64>) -> f64 {
    let hi = upper.fold(f64::NEG_INFINITY, f64::max);
    let lo = lower.fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Largest predicted strain cycle from the member-mean `μ + σ` sums.
pub fn strain_cost(predictions: &[EnvelopePrediction]) -> f64 {
    spread(
        predictions.iter().map(|p| p.sum_u),
        predictions.iter().map(|p| p.sum_l),
    )
}

/// Optimistic variant: the envelope is pulled inwards by two epistemic
/// standard deviations on each side.
pub fn active_strain_cost(predictions: &[EnvelopePrediction]) -> f64 {
    spread(
        predictions.iter().map(|p| p.sum_u - 2.0 * p.sigma_ep_u),
        predictions.iter().map(|p| p.sum_l + 2.0 * p.sigma_ep_l),
    )
}

/// Startup-time penalty: free below half the limit, a gentle slope up to the
/// limit, and a jump to at least 1 beyond it.
pub fn time_cost(t_st: StartupTime, limit: f64) -> f64 {
    let t = t_st.seconds(limit);
    let half = 0.5 * limit;
    if t < half {
        0.0
    } else if t < limit {
        0.05 * (t - half) / half
    } else {
        1.0 + (t - limit) / (0.2 * limit)
    }
}

/// Inverse of the strain range seen over the whole dataset.
pub fn alpha_d(dataset: &[MeasuredTrajectory]) -> Result<f64> {
    if dataset.iter().all(|t| t.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let range = spread(
        dataset.iter().flat_map(|t| t.strain.iter().copied()),
        dataset.iter().flat_map(|t| t.strain.iter().copied()),
    );
    if !(range > 0.0) {
        return Err(Error::DegenerateDataset(range));
    }
    Ok(1.0 / range)
}

/// Everything [`evaluate_blackbox`] needs besides θ and the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackboxContext {
    pub sim: SimContext,
    pub alpha_d: f64,
    pub mode: CostMode,
    /// Skip the sensor when the time constraint is already violated.
    pub short_circuit: bool,
}

impl BlackboxContext {
    pub fn t_st_limit(&self) -> f64 {
        self.sim.physics.t_st_limit
    }
}

/// Simulates θ and runs the sensor along the result.
pub fn simulate_with_sensor(
    theta: &StartupParams,
    ensemble: &SensorEnsemble,
    sim: &SimContext,
) -> Result<SimulatedTrajectory> {
    let traj = sim.simulate(theta)?;
    let predictions = ensemble.predict_batch(&traj.omega, &traj.opening)?;
    Ok(SimulatedTrajectory {
        f_s: traj.f_d,
        omega: traj.omega,
        opening: traj.opening,
        predictions,
        t_st: traj.t_st,
    })
}

pub fn evaluate_blackbox(
    theta: &StartupParams,
    ensemble: &SensorEnsemble,
    ctx: &BlackboxContext,
) -> Result<CostBreakdown> {
    let limit = ctx.t_st_limit();
    let traj = ctx.sim.simulate(theta)?;
    let c_c = time_cost(traj.t_st, limit);
    let t_st = traj.t_st.seconds(limit);
    if ctx.short_circuit && t_st >= limit {
        return Ok(CostBreakdown::new(0.0, c_c, ctx.alpha_d, t_st, ctx.mode));
    }
    let predictions = ensemble.predict_batch(&traj.omega, &traj.opening)?;
    let c_s = match ctx.mode {
        CostMode::Standard => strain_cost(&predictions),
        CostMode::Active => active_strain_cost(&predictions),
    };
    Ok(CostBreakdown::new(c_s, c_c, ctx.alpha_d, t_st, ctx.mode))
}
