//! Measurement campaign: initialization, active learning and optimization
//! startups, each followed by retraining of the virtual sensor.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::blackbox::{self, mads_optimize, BlackboxContext, CostMode, OptBox, OptBudget, OptResult};
use crate::envelope::{envelope_trajectory, EnvelopedTrajectory, LargestCycle, MeasuredTrajectory};
use crate::error::{Error, Result};
use crate::plant::{run_startup, PlantStrainModel};
use crate::sensor::{SensorEnsemble, TrainConfig};
use crate::sim::{SimContext, StartupParams};

pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignBudgets {
    pub n_init: usize,
    pub n_act: usize,
    pub n_opt: usize,
}

impl Default for CampaignBudgets {
    fn default() -> Self {
        Self {
            n_init: 5,
            n_act: 2,
            n_opt: 1,
        }
    }
}

impl CampaignBudgets {
    pub fn new(n_init: usize, n_act: usize, n_opt: usize) -> Result<Self> {
        let b = Self { n_init, n_act, n_opt };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::InvalidConfig("at least two initial startups are needed".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_init + self.n_act + self.n_opt
    }

    pub fn phase_at(&self, step: usize) -> Phase {
        if step < self.n_init {
            Phase::Init
        } else if step < self.n_init + self.n_act {
            Phase::Active
        } else if step < self.total() {
            Phase::Opt
        } else {
            Phase::Done
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Active,
    Opt,
    Done,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Init => "init",
            Phase::Active => "active",
            Phase::Opt => "opt",
            Phase::Done => "done",
        };
        f.write_str(s)
    }
}

/// Pre-selected startups of the initialization phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSchedule {
    pub points: Vec<StartupParams>,
}

impl Default for InitialSchedule {
    fn default() -> Self {
        Self {
            points: vec![
                StartupParams::STANDARD,
                StartupParams::new(0.01, 0.15, 0.8, 0.15),
                StartupParams::new(0.025, 0.34, 0.8, 0.34),
                StartupParams::new(0.025, 0.20, 0.8, 0.20),
                StartupParams::STANDARD,
            ],
        }
    }
}

/// Static configuration shared by every campaign step.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignContext {
    pub sim: SimContext,
    pub train: TrainConfig,
    pub bbox: OptBox,
    pub schedule: InitialSchedule,
    /// Black-box evaluations per optimization.
    pub opt_evals: usize,
    pub envelope_window_s: f64,
    /// Rate measurements are resampled to on ingest.
    pub f_m: f64,
    pub f_e: f64,
}

impl Default for CampaignContext {
    fn default() -> Self {
        Self {
            sim: SimContext::default(),
            train: TrainConfig::default(),
            bbox: OptBox::default(),
            schedule: InitialSchedule::default(),
            opt_evals: 200,
            envelope_window_s: 10.0,
            f_m: 500.0,
            f_e: 10.0,
        }
    }
}

impl CampaignContext {
    pub fn t_st_limit(&self) -> f64 {
        self.sim.physics.t_st_limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub step: usize,
    /// Phase the startup was proposed in; the closing test run is `done`.
    pub phase: Phase,
    pub theta: StartupParams,
    pub largest_cycle: f64,
    /// Measured duration (s).
    pub t_st: f64,
    pub feasible: bool,
    /// Trajectory file relative to the state file, when persisted.
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    pub seed: u64,
    pub budgets: CampaignBudgets,
    pub step: usize,
    pub phase: Phase,
    pub alpha_d: Option<f64>,
    /// One row per ingested trajectory, plus the closing test run.
    pub history: Vec<CampaignRecord>,
    pub checkpoint: Option<String>,
}

impl CampaignState {
    pub fn new(budgets: CampaignBudgets, seed: u64) -> Result<Self> {
        budgets.validate()?;
        Ok(Self {
            schema_version: STATE_VERSION,
            seed,
            budgets,
            step: 0,
            phase: Phase::Init,
            alpha_d: None,
            history: Vec::new(),
            checkpoint: None,
        })
    }

    /// Smallest largest cycle among standard-parameter startups.
    pub fn best_standard_cycle(&self) -> Option<f64> {
        self.history
            .iter()
            .filter(|r| r.theta == StartupParams::STANDARD)
            .map(|r| r.largest_cycle)
            .min_by(f64::total_cmp)
    }

    pub fn best_cycle(&self) -> Option<&CampaignRecord> {
        self.history
            .iter()
            .filter(|r| r.feasible)
            .min_by(|a, b| a.largest_cycle.total_cmp(&b.largest_cycle))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_slice(&std::fs::read(path)?)?;
        let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != STATE_VERSION {
            return Err(Error::StateVersion {
                found,
                expected: STATE_VERSION,
            });
        }
        Ok(serde_json::from_value(raw)?)
    }
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub theta: StartupParams,
    pub phase: Phase,
    pub step: usize,
    pub t_st_limit: f64,
    pub predicted: Option<blackbox::CostBreakdown>,
}

/// State plus the in-memory dataset and the sensor trained on it.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub state: CampaignState,
    pub dataset: Vec<MeasuredTrajectory>,
    pub enveloped: Vec<EnvelopedTrajectory>,
    pub ensemble: Option<SensorEnsemble>,
}

impl Campaign {
    pub fn new(budgets: CampaignBudgets, seed: u64) -> Result<Self> {
        Ok(Self {
            state: CampaignState::new(budgets, seed)?,
            dataset: Vec::new(),
            enveloped: Vec::new(),
            ensemble: None,
        })
    }

    /// Rebuilds a campaign from a state whose trajectories are stored next
    /// to it, retraining the sensor when no checkpoint is available.
    pub fn restore(state: CampaignState, base_dir: &Path, ctx: &CampaignContext) -> Result<Self> {
        let mut dataset = Vec::new();
        for r in state.history.iter().filter(|r| r.phase != Phase::Done) {
            let file = r
                .file
                .as_ref()
                .ok_or_else(|| Error::ValidationFailure(format!("step {} has no trajectory file", r.step)))?;
            dataset.push(MeasuredTrajectory::from_csv_path(base_dir.join(file), ctx.f_m, r.theta)?);
        }
        let enveloped = dataset
            .iter()
            .map(|t| envelope_trajectory(t, ctx.envelope_window_s, ctx.f_e))
            .collect::<Result<Vec<_>>>()?;
        let train = TrainConfig {
            seed: crate::derive_seed(state.seed, dataset.len() as u64),
            ..ctx.train.clone()
        };
        let ensemble = match (&state.checkpoint, dataset.is_empty()) {
            (_, true) => None,
            (Some(ck), false) => match SensorEnsemble::load(base_dir.join(ck)) {
                Ok(e) if e.config == train => Some(e),
                _ => Some(SensorEnsemble::train(&enveloped, &train)?),
            },
            (None, false) => Some(SensorEnsemble::train(&enveloped, &train)?),
        };
        Ok(Self {
            state,
            dataset,
            enveloped,
            ensemble,
        })
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    /// Starting points for the optimizer: the feasible measured θ with the
    /// smallest largest cycle, then the box center.
    fn warm_starts(&self, ctx: &CampaignContext) -> Vec<StartupParams> {
        let mut starts = Vec::new();
        if let Some(r) = self.state.best_cycle() {
            starts.push(r.theta);
        }
        starts.push(ctx.bbox.center());
        starts
    }

    /// Runs the black-box optimizer against the current sensor.
    pub fn optimize(&self, ctx: &CampaignContext, mode: CostMode, stream: u64) -> Result<OptResult> {
        let ensemble = self.ensemble.as_ref().ok_or(Error::UntrainedNet)?;
        let bb = BlackboxContext {
            sim: ctx.sim.clone(),
            alpha_d: self.state.alpha_d.ok_or(Error::EmptyDataset)?,
            mode,
            short_circuit: true,
        };
        let budget = OptBudget {
            max_evals: ctx.opt_evals,
            seed: crate::derive_seed(self.state.seed, stream),
            initial_points: self.warm_starts(ctx),
            ..Default::default()
        };
        mads_optimize(|theta| blackbox::evaluate_blackbox(theta, ensemble, &bb), &ctx.bbox, &budget)
    }

    pub fn propose_next(&self, ctx: &CampaignContext) -> Result<Proposal> {
        let step = self.state.step;
        let (theta, predicted) = match self.state.phase {
            Phase::Done => return Err(Error::CampaignExhausted),
            Phase::Init => {
                let theta = *ctx.schedule.points.get(step).ok_or_else(|| {
                    Error::InvalidConfig(format!("initial schedule has no entry for step {step}"))
                })?;
                (theta, None)
            }
            Phase::Active => {
                let r = self.optimize(ctx, CostMode::Active, step as u64)?;
                (r.theta, Some(r.best))
            }
            Phase::Opt => {
                let r = self.optimize(ctx, CostMode::Standard, step as u64)?;
                (r.theta, Some(r.best))
            }
        };
        Ok(Proposal {
            theta,
            phase: self.state.phase,
            step,
            t_st_limit: ctx.t_st_limit(),
            predicted,
        })
    }

    /// Optimization-mode proposal made after the last ingest, used for the
    /// closing test startup.
    pub fn propose_test(&self, ctx: &CampaignContext) -> Result<Proposal> {
        let r = self.optimize(ctx, CostMode::Standard, self.state.step as u64)?;
        Ok(Proposal {
            theta: r.theta,
            phase: Phase::Done,
            step: self.state.step,
            t_st_limit: ctx.t_st_limit(),
            predicted: Some(r.best),
        })
    }

    /// Adds a measured startup, retrains the sensor from scratch on the whole
    /// dataset and advances the phase. On error nothing changes.
    pub fn ingest(
        &mut self,
        theta: &StartupParams,
        traj: MeasuredTrajectory,
        ctx: &CampaignContext,
        file: Option<String>,
    ) -> Result<()> {
        if self.state.phase == Phase::Done {
            return Err(Error::CampaignExhausted);
        }
        traj.validate()?;
        if traj.params != *theta {
            return Err(Error::ValidationFailure("trajectory parameters differ from θ".into()));
        }
        let env = envelope_trajectory(&traj, ctx.envelope_window_s, ctx.f_e)?;
        let mut measured = self.dataset.clone();
        measured.push(traj);
        let mut enveloped = self.enveloped.clone();
        enveloped.push(env);
        let alpha = blackbox::alpha_d(&measured)?;
        let train = TrainConfig {
            seed: crate::derive_seed(self.state.seed, measured.len() as u64),
            ..ctx.train.clone()
        };
        let ensemble = SensorEnsemble::train(&enveloped, &train)?;

        let last = measured.last().expect("just pushed");
        let t_st = last.t_st();
        self.state.history.push(CampaignRecord {
            step: self.state.step,
            phase: self.state.phase,
            theta: *theta,
            largest_cycle: last.largest_cycle(),
            t_st,
            feasible: t_st < ctx.t_st_limit(),
            file,
        });
        self.state.step += 1;
        self.state.phase = self.state.budgets.phase_at(self.state.step);
        self.state.alpha_d = Some(alpha);
        self.dataset = measured;
        self.enveloped = enveloped;
        self.ensemble = Some(ensemble);
        Ok(())
    }

    /// Records the closing test startup without adding it to the dataset.
    pub fn record_test(&mut self, theta: &StartupParams, traj: &MeasuredTrajectory, ctx: &CampaignContext, file: Option<String>) {
        let t_st = traj.t_st();
        self.state.history.push(CampaignRecord {
            step: self.state.step,
            phase: Phase::Done,
            theta: *theta,
            largest_cycle: traj.largest_cycle(),
            t_st,
            feasible: t_st < ctx.t_st_limit(),
            file,
        });
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    pub campaign: Campaign,
    /// The closing test startup, absent when the optimization budget is 0.
    pub final_run: Option<CampaignRecord>,
    pub final_trajectory: Option<MeasuredTrajectory>,
}

impl ClosedLoopResult {
    /// `1 − final / best standard` largest cycle.
    pub fn reduction(&self) -> Option<f64> {
        let best = self.campaign.state.best_standard_cycle()?;
        Some(1.0 - self.final_run.as_ref()?.largest_cycle / best)
    }
}

/// Plant run seed used at campaign step `step`.
pub fn plant_run_seed(campaign_seed: u64, step: usize) -> u64 {
    crate::derive_seed(campaign_seed ^ 0x05EE_D0FF_1E1D, step as u64)
}

/// Proposes, measures on the synthetic plant and ingests for every budgeted
/// step, then measures one optimization-mode proposal as the final test.
pub fn run_closed_loop(
    budgets: CampaignBudgets,
    plant: &PlantStrainModel,
    ctx: &CampaignContext,
    seed: u64,
) -> Result<ClosedLoopResult> {
    let mut campaign = Campaign::new(budgets, seed)?;
    while campaign.phase() != Phase::Done {
        let p = campaign.propose_next(ctx)?;
        let traj = run_startup(&p.theta, plant, &ctx.sim, plant_run_seed(seed, p.step))?;
        campaign.ingest(&p.theta, traj, ctx, None)?;
    }
    let (final_run, final_trajectory) = if budgets.n_opt > 0 {
        let p = campaign.propose_test(ctx)?;
        let traj = run_startup(&p.theta, plant, &ctx.sim, plant_run_seed(seed, p.step))?;
        campaign.record_test(&p.theta, &traj, ctx, None);
        (campaign.state.history.last().cloned(), Some(traj))
    } else {
        (None, None)
    };
    Ok(ClosedLoopResult {
        campaign,
        final_run,
        final_trajectory,
    })
}
