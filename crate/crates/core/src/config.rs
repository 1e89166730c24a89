//! Flat run configuration read from a TOML file.
//!
//! Every key is optional; missing keys take the defaults below. Relative
//! paths are resolved against the directory holding the config file.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::campaign::{CampaignBudgets, CampaignContext};
use crate::error::{Error, Result};
use crate::plant::PlantStrainModel;
use crate::sensor::TrainConfig;
use crate::sim::{GovernorConfig, PlantPhysics, SimContext, TorqueSurface};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Torque surface CSV; the built-in synthetic surface when absent.
    pub torque_surface: Option<PathBuf>,
    /// TOML file with plant strain-model keys.
    pub plant_config: Option<PathBuf>,
    pub state_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,

    pub f_m: f64,
    pub f_e: f64,
    pub f_d: f64,
    /// Rate of raw plant files; equal to `f_m` unless raw emission is wanted.
    pub raw_rate: f64,
    pub window_s: f64,
    pub t_st: f64,

    pub n_init: usize,
    pub n_act: usize,
    pub n_opt: usize,
    pub n_i: usize,

    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta: f64,

    pub seed: u64,
    pub plant_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            torque_surface: None,
            plant_config: None,
            state_file: None,
            out_dir: None,
            f_m: 500.0,
            f_e: 10.0,
            f_d: 10.0,
            raw_rate: 500.0,
            window_s: 10.0,
            t_st: 90.0,
            n_init: 5,
            n_act: 2,
            n_opt: 1,
            n_i: 200,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            beta: train.beta,
            seed: 0,
            plant_seed: 0,
        }
    }
}

fn is_multiple(big: f64, small: f64) -> bool {
    let r = big / small;
    r >= 1.0 && (r - r.round()).abs() < 1e-9
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = toml::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.torque_surface,
            &mut cfg.plant_config,
            &mut cfg.state_file,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("f_m", self.f_m),
            ("f_e", self.f_e),
            ("f_d", self.f_d),
            ("raw_rate", self.raw_rate),
            ("window_s", self.window_s),
            ("t_st", self.t_st),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !is_multiple(self.f_m, self.f_e) {
            return Err(Error::IncompatibleRates {
                f_m: self.f_m,
                f_e: self.f_e,
            });
        }
        if !is_multiple(self.raw_rate, self.f_m) {
            return Err(Error::InvalidConfig("raw_rate must be an integer multiple of f_m".into()));
        }
        if self.n_i == 0 {
            return Err(Error::InvalidConfig("n_i must be >= 1".into()));
        }
        self.budgets()?;
        self.train_config().validate()?;
        for (name, p) in [("torque_surface", &self.torque_surface), ("plant_config", &self.plant_config)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::InvalidConfig(format!("{name} not found: {}", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn budgets(&self) -> Result<CampaignBudgets> {
        CampaignBudgets::new(self.n_init, self.n_act, self.n_opt)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            beta: self.beta,
            ..TrainConfig::default()
        }
    }

    pub fn sim_context(&self) -> Result<SimContext> {
        let surface = match &self.torque_surface {
            Some(p) => TorqueSurface::from_csv_path(p)?,
            None => TorqueSurface::synthetic_default(),
        };
        Ok(SimContext {
            governor: GovernorConfig {
                f_d: self.f_d,
                ..GovernorConfig::default()
            },
            physics: PlantPhysics {
                t_st_limit: self.t_st,
                ..PlantPhysics::default()
            },
            surface,
        })
    }

    pub fn plant(&self) -> Result<PlantStrainModel> {
        let base = match &self.plant_config {
            Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
            None => PlantStrainModel::default(),
        };
        let plant = PlantStrainModel {
            f_m: self.f_m,
            seed: self.plant_seed,
            ..base
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn campaign_context(&self) -> Result<CampaignContext> {
        Ok(CampaignContext {
            sim: self.sim_context()?,
            train: self.train_config(),
            opt_evals: self.n_i,
            envelope_window_s: self.window_s,
            f_m: self.f_m,
            f_e: self.f_e,
            ..CampaignContext::default()
        })
    }
}
