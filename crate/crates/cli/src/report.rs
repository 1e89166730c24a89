//! CSV, JSON and SVG artifacts.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use startup_core::campaign::{write_atomic, CampaignBudgets, CampaignContext, CampaignRecord, ClosedLoopResult};
use startup_core::envelope::MeasuredTrajectory;
use startup_core::plant::PlantStrainModel;
use startup_core::sensor::SensorEnsemble;
use startup_core::sim::{DynamicTrajectory, StartupParams};

use crate::plot;

/// Strain-map grid extent: speed and opening.
const MAP_OMEGA: (f64, f64, usize) = (0.0, 1.05, 43);
const MAP_OPENING: (f64, f64, usize) = (0.0, 0.40, 41);

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_dynamic_csv(path: &Path, traj: &DynamicTrajectory) -> Result<()> {
    let rows = (0..traj.len()).map(|n| {
        vec![
            traj.time(n).to_string(),
            traj.omega[n].to_string(),
            traj.opening[n].to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&["time_s", "omega", "opening"], rows)?)?;
    Ok(())
}

fn history_csv(rows: &[CampaignRecord]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "step", "phase", "r_o", "o_ini", "omega_trigger", "o_trigger", "t_st_s", "largest_cycle", "feasible",
        ],
        rows.iter().map(|r| {
            let t = r.theta.to_array();
            vec![
                r.step.to_string(),
                r.phase.to_string(),
                t[0].to_string(),
                t[1].to_string(),
                t[2].to_string(),
                t[3].to_string(),
                r.t_st.to_string(),
                r.largest_cycle.to_string(),
                r.feasible.to_string(),
            ]
        }),
    )
}

fn linspace((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Predicted `μ + σ` of both envelopes over the `(ω, o)` plane.
pub struct StrainMap {
    pub omega: Vec<f64>,
    pub opening: Vec<f64>,
    /// Row-major by ω.
    pub upper: Vec<f64>,
    csv: Vec<u8>,
}

pub fn strain_map(ensemble: &SensorEnsemble) -> Result<StrainMap> {
    let omega = linspace(MAP_OMEGA);
    let opening = linspace(MAP_OPENING);
    let (mut qw, mut qo) = (Vec::new(), Vec::new());
    for &w in &omega {
        for &o in &opening {
            qw.push(w);
            qo.push(o);
        }
    }
    let preds = ensemble.predict_batch(&qw, &qo)?;
    let csv = csv_bytes(
        &[
            "omega", "opening", "mu_u", "sigma_u", "sum_u", "sigma_ep_u", "mu_l", "sigma_l", "sum_l", "sigma_ep_l",
        ],
        preds.iter().enumerate().map(|(i, p)| {
            [qw[i], qo[i], p.mu_u, p.sigma_u, p.sum_u, p.sigma_ep_u, p.mu_l, p.sigma_l, p.sum_l, p.sigma_ep_l]
                .iter()
                .map(|v| v.to_string())
                .collect()
        }),
    )?;
    Ok(StrainMap {
        omega,
        opening,
        upper: preds.iter().map(|p| p.sum_u).collect(),
        csv,
    })
}

#[derive(Debug, Serialize)]
pub struct DemoSummary {
    pub seed: u64,
    pub budgets: CampaignBudgets,
    pub t_st_limit: f64,
    pub plant: PlantStrainModel,
    pub final_theta: Option<StartupParams>,
    pub final_cycle: Option<f64>,
    pub final_t_st: Option<f64>,
    pub final_feasible: Option<bool>,
    pub best_standard_cycle: Option<f64>,
    /// `1 − final / best standard` largest cycle.
    pub reduction: Option<f64>,
    pub alpha_d: Option<f64>,
    pub history: Vec<CampaignRecord>,
}

pub fn write_demo_bundle(
    out: &Path,
    result: &ClosedLoopResult,
    ctx: &CampaignContext,
    seed: u64,
    plant: &PlantStrainModel,
) -> Result<DemoSummary> {
    let state = &result.campaign.state;
    let traj_dir = out.join("trajectories");
    std::fs::create_dir_all(&traj_dir)?;
    let mut runs: Vec<(String, &MeasuredTrajectory)> = Vec::new();
    for (rec, t) in state.history.iter().zip(&result.campaign.dataset) {
        runs.push((format!("step_{:02}_{}", rec.step, rec.phase), t));
    }
    if let (Some(rec), Some(t)) = (&result.final_run, &result.final_trajectory) {
        runs.push((format!("step_{:02}_test", rec.step), t));
    }
    for (name, t) in &runs {
        let mut buf = Vec::new();
        t.to_csv_writer(&mut buf)?;
        write_atomic(&traj_dir.join(format!("{name}.csv")), &buf)?;
    }
    write_atomic(&out.join("history.csv"), &history_csv(&state.history)?)?;

    if let Some(ens) = &result.campaign.ensemble {
        let map = strain_map(ens)?;
        write_atomic(&out.join("strain_map.csv"), &map.csv)?;
        let paths: Vec<(String, &[f64], &[f64])> = runs
            .iter()
            .map(|(n, t)| (n.clone(), t.omega.as_slice(), t.opening.as_slice()))
            .collect();
        write_atomic(&out.join("strain_map.svg"), plot::heat_map(&map, &paths).as_bytes())?;
    }
    write_atomic(&out.join("strain_time.svg"), plot::strain_series(&runs).as_bytes())?;

    let fin = result.final_run.as_ref();
    let summary = DemoSummary {
        seed,
        budgets: state.budgets,
        t_st_limit: ctx.t_st_limit(),
        plant: *plant,
        final_theta: fin.map(|r| r.theta),
        final_cycle: fin.map(|r| r.largest_cycle),
        final_t_st: fin.map(|r| r.t_st),
        final_feasible: fin.map(|r| r.feasible),
        best_standard_cycle: state.best_standard_cycle(),
        reduction: result.reduction(),
        alpha_d: state.alpha_d,
        history: state.history.clone(),
    };
    write_atomic(&out.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}
