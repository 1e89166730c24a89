//! `hgu-startup`: simulate startups, run synthetic closed-loop demos and
//! drive a measurement campaign step by step.

mod plot;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use startup_core::campaign::{self, run_closed_loop, Campaign, CampaignState, Phase, Proposal};
use startup_core::config::RunConfig;
use startup_core::envelope::{LargestCycle, MeasuredTrajectory};
use startup_core::plant::run_startup_at;
use startup_core::sim::{StartupParams, StartupTime};
use startup_core::Error;

#[derive(Parser, Debug)]
#[command(name = "hgu-startup", version, about = "Startup governor optimization for hydro units")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts (default: `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct ThetaArgs {
    /// Opening rate, fraction of full opening per second.
    #[arg(long, default_value_t = StartupParams::STANDARD.r_o)]
    r_o: f64,
    #[arg(long, default_value_t = StartupParams::STANDARD.o_ini)]
    o_ini: f64,
    #[arg(long, default_value_t = StartupParams::STANDARD.omega_trigger)]
    omega_trigger: f64,
    #[arg(long, default_value_t = StartupParams::STANDARD.o_trigger)]
    o_trigger: f64,
}

impl ThetaArgs {
    fn params(&self) -> StartupParams {
        StartupParams::new(self.r_o, self.o_ini, self.omega_trigger, self.o_trigger)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one startup and write its speed and opening.
    Simulate {
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// Run one startup on the synthetic plant and write the measurement CSV.
    Measure {
        #[command(flatten)]
        theta: ThetaArgs,
        /// Output file (default: <out-dir>/measurement.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-loop campaign against the synthetic plant with full reports.
    Demo,
    /// Operator campaign, one step at a time.
    Campaign {
        #[command(subcommand)]
        action: CampaignAction,
    },
}

#[derive(Subcommand, Debug)]
enum CampaignAction {
    /// Create a fresh campaign state.
    Init,
    /// Propose the next startup parameters.
    Propose,
    /// Add a measured startup for the pending proposal.
    Ingest {
        /// Measurement CSV (time_s,omega,opening,strain).
        #[arg(long)]
        file: PathBuf,
    },
    /// Print the campaign phase and progress.
    Status,
}

/// Settings resolved from the config file and the command line.
struct Resolved {
    cfg: RunConfig,
    out_dir: PathBuf,
}

fn resolve(common: &Common) -> Result<Resolved> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_path(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    Ok(Resolved { cfg, out_dir })
}

fn cmd_simulate(r: &Resolved, theta: StartupParams) -> Result<()> {
    let sim = r.cfg.sim_context()?;
    let traj = sim.simulate(&theta)?;
    let path = r.out_dir.join("trajectory.csv");
    report::write_dynamic_csv(&path, &traj)?;
    match traj.t_st {
        StartupTime::At(t) => println!("t_st: {t:.1} s"),
        StartupTime::Timeout => println!("t_st: timeout (> {:.1} s)", 2.0 * r.cfg.t_st),
    }
    println!("trajectory: {}", path.display());
    Ok(())
}

fn cmd_measure(r: &Resolved, theta: StartupParams, output: Option<PathBuf>) -> Result<()> {
    let plant = r.cfg.plant()?;
    let sim = r.cfg.sim_context()?;
    let (traj, t_st) = run_startup_at(&theta, &plant, &sim, r.cfg.seed, r.cfg.raw_rate)?;
    let path = output.unwrap_or_else(|| r.out_dir.join("measurement.csv"));
    let mut buf = Vec::new();
    traj.to_csv_writer(&mut buf)?;
    campaign::write_atomic(&path, &buf)?;
    println!("t_st: {t_st}");
    println!("largest cycle: {:.4}", traj.largest_cycle());
    println!("measurement: {}", path.display());
    Ok(())
}

fn cmd_demo(r: &Resolved) -> Result<()> {
    let plant = r.cfg.plant()?;
    let ctx = r.cfg.campaign_context()?;
    let result = run_closed_loop(r.cfg.budgets()?, &plant, &ctx, r.cfg.seed)?;
    let summary = report::write_demo_bundle(&r.out_dir, &result, &ctx, r.cfg.seed, &plant)?;
    for row in &result.campaign.state.history {
        println!(
            "{:>2} {:<6} {}  t_st={:>6.1} s  cycle={:.3}",
            row.step, row.phase, row.theta, row.t_st, row.largest_cycle
        );
    }
    if let Some(red) = summary.reduction {
        println!("reduction vs best standard: {:.1} %", 100.0 * red);
    }
    println!("reports: {}", r.out_dir.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ProposalFile {
    #[serde(flatten)]
    proposal: Proposal,
    /// Box limits of the optimization phases.
    constraints: startup_core::blackbox::OptBox,
}

fn state_path(r: &Resolved) -> PathBuf {
    r.cfg
        .state_file
        .clone()
        .unwrap_or_else(|| r.out_dir.join("campaign_state.json"))
}

fn state_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_campaign(r: &Resolved) -> Result<(Campaign, PathBuf)> {
    let path = state_path(r);
    let state = CampaignState::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let ctx = r.cfg.campaign_context()?;
    let c = Campaign::restore(state, &state_dir(&path), &ctx)?;
    Ok((c, path))
}

fn cmd_campaign(r: &Resolved, action: CampaignAction) -> Result<()> {
    match action {
        CampaignAction::Init => {
            let path = state_path(r);
            let state = CampaignState::new(r.cfg.budgets()?, r.cfg.seed)?;
            state.save(&path)?;
            println!("state: {} (step 0, phase {})", path.display(), state.phase);
        }
        CampaignAction::Propose => {
            let (c, path) = load_campaign(r)?;
            let ctx = r.cfg.campaign_context()?;
            let proposal = c.propose_next(&ctx)?;
            let file = ProposalFile {
                proposal,
                constraints: ctx.bbox,
            };
            let out = state_dir(&path).join("proposal.json");
            campaign::write_atomic(&out, &serde_json::to_vec_pretty(&file)?)?;
            println!("step {} ({}): {}", file.proposal.step, file.proposal.phase, file.proposal.theta);
            println!("proposal: {}", out.display());
        }
        CampaignAction::Ingest { file } => {
            let (mut c, path) = load_campaign(r)?;
            let dir = state_dir(&path);
            let pending: ProposalFile = serde_json::from_slice(
                &std::fs::read(dir.join("proposal.json")).context("no pending proposal; run `campaign propose`")?,
            )?;
            if pending.proposal.step != c.state.step {
                return Err(Error::ValidationFailure(format!(
                    "proposal is for step {}, campaign is at step {}",
                    pending.proposal.step, c.state.step
                ))
                .into());
            }
            let ctx = r.cfg.campaign_context()?;
            let theta = pending.proposal.theta;
            let traj = MeasuredTrajectory::from_csv_path(&file, ctx.f_m, theta)
                .with_context(|| format!("reading {}", file.display()))?;
            let step = c.state.step;
            let name = format!("traj_{step:03}.csv");
            c.ingest(&theta, traj, &ctx, Some(name.clone()))?;

            let mut buf = Vec::new();
            c.dataset.last().expect("ingested").to_csv_writer(&mut buf)?;
            campaign::write_atomic(&dir.join(&name), &buf)?;
            let ck = format!("sensor_{:03}.json", step);
            c.ensemble.as_ref().expect("trained").save(dir.join(&ck))?;
            c.state.checkpoint = Some(ck);
            c.state.save(&path)?;
            let rec = c.state.history.last().expect("ingested");
            println!(
                "ingested step {}: cycle {:.4}, t_st {:.1} s; now step {} ({})",
                rec.step, rec.largest_cycle, rec.t_st, c.state.step, c.state.phase
            );
        }
        CampaignAction::Status => {
            let path = state_path(r);
            let s = CampaignState::load(&path)?;
            println!("phase: {}", s.phase);
            println!("step: {} of {}", s.step, s.budgets.total());
            match s.best_cycle() {
                Some(b) => println!("best cycle: {:.4} at step {} ({})", b.largest_cycle, b.step, b.theta),
                None => println!("best cycle: none"),
            }
            if let Some(std) = s.best_standard_cycle() {
                println!("best standard cycle: {std:.4}");
            }
            if s.phase == Phase::Done {
                println!("campaign complete");
            }
        }
    }
    Ok(())
}

/// 0 success, 1 internal error, 2 validation error, 3 state version mismatch.
fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
    match core {
        Some(Error::StateVersion { .. }) => 3,
        Some(
            Error::InvalidSurface(_)
            | Error::InvalidParams(_)
            | Error::InvalidConfig(_)
            | Error::IncompatibleRates { .. }
            | Error::EmptySignal
            | Error::ValidationFailure(_)
            | Error::CampaignExhausted
            | Error::Csv(_)
            | Error::Toml(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let r = resolve(&cli.common)?;
    match cli.command {
        Command::Simulate { theta } => cmd_simulate(&r, theta.params()),
        Command::Measure { theta, output } => cmd_measure(&r, theta.params(), output),
        Command::Demo => cmd_demo(&r),
        Command::Campaign { action } => cmd_campaign(&r, action),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
