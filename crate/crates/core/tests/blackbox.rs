use startup_core::blackbox::{
    alpha_d, evaluate_blackbox, mads_optimize, BlackboxContext, CostMode, OptBox, OptBudget,
};
use startup_core::campaign::InitialSchedule;
use startup_core::envelope::{envelope_trajectory, MeasuredTrajectory};
use startup_core::plant::{run_startup, PlantStrainModel};
use startup_core::sensor::{SensorEnsemble, TrainConfig};
use startup_core::sim::{SimContext, StartupParams};

fn trained() -> (SensorEnsemble, f64) {
    let plant = PlantStrainModel::default();
    let sim = SimContext::default();
    let measured: Vec<MeasuredTrajectory> = InitialSchedule::default()
        .points
        .iter()
        .enumerate()
        .map(|(k, t)| run_startup(t, &plant, &sim, k as u64).unwrap())
        .collect();
    let enveloped: Vec<_> = measured.iter().map(|m| envelope_trajectory(m, 10.0, 10.0).unwrap()).collect();
    let ens = SensorEnsemble::train(&enveloped, &TrainConfig::default()).unwrap();
    (ens, alpha_d(&measured).unwrap())
}

fn context(alpha: f64, mode: CostMode, short_circuit: bool) -> BlackboxContext {
    BlackboxContext {
        sim: SimContext::default(),
        alpha_d: alpha,
        mode,
        short_circuit,
    }
}

#[test]
fn standard_costs_more_than_a_slow_low_opening_startup() {
    let (ens, alpha) = trained();
    let ctx = context(alpha, CostMode::Standard, true);
    let standard = evaluate_blackbox(&StartupParams::STANDARD, &ens, &ctx).unwrap();
    let slow = evaluate_blackbox(&StartupParams::new(0.01, 0.15, 0.37, 0.21), &ens, &ctx).unwrap();
    assert!(standard.t_st < 90.0 && slow.t_st < 90.0);
    assert!(standard.total > slow.total, "{standard:?} vs {slow:?}");
}

#[test]
fn infeasible_startups_skip_the_sensor() {
    let (ens, alpha) = trained();
    let slow = StartupParams::new(0.01, 0.05, 0.5, 0.05);
    let short = evaluate_blackbox(&slow, &ens, &context(alpha, CostMode::Standard, true)).unwrap();
    let full = evaluate_blackbox(&slow, &ens, &context(alpha, CostMode::Standard, false)).unwrap();
    assert!(short.t_st >= 90.0);
    assert_eq!(short.c_s, 0.0);
    assert_eq!(short.total, short.c_c);
    assert!(short.c_c >= 1.0);
    assert_eq!(short.c_c, full.c_c);
    assert!(full.c_s > 0.0);
}

#[test]
fn evaluation_is_deterministic_and_active_is_optimistic() {
    let (ens, alpha) = trained();
    let theta = StartupParams::new(0.03, 0.2, 0.7, 0.18);
    let a = evaluate_blackbox(&theta, &ens, &context(alpha, CostMode::Standard, true)).unwrap();
    let b = evaluate_blackbox(&theta, &ens, &context(alpha, CostMode::Standard, true)).unwrap();
    assert_eq!(a, b);
    let act = evaluate_blackbox(&theta, &ens, &context(alpha, CostMode::Active, true)).unwrap();
    assert!(act.c_s <= a.c_s);
    assert_eq!(act.t_st, a.t_st);
}

#[test]
fn short_circuit_does_not_change_the_argmin() {
    let (ens, alpha) = trained();
    let bbox = OptBox::default();
    for seed in 0..2 {
        let budget = OptBudget {
            max_evals: 60,
            seed,
            initial_points: vec![StartupParams::new(0.01, 0.15, 0.8, 0.15), bbox.center()],
            ..OptBudget::default()
        };
        let run = |sc: bool| {
            let ctx = context(alpha, CostMode::Standard, sc);
            mads_optimize(|t: &StartupParams| evaluate_blackbox(t, &ens, &ctx), &bbox, &budget).unwrap()
        };
        let (on, off) = (run(true), run(false));
        assert_eq!(on.theta, off.theta);
        assert_eq!(on.best, off.best);
    }
}
