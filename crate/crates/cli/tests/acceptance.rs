//! End-to-end acceptance checks. Runs with its own harness and prints one
//! PASS/FAIL line per check; exits non-zero if any check fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use startup_core::blackbox::{
    alpha_d, mads_optimize, strain_cost, time_cost, CostBreakdown, CostMode, OptBox, OptBudget,
};
use startup_core::campaign::{run_closed_loop, CampaignBudgets, CampaignContext};
use startup_core::envelope::{compute_envelope, downsample_envelope, MeasuredTrajectory};
use startup_core::plant::{expected_cycle, oracle_optimum, run_startup, PlantStrainModel};
use startup_core::sensor::{
    EnvelopePrediction, NetOutput, SensorEnsemble, SensorNet, TrainConfig, TrainingRows,
};
use startup_core::sim::{
    dynamics_rhs, rk4_step, GovernorConfig, GovernorPhase, GovernorState, HillChart, PlantPhysics,
    SimContext, StartupParams, StartupTime, TorqueSurface,
};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

// ---------------------------------------------------------------- envelope

fn naive_envelope(s: &[f64], w: usize) -> (Vec<f64>, Vec<f64>) {
    let (left, right) = (w.div_ceil(2), w / 2);
    let n = s.len();
    (0..n)
        .map(|i| {
            let win = &s[i.saturating_sub(left)..=(i + right).min(n - 1)];
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for &v in win {
                hi = hi.max(v);
                lo = lo.min(v);
            }
            (hi, lo)
        })
        .unzip()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> usize {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp().round() as usize
}

fn envelope_exactness() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut longest = 0;
    for case in 0..1000 {
        let n = log_uniform(&mut rng, 10.0, 1e5).clamp(10, 100_000);
        let w = log_uniform(&mut rng, 1.0, 5000.0).clamp(1, 5000);
        longest = longest.max(n);
        let s: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (u, l) = compute_envelope(&s, w).map_err(|e| e.to_string())?;
        let (nu, nl) = naive_envelope(&s, w);
        if u != nu || l != nl {
            return Err(format!("case {case}: n={n} w={w} differs from the naive windowed max/min"));
        }
        let stride = 1 + rng.gen_range(0..20);
        let f_m = stride as f64 * 10.0;
        let zeros = vec![0.0; n];
        let env = downsample_envelope(&u, &l, &zeros, &zeros, f_m, 10.0, w).map_err(|e| e.to_string())?;
        let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_l = l.iter().copied().fold(f64::INFINITY, f64::min);
        let dmax = env.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dmin = env.lower.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
        if dmax != max_u || dmin != min_l || dmax != smax || dmin != smin {
            return Err(format!("case {case}: extremes not preserved through decimation"));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        secs < 60.0,
        format!("1000 signals (up to n={longest}) exact, extremes preserved, {secs:.1} s"),
        format!("exact but took {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- rk4 + lookup

fn segment_end(q0: [f64; 3], gov: &GovernorState, params: &StartupParams, duration: f64, h: f64) -> [f64; 3] {
    let cfg = GovernorConfig::default();
    let physics = PlantPhysics::default();
    let chart = HillChart::default();
    let steps = (duration / h).round() as usize;
    let mut q = q0;
    for _ in 0..steps {
        q = rk4_step(|s| dynamics_rhs(s, gov, params, &cfg, &physics, &chart), &q, h);
    }
    q
}

fn max_diff(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bilinear_oracle(s: &TorqueSurface, omega: f64, opening: f64) -> f64 {
    let (wg, og) = (s.omega_grid(), s.opening_grid());
    let w = omega.clamp(wg[0], wg[wg.len() - 1]);
    let o = opening.clamp(og[0], og[og.len() - 1]);
    let i = (0..wg.len() - 1).rev().find(|&i| wg[i] <= w).unwrap_or(0);
    let j = (0..og.len() - 1).rev().find(|&j| og[j] <= o).unwrap_or(0);
    let tw = (w - wg[i]) / (wg[i + 1] - wg[i]);
    let to = (o - og[j]) / (og[j + 1] - og[j]);
    // first along ω at both openings, then along o
    let low = s.node(i, j) + tw * (s.node(i + 1, j) - s.node(i, j));
    let high = s.node(i, j + 1) + tw * (s.node(i + 1, j + 1) - s.node(i, j + 1));
    low + to * (high - low)
}

fn rk4_order_and_lookup() -> Outcome {
    let standard = StartupParams::STANDARD;
    let cases = [
        (
            "ramp-up",
            GovernorPhase::RampUp,
            StartupParams::new(0.02, 0.34, 0.97, 0.15),
            [0.0, 0.0, 0.0],
        ),
        ("plateau-1", GovernorPhase::Plateau1, standard, [0.3, 0.2, 0.24]),
        ("plateau-2", GovernorPhase::Plateau2, standard, [0.97, 0.24, 0.15]),
    ];
    let mut ratios = Vec::new();
    for (name, phase, params, q0) in cases {
        let gov = GovernorState {
            phase,
            u: q0[2],
            ..GovernorState::default()
        };
        let ends: Vec<[f64; 3]> = [0.4, 0.2, 0.1].iter().map(|&h| segment_end(q0, &gov, &params, 8.0, h)).collect();
        let ratio = max_diff(&ends[0], &ends[1]) / max_diff(&ends[1], &ends[2]);
        ratios.push((name, ratio));
    }
    let bad: Vec<_> = ratios.iter().filter(|(_, r)| !(12.0..=20.0).contains(r)).collect();
    if !bad.is_empty() {
        return Err(format!("step-halving ratios out of [12, 20]: {ratios:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let random_surface = {
        let mut wg: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mut og: Vec<f64> = (0..9).map(|_| rng.gen::<f64>()).collect();
        wg.sort_by(f64::total_cmp);
        og.sort_by(f64::total_cmp);
        wg.dedup();
        og.dedup();
        let t: Vec<f64> = (0..wg.len() * og.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        TorqueSurface::new(wg, og, t).map_err(|e| e.to_string())?
    };
    let default_surface = TorqueSurface::synthetic_default();
    let scale = (0..25)
        .flat_map(|i| (0..25).map(move |j| (i, j)))
        .map(|(i, j)| default_surface.node(i, j).abs())
        .fold(0.0, f64::max);
    for _ in 0..10_000 {
        let (w, o) = (rng.gen_range(-0.2..2.2), rng.gen_range(-0.1..1.1));
        worst = worst.max((random_surface.lookup(w, o) - bilinear_oracle(&random_surface, w, o)).abs());
        let rel = (default_surface.lookup(w, o) - bilinear_oracle(&default_surface, w, o)).abs() / scale;
        worst = worst.max(rel);
    }
    let ratio_txt: Vec<String> = ratios.iter().map(|(n, r)| format!("{n} {r:.2}")).collect();
    check(
        worst <= 1e-12,
        format!("halving ratios {}; lookup max deviation {worst:.1e} on 2x10^4 queries", ratio_txt.join(", ")),
        format!("lookup deviates by {worst:.3e}"),
    )
}

// ---------------------------------------------------------------- gradients

fn random_net(rng: &mut ChaCha8Rng) -> SensorNet {
    let mut net = SensorNet::init(rng, 1e-4);
    for p in net.params.iter_mut() {
        let eps: f64 = StandardNormal.sample(rng);
        *p += 0.1 * eps;
    }
    net
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn beta_nll_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let beta = 0.5;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut min_unstopped: f64 = f64::INFINITY;
    let mut refined = 0;
    for _ in 0..20 {
        let net = random_net(&mut rng);
        let x: Vec<[f64; 2]> = (0..8).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let y: Vec<[f64; 2]> = (0..8).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]).collect();
        let (_, grad) = net.loss_and_grad(&x, &y, beta).map_err(|e| e.to_string())?;
        let (wu, wl) = net.beta_weights(&x, beta).map_err(|e| e.to_string())?;
        let mut frozen = vec![0.0; grad.len()];
        let mut unstopped = vec![0.0; grad.len()];
        let central = |i: usize, step: f64| -> Result<f64, String> {
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.params[i] += step;
            minus.params[i] -= step;
            let lp = plus.loss_with_weights(&x, &y, &wu, &wl).map_err(|e| e.to_string())?;
            let lm = minus.loss_with_weights(&x, &y, &wu, &wl).map_err(|e| e.to_string())?;
            Ok((lp - lm) / (2.0 * step))
        };
        for i in 0..grad.len() {
            frozen[i] = central(i, h)?;
            // a ReLU kink inside [θ − h, θ + h] makes the difference quotient
            // meaningless there; the half step exposes it
            let half = central(i, 0.5 * h)?;
            if (frozen[i] - half).abs() > 1e-6 * (1.0 + frozen[i].abs()) {
                frozen[i] = central(i, 1e-2 * h)?;
                refined += 1;
            }
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.params[i] += h;
            minus.params[i] -= h;
            let (fp, _) = plus.loss_and_grad(&x, &y, beta).map_err(|e| e.to_string())?;
            let (fm, _) = minus.loss_and_grad(&x, &y, beta).map_err(|e| e.to_string())?;
            unstopped[i] = (fp - fm) / (2.0 * h);
        }
        let diff: Vec<f64> = grad.iter().zip(&frozen).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&grad).max(norm(&frozen)));
        // letting the weight follow θ changes the derivative, so the analytic
        // gradient would disagree with it if the factor were not stopped
        let diff_u: Vec<f64> = grad.iter().zip(&unstopped).map(|(a, b)| a - b).collect();
        min_unstopped = min_unstopped.min(norm(&diff_u) / norm(&grad));
    }

    // the frozen weights must reproduce the training loss itself
    let net = random_net(&mut rng);
    let x: Vec<[f64; 2]> = (0..8).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let y: Vec<[f64; 2]> = (0..8).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]).collect();
    let (l0, g0) = net.loss_and_grad(&x, &y, beta).map_err(|e| e.to_string())?;
    let (wu, wl) = net.beta_weights(&x, beta).map_err(|e| e.to_string())?;
    let lw = net.loss_with_weights(&x, &y, &wu, &wl).map_err(|e| e.to_string())?;
    let (_, g_again) = net.loss_and_grad(&x, &y, beta).map_err(|e| e.to_string())?;
    if (l0 - lw).abs() > 1e-12 || g0 != g_again {
        return Err("weighted loss does not match the stop-gradient loss".into());
    }
    check(
        worst < 1e-4 && min_unstopped > 1e-3,
        format!(
            "20 nets, h = 1e-4: max relative error {worst:.2e} ({refined} of {} coordinates straddled a ReLU kink and used h = 1e-6); \
             a differentiated weight would shift the gradient by >= {min_unstopped:.2e}",
            20 * startup_core::sensor::net::N_PARAMS
        ),
        format!("relative error {worst:.2e}, stop-gradient separation {min_unstopped:.2e}"),
    )
}

// ---------------------------------------------------------------- sensor

fn heteroscedastic_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let truth_mu = |w: f64, o: f64| (std::f64::consts::PI * w).sin() * o;
    let truth_sigma = |o: f64| 0.05 + 0.1 * o;
    let mut rows = TrainingRows {
        inputs: Vec::new(),
        targets: Vec::new(),
    };
    for _ in 0..10_000 {
        let (w, o): (f64, f64) = (rng.gen(), rng.gen());
        let (e1, e2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let m = truth_mu(w, o);
        rows.inputs.push([w, o]);
        rows.targets.push([m + truth_sigma(o) * e1, -m + truth_sigma(o) * e2]);
    }
    let cfg = TrainConfig {
        epochs: 100,
        seed: 6,
        ..TrainConfig::default()
    };
    let ens = SensorEnsemble::train_rows(&rows, &cfg).map_err(|e| e.to_string())?;
    let (mut worst, mut se, mut n) = (0.0f64, 0.0, 0.0);
    for i in 0..7 {
        for j in 0..7 {
            let (w, o) = (0.2 + 0.1 * i as f64, 0.2 + 0.1 * j as f64);
            let p = ens.predict(w, o).map_err(|e| e.to_string())?;
            let s = truth_sigma(o);
            worst = worst.max((p.sigma_u / s - 1.0).abs()).max((p.sigma_l / s - 1.0).abs());
            se += (p.mu_u - truth_mu(w, o)).powi(2) + (p.mu_l + truth_mu(w, o)).powi(2);
            n += 2.0;
        }
    }
    let rmse = (se / n).sqrt();

    let mut clone_ens = ens.clone();
    let first = clone_ens.members[0].clone();
    for m in clone_ens.members.iter_mut() {
        *m = first.clone();
    }
    let clones_flat = (0..20).all(|k| {
        let p = clone_ens.predict(0.05 * k as f64, 0.5).expect("trained");
        p.sigma_ep_u == 0.0 && p.sigma_ep_l == 0.0
    });
    check(
        worst <= 0.2 && rmse < 0.05 && clones_flat,
        format!("7x7 interior grid: worst sigma error {:.1} %, mu RMSE {rmse:.4}; clones give zero spread", 100.0 * worst),
        format!("worst sigma error {:.1} %, mu RMSE {rmse:.4}, clones flat {clones_flat}", 100.0 * worst),
    )
}

// ---------------------------------------------------------------- cost table

fn measured(strain: Vec<f64>) -> MeasuredTrajectory {
    let n = strain.len();
    MeasuredTrajectory {
        f_m: 1.0,
        omega: vec![0.0; n],
        opening: vec![0.0; n],
        strain,
        params: StartupParams::STANDARD,
    }
}

fn pred(sum_u: f64, sum_l: f64) -> EnvelopePrediction {
    EnvelopePrediction::from_members(&[NetOutput {
        mu_u: sum_u - 0.05,
        sigma_u: 0.05,
        mu_l: sum_l - 0.05,
        sigma_l: 0.05,
    }])
}

fn cost_table() -> Outcome {
    let limit = 90.0;
    let a = time_cost(StartupTime::At(40.0), limit);
    let b = time_cost(StartupTime::At(67.5), limit);
    let c = time_cost(StartupTime::At(105.0), limit);
    if a != 0.0 || (b - 0.025).abs() > 1e-15 || (c - 1.833_333_333_333_333_3).abs() > 1e-12 {
        return Err(format!("branch values {a}, {b}, {c}"));
    }
    let left = time_cost(StartupTime::At(45.0 - 1e-9), limit);
    let right = time_cost(StartupTime::At(45.0 + 1e-9), limit);
    if left != 0.0 || right > 1e-9 {
        return Err("time cost is not continuous at half the limit".into());
    }
    let before = time_cost(StartupTime::At(limit - 1e-9), limit);
    let at = time_cost(StartupTime::At(limit), limit);
    if !((before - 0.05).abs() < 1e-9 && at == 1.0) {
        return Err("time cost lacks the jump at the limit".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for k in 0..1000 {
        let lo = rng.gen_range(-2.0..0.0);
        let hi = lo + rng.gen_range(0.05..3.0);
        let ad = alpha_d(&[measured(vec![lo, hi])]).map_err(|e| e.to_string())?;
        let len = rng.gen_range(1..200);
        let traj: Vec<EnvelopePrediction> = (0..len)
            .map(|_| pred(rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)))
            .collect();
        let feasible_cs = strain_cost(&traj);
        let t_feasible = rng.gen_range(0.0..limit);
        let t_late = rng.gen_range(limit..2.0 * limit);
        let feasible = CostBreakdown::new(feasible_cs, time_cost(StartupTime::At(t_feasible), limit), ad, t_feasible, CostMode::Standard);
        let late_cc = time_cost(StartupTime::At(t_late), limit);
        if !(ad * feasible_cs <= 1.0 + 1e-12 && late_cc >= 1.0 && ad * feasible_cs <= late_cc) {
            return Err(format!("case {k}: normalized strain cost exceeds the time penalty"));
        }
        if !(feasible.total <= 1.05 + 1e-12 && feasible.total <= late_cc + 0.05) {
            return Err(format!("case {k}: feasible total {} too large", feasible.total));
        }
    }
    Ok("branches 0 / 0.025 / 1.8333, continuity at T/2, jump at T; dominance on 1000 trajectories".into())
}

// ---------------------------------------------------------------- optimizer

fn optimizer_benchmark() -> Outcome {
    let unit = OptBox::new([0.0; 4], [1.0; 4]).map_err(|e| e.to_string())?;
    let sphere = |p: &StartupParams| -> startup_core::Result<CostBreakdown> {
        let f = p.to_array().iter().map(|v| (v - 0.5).powi(2)).sum::<f64>();
        Ok(CostBreakdown::new(f, 0.0, 1.0, 0.0, CostMode::Standard))
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = StartupParams::from_array(std::array::from_fn(|_| rng.gen()));
        let budget = OptBudget {
            max_evals: 200,
            seed,
            initial_points: vec![start],
            ..OptBudget::default()
        };
        let r = mads_optimize(sphere, &unit, &budget).map_err(|e| e.to_string())?;
        let bsf = r.best_so_far();
        if r.evaluations > 200 || !bsf.windows(2).all(|w| w[1] <= w[0]) {
            return Err(format!("seed {seed}: budget or monotonicity violated"));
        }
        worst = worst.max(r.best.total);
    }
    check(
        worst <= 1e-3,
        format!("10/10 seeds reach f <= 1e-3 (worst {worst:.2e}) within 200 evaluations"),
        format!("worst best value {worst:.3e}"),
    )
}

// ---------------------------------------------------------------- closed loop

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct LoopStats {
    ratios: Vec<f64>,
    expected: Vec<f64>,
    thetas: Vec<StartupParams>,
    final_feasible: Vec<bool>,
    secs_per_loop: f64,
}

fn campaigns(t_st: f64, seeds: std::ops::Range<u64>, plant: &PlantStrainModel) -> Result<LoopStats, String> {
    let mut ctx = CampaignContext::default();
    ctx.sim.physics.t_st_limit = t_st;
    let t0 = Instant::now();
    let mut out = LoopStats {
        ratios: Vec::new(),
        expected: Vec::new(),
        thetas: Vec::new(),
        final_feasible: Vec::new(),
        secs_per_loop: 0.0,
    };
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let r = run_closed_loop(CampaignBudgets::default(), plant, &ctx, seed).map_err(|e| e.to_string())?;
        let fin = r.final_run.clone().ok_or("no final run")?;
        let best_std = r.campaign.state.best_standard_cycle().ok_or("no standard run")?;
        out.ratios.push(fin.largest_cycle / best_std);
        out.thetas.push(fin.theta);
        out.final_feasible.push(fin.feasible);
        let (m, _) = expected_cycle(&fin.theta, plant, &ctx.sim, 16, 1_000_000).map_err(|e| e.to_string())?;
        out.expected.push(m);
    }
    out.secs_per_loop = t0.elapsed().as_secs_f64() / (n as f64 * 9.0);
    Ok(out)
}

fn closed_loop_headline(stats: &LoopStats, plant: &PlantStrainModel) -> Outcome {
    let t0 = Instant::now();
    let oracle = oracle_optimum(plant, &SimContext::default(), &OptBox::default(), 10, 8).map_err(|e| e.to_string())?;
    let oracle_secs = t0.elapsed().as_secs_f64();
    let med_ratio = median(&mut stats.ratios.clone());
    let med_expected = median(&mut stats.expected.clone());
    let gap = (med_expected - oracle.expected_cycle).abs() / oracle.expected_cycle;
    let worst_gap = stats
        .expected
        .iter()
        .map(|e| (e - oracle.expected_cycle).abs() / oracle.expected_cycle)
        .fold(0.0, f64::max);
    let detail = format!(
        "median final/best-standard {med_ratio:.3}; median expected final cycle {med_expected:.3} vs oracle {:.3} \
         ({} feasible of {} grid points), gap {:.1} % (worst seed {:.1} %); {:.1} s per outer loop, oracle {oracle_secs:.0} s",
        oracle.expected_cycle,
        oracle.feasible_points,
        oracle.grid_points,
        100.0 * gap,
        100.0 * worst_gap,
        stats.secs_per_loop
    );
    check(
        med_ratio <= 0.75 && gap <= 0.15 && stats.secs_per_loop < 60.0,
        detail.clone(),
        detail,
    )
}

fn constraint_compliance(stats90: &LoopStats, plant: &PlantStrainModel) -> Outcome {
    let sim = SimContext::default();
    let mut worst_ok = 20;
    for theta in &stats90.thetas {
        let mut ok = 0;
        for seed in 0..20 {
            let t = run_startup(theta, plant, &sim, 7_000 + seed).map_err(|e| e.to_string())?;
            if t.t_st() < sim.physics.t_st_limit {
                ok += 1;
            }
        }
        worst_ok = worst_ok.min(ok);
    }
    let stats60 = campaigns(60.0, 0..10, plant)?;
    let reductions: Vec<f64> = stats60.ratios.iter().map(|r| 1.0 - r).collect();
    let med_red = median(&mut reductions.clone());
    let all_feasible = stats60.final_feasible.iter().all(|&f| f);
    let detail = format!(
        "90 s: every final θ feasible in >= {worst_ok}/20 runs; 60 s: median reduction {:.1} %, final θ feasible in {}/10 campaigns",
        100.0 * med_red,
        stats60.final_feasible.iter().filter(|&&f| f).count()
    );
    check(worst_ok >= 19 && med_red >= 0.15 && all_feasible, detail.clone(), detail)
}

// ---------------------------------------------------------------- determinism

fn demo_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_hgu-startup");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}"));
        let status = Command::new(bin)
            .args(["demo", "--seed", "42", "--out-dir"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("demo failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push(std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())?);
    }
    check(
        outputs[0] == outputs[1],
        format!("two demo runs with seed 42 give identical summary.json ({} bytes)", outputs[0].len()),
        "summary.json differs between runs".into(),
    )
}

fn main() -> ExitCode {
    let plant = PlantStrainModel::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "envelope exactness", envelope_exactness()));
    results.push((2, "RK4 order and bilinear lookup", rk4_order_and_lookup()));
    results.push((3, "beta-NLL gradient check", beta_nll_gradients()));
    results.push((4, "heteroscedastic recovery", heteroscedastic_recovery()));
    results.push((5, "cost function table", cost_table()));
    results.push((6, "optimizer benchmark", optimizer_benchmark()));
    match campaigns(90.0, 0..10, &plant) {
        Ok(stats) => {
            results.push((7, "closed-loop reduction vs oracle", closed_loop_headline(&stats, &plant)));
            results.push((8, "time-constraint compliance", constraint_compliance(&stats, &plant)));
        }
        Err(e) => {
            results.push((7, "closed-loop reduction vs oracle", Err(e.clone())));
            results.push((8, "time-constraint compliance", Err(e)));
        }
    }
    results.push((9, "demo determinism", demo_determinism()));

    let mut failed = 0;
    for (k, name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {k} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {k} {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
