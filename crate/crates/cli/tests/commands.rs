use std::path::Path;
use std::process::{Command, Output};

fn hgu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgu-startup"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_reports_startup_time_or_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hgu(dir.path(), &["simulate", "--out-dir", "run"]);
    assert_eq!(ok.status.code(), Some(0));
    let line = stdout(&ok);
    let t: f64 = line
        .lines()
        .find_map(|l| l.strip_prefix("t_st: "))
        .and_then(|v| v.trim_end_matches(" s").parse().ok())
        .expect("numeric startup time");
    assert!(t < 180.0);
    let csv = std::fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    assert!(csv.starts_with("time_s,omega,opening"));

    let closed = hgu(dir.path(), &["simulate", "--r-o", "0.05", "--o-ini", "0", "--o-trigger", "0"]);
    assert_eq!(closed.status.code(), Some(0));
    assert!(stdout(&closed).contains("timeout"));
}

#[test]
fn invalid_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "f_e = 7.0\n").unwrap();
    assert_eq!(hgu(dir.path(), &["--config", "bad.toml", "simulate"]).status.code(), Some(2));
    std::fs::write(dir.path().join("typo.toml"), "t_stt = 60\n").unwrap();
    assert_eq!(hgu(dir.path(), &["--config", "typo.toml", "simulate"]).status.code(), Some(2));
    assert_eq!(hgu(dir.path(), &["simulate", "--o-ini", "1.5"]).status.code(), Some(2));
}

#[test]
fn minimal_demo_writes_the_report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), "n_init = 2\nn_act = 0\nn_opt = 1\nn_i = 30\n").unwrap();
    let o = hgu(dir.path(), &["--config", "small.toml", "--seed", "3", "demo", "--out-dir", "demo"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("demo");
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 4);
    for f in ["strain_map.csv", "strain_map.svg", "strain_time.svg", "trajectories/step_00_init.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    let reduction = summary["reduction"].as_f64().unwrap();
    let fin = summary["final_cycle"].as_f64().unwrap();
    let best = summary["best_standard_cycle"].as_f64().unwrap();
    assert!((reduction - (1.0 - fin / best)).abs() < 1e-12);
}

#[test]
fn default_demo_reduces_strain_by_a_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgu(dir.path(), &["demo"]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert!(summary["reduction"].as_f64().unwrap() >= 0.25, "{summary}");
}

#[test]
fn operator_campaign_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "n_init = 2\nn_act = 0\nn_opt = 1\nn_i = 20\nraw_rate = 5000.0\n").unwrap();
    let cfg = ["--config", "run.toml", "--out-dir", "camp"];
    let run = |extra: &[&str]| {
        let mut args: Vec<&str> = cfg.to_vec();
        args.extend_from_slice(extra);
        hgu(d, &args)
    };

    assert_eq!(run(&["campaign", "init"]).status.code(), Some(0));
    let state_path = d.join("camp/campaign_state.json");
    let status = stdout(&run(&["campaign", "status"]));
    assert!(status.contains("phase: init") && status.contains("step: 0 of 3"), "{status}");

    let p = run(&["campaign", "propose"]);
    assert_eq!(p.status.code(), Some(0));
    let proposal: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("camp/proposal.json")).unwrap()).unwrap();
    assert_eq!(proposal["theta"]["r_o"].as_f64(), Some(0.10));
    assert_eq!(proposal["theta"]["o_ini"].as_f64(), Some(0.24));
    assert!(proposal["constraints"].is_object());

    // a wrong-width CSV is refused without touching the state
    std::fs::write(d.join("bad.csv"), "time_s,omega,opening\n0,0,0\n").unwrap();
    let before = std::fs::read(&state_path).unwrap();
    assert_eq!(run(&["campaign", "ingest", "--file", "bad.csv"]).status.code(), Some(2));
    assert_eq!(std::fs::read(&state_path).unwrap(), before);

    for step in 0..3 {
        if step > 0 {
            assert_eq!(run(&["campaign", "propose"]).status.code(), Some(0));
        }
        let theta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.join("camp/proposal.json")).unwrap()).unwrap();
        let t = &theta["theta"];
        let m = run(&[
            "--seed",
            &step.to_string(),
            "measure",
            "--r-o",
            &t["r_o"].to_string(),
            "--o-ini",
            &t["o_ini"].to_string(),
            "--omega-trigger",
            &t["omega_trigger"].to_string(),
            "--o-trigger",
            &t["o_trigger"].to_string(),
            "--output",
            "m.csv",
        ]);
        assert_eq!(m.status.code(), Some(0), "{}", String::from_utf8_lossy(&m.stderr));
        let i = run(&["campaign", "ingest", "--file", "m.csv"]);
        assert_eq!(i.status.code(), Some(0), "{}", String::from_utf8_lossy(&i.stderr));
        assert!(d.join(format!("camp/traj_{step:03}.csv")).is_file());
    }
    let status = stdout(&run(&["campaign", "status"]));
    assert!(status.contains("campaign complete"), "{status}");
    assert_eq!(run(&["campaign", "propose"]).status.code(), Some(2));

    let text = std::fs::read_to_string(&state_path).unwrap();
    std::fs::write(&state_path, text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1)).unwrap();
    assert_eq!(run(&["campaign", "status"]).status.code(), Some(3));
}
