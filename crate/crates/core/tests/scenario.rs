use std::path::{Path, PathBuf};

use cablesim_core::scenario::{
    command_trace_csv, emit_plots, endurance, load_scenario, parse_scenario, run, slice_csv, state_trace_csv,
    write_outputs, RunReport, RunSummary,
};
use cablesim_core::model::build_allocation_matrix;
use cablesim_core::model::PropulsionArrangement;
use cablesim_core::wrench::{slice, SliceKind, ThrustBounds};
use cablesim_core::Error;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn parse(text: &str) -> cablesim_core::Result<cablesim_core::scenario::Scenario> {
    parse_scenario(text, Path::new("."))
}

const SHORT: &str = r#"
name = "short"
duration = 4.0
dt = 0.01
seed = 7

[initial]
yaw_deg = 10.0
swing_noise_deg = 1.0

[[setpoint]]
time = 0.5
yaw_deg = 0.0

[[setpoint]]
time = 2.0
yaw_deg = 5.0

[[disturbance]]
start = 1.0
duration = 0.5
force = [3.0, 0.0, 0.0]
torque = [0.0, 0.0, 2.0]
"#;

#[test]
fn row_count_is_steps_plus_one() {
    let report = run(&parse(SHORT).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 401);
    assert_eq!(state_trace_csv(&report).lines().count(), 402);
    assert_eq!(command_trace_csv(&report).lines().count(), 402);
}

#[test]
fn reruns_are_byte_identical() {
    let sc = parse(SHORT).unwrap();
    let a = run(&sc).unwrap();
    let b = run(&parse(SHORT).unwrap()).unwrap();
    assert_eq!(state_trace_csv(&a), state_trace_csv(&b));
    assert_eq!(command_trace_csv(&a), command_trace_csv(&b));
}

#[test]
fn seed_changes_initial_swing() {
    let a = parse(SHORT).unwrap();
    let b = parse(&SHORT.replace("seed = 7", "seed = 8")).unwrap();
    assert_ne!(a.initial.q, b.initial.q);
    assert_eq!(a.initial.q, parse(SHORT).unwrap().initial.q);
}

#[test]
fn setpoints_follow_zero_order_hold() {
    let sc = parse(SHORT).unwrap();
    let report = run(&sc).unwrap();
    for r in &report.rows {
        let expected = if r.time < 0.5 {
            10.0
        } else if r.time < 2.0 {
            0.0
        } else {
            5.0
        };
        assert!((r.yaw_ref.to_degrees() - expected).abs() < 1e-12, "t = {}", r.time);
    }
}

#[test]
fn injected_disturbance_integrates_to_the_pulse() {
    let sc = parse(SHORT).unwrap();
    let report = run(&sc).unwrap();
    let dt = sc.dt;
    let impulse = report.rows.iter().fold(nalgebra::Vector6::zeros(), |acc, r| acc + r.disturbance.to_vector() * dt);
    let expected = nalgebra::Vector6::new(3.0, 0.0, 0.0, 0.0, 0.0, 2.0) * 0.5;
    assert!((impulse - expected).amax() <= 3.0 * dt + 1e-12, "{impulse}");
}

#[test]
fn arm_tip_pull_integrates_to_force_and_yaw_torque() {
    let sc = load_scenario(&shipped("exp2.toml")).unwrap();
    let d = &sc.disturbances[0];
    assert!((d.wrench.force.norm() - 20.0).abs() < 1e-12);
    assert!((d.wrench.torque.z - 20.0 * 0.75).abs() < 1e-12);
    assert_eq!(d.duration, 2.0);
}

#[test]
fn equilibrium_without_inputs_is_stationary() {
    let sc = parse("duration = 2.0\ndt = 0.01\n").unwrap();
    let report = run(&sc).unwrap();
    let first = &report.rows[0];
    for r in &report.rows {
        assert!((&r.q - &first.q).amax() < 1e-12);
        assert!(r.qdot.amax() < 1e-12);
        assert_eq!(r.command.thrusts.max_abs(), 0.0);
    }
}

#[test]
fn malformed_scenarios_are_parse_errors() {
    assert_eq!(parse("duration = 1.0\ndt = 0.1\nbogus = 3\n").unwrap_err().kind(), "ParseError");
    assert_eq!(parse("duration = 1.0\n").unwrap_err().kind(), "ParseError");
    assert_eq!(parse("duration = 1.0\ndt = \"fast\"\n").unwrap_err().kind(), "ParseError");
}

#[test]
fn invalid_scenarios_are_rejected() {
    let decreasing = "duration = 5.0\ndt = 0.1\n[[setpoint]]\ntime = 2.0\nyaw_deg = 1.0\n[[setpoint]]\ntime = 1.0\nyaw_deg = 2.0\n";
    assert!(matches!(parse(decreasing), Err(Error::Invalid(_))));
    let short = "duration = 1.0\ndt = 0.1\n[[setpoint]]\ntime = 2.0\nyaw_deg = 1.0\n";
    assert!(matches!(parse(short), Err(Error::Invalid(_))));
    assert!(matches!(parse("duration = 1.0\ndt = 0.0\n"), Err(Error::Invalid(_))));
    assert!(load_scenario(Path::new("/nonexistent/scenario.toml")).is_err());
}

#[test]
fn failures_during_rollout_carry_the_step_index() {
    let text = "arrangement = \"collinear\"\nduration = 1.0\ndt = 0.01\n[initial]\nswing_deg = [2.0, 0.0, 0.0, 0.0]\n";
    let err = run(&parse(text).unwrap()).unwrap_err();
    assert_eq!(err.kind(), "RankDeficient");
    assert!(err.step().is_some());

    let text = "duration = 1.0\ndt = 0.01\n[initial]\nswing_deg = [0.0, 90.0, 0.0, 0.0]\n";
    let err = run(&parse(text).unwrap()).unwrap_err();
    assert_eq!(err.kind(), "SingularConfiguration");
    assert_eq!(err.step(), Some(0));
}

#[test]
fn exp1_converges_to_every_setpoint_without_overshoot() {
    let sc = load_scenario(&shipped("exp1.toml")).unwrap();
    let report = run(&sc).unwrap();
    let mut previous = sc.initial.q[0];
    for (i, &(t0, target)) in sc.schedule.iter().enumerate() {
        let t1 = sc.schedule.get(i + 1).map_or(sc.duration, |s| s.0);
        let segment: Vec<_> = report.rows.iter().filter(|r| r.time >= t0 && r.time < t1).collect();
        let direction = (target - previous).signum();
        let overshoot = segment.iter().map(|r| (r.q[0] - target) * direction).fold(0.0, f64::max);
        assert!(overshoot <= 0.02 * (target - previous).abs() + 1e-12);
        let settle = segment
            .iter()
            .find(|r| (r.q[0] - target).abs() < 1f64.to_radians() && r.qdot[0].abs() < 0.5f64.to_radians())
            .expect("segment settles");
        assert!(settle.time - t0 < 15.0);
        let end = segment.last().unwrap();
        assert!((end.q[0] - target).abs() < 1f64.to_radians());
        previous = target;
    }
}

#[test]
fn exp2_recovers_after_the_pulse() {
    let sc = load_scenario(&shipped("exp2.toml")).unwrap();
    let report = run(&sc).unwrap();
    let pulse_end = sc.disturbances[0].start + sc.disturbances[0].duration;
    let peak = report.rows.iter().map(|r| (r.q[0] - r.yaw_ref).abs()).fold(0.0, f64::max);
    assert!(peak > 5f64.to_radians());
    let late: Vec<_> = report.rows.iter().filter(|r| r.time >= pulse_end + 20.0).collect();
    assert!(!late.is_empty());
    assert!(late.iter().all(|r| (r.q[0] - (-153f64).to_radians()).abs() < 1f64.to_radians()));
}

#[test]
fn plot_files_are_written_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let sc = parse(SHORT).unwrap();
    let report = run(&sc).unwrap();
    let files = emit_plots(&report, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let yaw = std::fs::read_to_string(&files[0]).unwrap();
    assert!(yaw.starts_with("time,yaw_deg,yaw_ref_deg,yaw_rate_deg_s\n"));
    let last: Vec<f64> = yaw.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[2] - 5.0).abs() < 1e-12);

    let empty = RunReport {
        name: "empty".into(),
        rows: vec![],
        summary: RunSummary { final_yaw_error: 0.0, final_yaw_rate: 0.0, max_thrust: 0.0, saturation_count: 0, energy_drift: 0.0 },
        dof: 5,
        manipulator_dof: 0,
    };
    for f in emit_plots(&empty, dir.path()).unwrap() {
        assert_eq!(std::fs::read_to_string(f).unwrap().lines().count(), 1);
    }
    assert_eq!(state_trace_csv(&empty).lines().count(), 1);
}

#[test]
fn written_traces_are_byte_identical_across_runs() {
    let sc = parse(SHORT).unwrap();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = write_outputs(&sc, &run(&sc).unwrap(), d1.path()).unwrap();
    let f2 = write_outputs(&sc, &run(&sc).unwrap(), d2.path()).unwrap();
    assert_eq!(f1.len(), 4);
    for (a, b) in f1.iter().zip(&f2) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

#[test]
fn slice_csv_has_one_row_per_direction() {
    let a = build_allocation_matrix(&PropulsionArrangement::baseline());
    let s = slice(&a, &ThrustBounds::default(), SliceKind::ForceZeroTorque, 200).unwrap();
    let csv = slice_csv(&s);
    assert_eq!(csv.lines().count(), 201);
    assert_eq!(csv.lines().next().unwrap(), "x,y,z,radius");
}

#[test]
fn csv_numbers_round_trip_exactly() {
    let report = run(&parse(SHORT).unwrap()).unwrap();
    let csv = state_trace_csv(&report);
    let row: Vec<f64> = csv.lines().nth(200).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[1], report.rows[199].q[0]);
    assert_eq!(row[6], report.rows[199].qdot[0]);
}

#[test]
fn endurance_examples() {
    assert!((endurance(12, 3.7, 21.0, 48.0, 100.0).unwrap() - 11.65).abs() < 0.01);
    assert!((endurance(12, 3.7, 21.0, 48.0, 50.0).unwrap() - 23.3).abs() < 0.02);
    assert_eq!(endurance(12, 3.7, 21.0, 48.0, 0.0), Err(Error::DivisionDomain));
    assert_eq!(endurance(12, 3.7, 21.0, -48.0, 10.0), Err(Error::DivisionDomain));
}

#[test]
fn partial_gain_tables_keep_defaults() {
    let sc = parse("duration = 1.0\ndt = 0.1\n[gains]\nyaw_kp = 5.0\n").unwrap();
    assert_eq!(sc.gains.yaw.kp, 5.0);
    assert_eq!(sc.gains.yaw.kd, 40.0);
    assert_eq!(sc.gains.swing.upper.kd, 3000.0);
}
