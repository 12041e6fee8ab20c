mod common;

use cablesim_core::control::{
    manipulator_control, realize, CascadeController, ControllerGains, PdGains, References, SwingGains,
};
use cablesim_core::dynamics::chain::{PASSIVE_DOF, PITCH1, PITCH2, ROLL1, ROLL2, YAW};
use cablesim_core::dynamics::{forward_dynamics, gravity_vector, step, total_energy, ChainModel, GeneralizedForce, StepInputs, SystemState};
use cablesim_core::model::{build_allocation_matrix, AllocationMatrix, BodyWrench, PropulsionArrangement};
use cablesim_core::wrench::{support_radius, SliceKind, ThrustBounds};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

fn allocation() -> AllocationMatrix {
    build_allocation_matrix(&PropulsionArrangement::baseline())
}

fn wide() -> ThrustBounds {
    ThrustBounds::uniform(-1e6, 1e6).unwrap()
}

fn swinging(model: &ChainModel, amplitude: f64) -> SystemState {
    let mut s = SystemState::rest(model);
    s.q[ROLL1] = amplitude;
    s.q[PITCH1] = -0.5 * amplitude;
    s.q[ROLL2] = 0.3 * amplitude;
    s.q[PITCH2] = 0.4 * amplitude;
    s
}

fn swing_amplitude(s: &SystemState) -> f64 {
    [ROLL1, PITCH1, ROLL2, PITCH2].iter().map(|&i| s.q[i].abs()).fold(0.0, f64::max)
}

/// Closed loop with propeller thrusts applied as a body wrench.
fn closed_loop(model: &ChainModel, gains: ControllerGains, mut s: SystemState, duration: f64, dt: f64) -> Vec<SystemState> {
    let a = allocation();
    let mut ctl = CascadeController::new(gains, a, wide());
    let refs = References { yaw: 0.0, manipulator: None };
    let mut out = vec![s.clone()];
    let steps = (duration / dt).round() as usize;
    for _ in 0..steps {
        let cmd = ctl.command(model, &s, &refs).unwrap();
        let inputs = StepInputs { tau: GeneralizedForce::zeros(model), external: a.apply(&cmd.thrusts) };
        s = step(model, &s, &inputs, dt).unwrap();
        out.push(s.clone());
    }
    out
}

#[test]
fn zero_virtual_torques_give_zero_thrust() {
    let model = ChainModel::default();
    let s = SystemState::rest(&model);
    let cmd = realize(&model, &s, 0.0, [0.0; 2], [0.0; 2], &allocation(), &ThrustBounds::default()).unwrap();
    assert_eq!(cmd.thrusts.max_abs(), 0.0);
    assert!(!cmd.saturated);
}

#[test]
fn realized_wrench_matches_demand_before_saturation() {
    let model = ChainModel::default();
    let a = allocation();
    let mut rng = common::rng(8);
    for _ in 0..50 {
        let mut s = SystemState::rest(&model);
        for i in [YAW, ROLL1, PITCH1, ROLL2, PITCH2] {
            s.q[i] = rng.random_range(-0.6..0.6);
        }
        let t: [f64; 5] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
        let cmd = realize(&model, &s, t[0], [t[1], t[2]], [t[3], t[4]], &a, &wide()).unwrap();
        assert!(!cmd.saturated);
        let back = a.apply(&cmd.thrusts);
        assert!((back - cmd.wrench_demand).norm() < 1e-9 * (1.0 + cmd.wrench_demand.norm()));
    }
}

#[test]
fn demand_beyond_yaw_support_radius_saturates() {
    let model = ChainModel::default();
    let a = allocation();
    let bounds = ThrustBounds::uniform(-40.0, 40.0).unwrap();
    let radius = support_radius(&a, &bounds, &Vector3::z(), SliceKind::TorqueZeroForce).unwrap();
    let s = SystemState::rest(&model);
    let inside = realize(&model, &s, 0.5 * radius, [0.0; 2], [0.0; 2], &a, &bounds).unwrap();
    assert!(!inside.saturated);
    let outside = realize(&model, &s, 1.01 * radius, [0.0; 2], [0.0; 2], &a, &bounds).unwrap();
    assert!(outside.saturated);
    assert!(bounds.contains(&outside.thrusts));
}

#[test]
fn commands_are_yaw_shift_equivariant() {
    let model = ChainModel::default();
    let a = allocation();
    let mut rng = common::rng(9);
    for _ in 0..20 {
        let (q, qdot) = common::random_state(&model, &mut rng);
        let s = SystemState::new(q, qdot);
        let reference = rng.random_range(-3.0..3.0);
        let shift = rng.random_range(-3.0..3.0);
        let mut shifted = s.clone();
        shifted.q[YAW] += shift;
        let run = |state: &SystemState, yaw: f64| {
            let mut ctl = CascadeController::new(ControllerGains::default(), a, ThrustBounds::default());
            ctl.command(&model, state, &References { yaw, manipulator: None }).unwrap()
        };
        let c0 = run(&s, reference);
        let c1 = run(&shifted, reference + shift);
        // body-frame quantities are unchanged by a common yaw rotation
        assert!((c0.wrench_demand - c1.wrench_demand).norm() < 1e-8 * (1.0 + c0.wrench_demand.norm()));
        assert!((c0.thrusts.0 - c1.thrusts.0).amax() < 1e-8 * (1.0 + c0.thrusts.max_abs()));
    }
}

#[test]
fn swing_damping_removes_most_of_the_swing_in_twenty_seconds() {
    let model = ChainModel::default();
    let start = swinging(&model, 0.05);
    let trace = closed_loop(&model, ControllerGains::default(), start.clone(), 20.0, 0.002);
    let tail = &trace[trace.len() - 500..];
    let late = tail.iter().map(swing_amplitude).fold(0.0, f64::max);
    assert!(late < 0.1 * swing_amplitude(&start), "{late}");
}

#[test]
fn undamped_swing_persists() {
    let model = ChainModel::default();
    let start = swinging(&model, 0.05);
    let gains = ControllerGains { swing: SwingGains { upper: PdGains::default(), lower: PdGains::default() }, ..ControllerGains::default() };
    let trace = closed_loop(&model, gains, start.clone(), 20.0, 0.002);
    let tail = &trace[trace.len() - 5000..];
    let late = tail.iter().map(swing_amplitude).fold(0.0, f64::max);
    assert!(late > 0.5 * swing_amplitude(&start));
}

#[test]
fn zero_gains_conserve_energy() {
    let model = ChainModel::default();
    let mut start = swinging(&model, 0.1);
    start.qdot[YAW] = 0.2;
    let zero = PdGains::default();
    let gains = ControllerGains { yaw: zero, swing: SwingGains { upper: zero, lower: zero }, ..ControllerGains::default() };
    let trace = closed_loop(&model, gains, start.clone(), 10.0, 0.001);
    let e0 = total_energy(&model, &start).unwrap();
    let e1 = total_energy(&model, trace.last().unwrap()).unwrap();
    assert!((e1 - e0).abs() < 1e-6 * e0.abs().max(1.0), "{e0} -> {e1}");
}

#[test]
fn yaw_regulation_is_over_damped() {
    let model = ChainModel::default();
    let a = allocation();
    let mut ctl = CascadeController::new(ControllerGains::default(), a, ThrustBounds::uniform(-40.0, 40.0).unwrap());
    let mut s = SystemState::rest(&model);
    let target = -20f64.to_radians();
    let dt = 0.002;
    let mut overshoot: f64 = 0.0;
    let mut settled_at = None;
    for k in 0..(20.0 / dt) as usize {
        let cmd = ctl.command(&model, &s, &References { yaw: target, manipulator: None }).unwrap();
        let inputs = StepInputs { tau: GeneralizedForce::zeros(&model), external: a.apply(&cmd.thrusts) };
        s = step(&model, &s, &inputs, dt).unwrap();
        overshoot = overshoot.max(target - s.q[YAW]);
        let within = (s.q[YAW] - target).abs() < 1f64.to_radians() && s.qdot[YAW].abs() < 0.5f64.to_radians();
        if within && settled_at.is_none() {
            settled_at = Some(k as f64 * dt);
        }
    }
    assert!(overshoot <= 0.02 * target.abs());
    assert!(settled_at.unwrap() < 15.0);
}

/// Passive angles at which the arm's weight is balanced by the cable, found by Newton's method.
fn balanced_passive_angles(model: &ChainModel, q: &mut DVector<f64>) {
    let passive = [ROLL1, PITCH1, ROLL2, PITCH2];
    for _ in 0..30 {
        let g = gravity_vector(model, q).unwrap();
        let r = DVector::from_iterator(4, passive.iter().map(|&i| g[i]));
        if r.amax() < 1e-12 {
            return;
        }
        let h = 1e-7;
        let jac = DMatrix::from_fn(4, 4, |row, col| {
            let mut qp = q.clone();
            qp[passive[col]] += h;
            let mut qm = q.clone();
            qm[passive[col]] -= h;
            (gravity_vector(model, &qp).unwrap()[passive[row]] - gravity_vector(model, &qm).unwrap()[passive[row]]) / (2.0 * h)
        });
        let dx = jac.lu().solve(&r).unwrap();
        for (k, &i) in passive.iter().enumerate() {
            q[i] -= dx[k];
        }
    }
}

#[test]
fn gravity_compensation_holds_the_arm_at_its_reference() {
    let model = ChainModel::with_seven_dof_arm();
    let mut q = DVector::zeros(model.dof());
    let posture = [0.3, 0.9, -0.4, 1.2, 0.2, -0.7, 0.1];
    for (i, p) in posture.iter().enumerate() {
        q[PASSIVE_DOF + i] = *p;
    }
    balanced_passive_angles(&model, &mut q);
    let s = SystemState::new(q.clone(), DVector::zeros(model.dof()));
    let reference = q.rows(PASSIVE_DOF, 7).into_owned();
    let gains = vec![PdGains::new(50.0, 5.0).unwrap(); 7];
    let tau_m = manipulator_control(&model, &s, &reference, &gains).unwrap();
    let mut tau = GeneralizedForce::zeros(&model);
    tau.0.rows_mut(PASSIVE_DOF, 7).copy_from(&tau_m);
    let held = forward_dynamics(&model, &s, &tau, &BodyWrench::zero()).unwrap();
    assert!(held.rows(PASSIVE_DOF, 7).amax() < 1e-8, "{}", held.rows(PASSIVE_DOF, 7).amax());

    let free = forward_dynamics(&model, &s, &GeneralizedForce::zeros(&model), &BodyWrench::zero()).unwrap();
    assert!(free.rows(PASSIVE_DOF, 7).amax() > 1.0);
}

#[test]
fn manipulator_control_rejects_mismatched_inputs() {
    let model = ChainModel::with_seven_dof_arm();
    let s = SystemState::rest(&model);
    assert!(manipulator_control(&model, &s, &DVector::zeros(6), &[PdGains::default(); 7]).is_err());
    assert!(manipulator_control(&ChainModel::default(), &SystemState::rest(&ChainModel::default()), &DVector::zeros(0), &[]).is_err());
}
