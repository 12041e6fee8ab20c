//! Cascade controller: inner PD loops on yaw and manipulator joints (with gravity
//! compensation), an outer damping loop on the passive joints, and realization of the
//! virtual torques through `w = Jᵀ τ`, `u = A† w`.

use nalgebra::DVector;

use crate::dynamics::chain::{ChainModel, SystemState, PASSIVE_DOF, PITCH1, PITCH2, ROLL1, ROLL2, YAW};
use crate::dynamics::gravity_vector;
use crate::error::{Error, Result};
use crate::model::allocation::{allocate_thrusts, AllocationMatrix, BodyWrench, ThrustVector};
use crate::model::jacobian::{chain_jacobian, virtual_torque_to_wrench, VirtualTorque};
use crate::wrench::ThrustBounds;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl PdGains {
    pub fn new(kp: f64, kd: f64) -> Result<Self> {
        let g = PdGains { kp, kd };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kp >= 0.0 && self.kd >= 0.0 {
            Ok(())
        } else {
            Err(Error::Invalid(format!("gains must be nonnegative, got kp={} kd={}", self.kp, self.kd)))
        }
    }
}

/// Gains of the outer swing-damping loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwingGains {
    pub upper: PdGains,
    pub lower: PdGains,
}

/// Gains and loop rates of the whole cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub yaw: PdGains,
    pub swing: SwingGains,
    /// One entry per manipulator joint.
    pub manipulator: Vec<PdGains>,
    /// Outer-loop update rate, Hz.
    pub outer_rate: f64,
}

impl Default for ControllerGains {
    /// Slightly over-damped yaw response for the bare 45 kg, 0.75 m disk.
    fn default() -> Self {
        ControllerGains {
            yaw: PdGains { kp: 20.0, kd: 40.0 },
            swing: SwingGains { upper: PdGains { kp: 0.0, kd: 3000.0 }, lower: PdGains { kp: 0.0, kd: 30.0 } },
            manipulator: Vec::new(),
            outer_rate: 200.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self, model: &ChainModel) -> Result<()> {
        self.yaw.validate()?;
        self.swing.upper.validate()?;
        self.swing.lower.validate()?;
        for g in &self.manipulator {
            g.validate()?;
        }
        if !self.manipulator.is_empty() && self.manipulator.len() != model.manipulator_dof() {
            return Err(Error::Invalid("one gain pair per manipulator joint required".into()));
        }
        if !(self.outer_rate > 0.0) {
            return Err(Error::Invalid("outer loop rate must be positive".into()));
        }
        Ok(())
    }
}

/// `τ_y = kp (q_y,ref − q_y) − kd q̇_y`.
pub fn yaw_control(state: &SystemState, yaw_ref: f64, gains: &PdGains) -> f64 {
    gains.kp * (yaw_ref - state.q[YAW]) - gains.kd * state.qdot[YAW]
}

/// PD with gravity compensation: `τ_m = Kp (q_ref − q_m) − Kd q̇_m + g_m(q)`.
pub fn manipulator_control(
    model: &ChainModel,
    state: &SystemState,
    q_m_ref: &DVector<f64>,
    gains: &[PdGains],
) -> Result<DVector<f64>> {
    let nm = model.manipulator_dof();
    if nm == 0 {
        return Err(Error::Invalid("model has no manipulator".into()));
    }
    if q_m_ref.len() != nm || gains.len() != nm {
        return Err(Error::Invalid("manipulator reference or gains have the wrong length".into()));
    }
    let g = gravity_vector(model, &state.q)?;
    Ok(DVector::from_fn(nm, |i, _| {
        let k = PASSIVE_DOF + i;
        gains[i].kp * (q_m_ref[i] - state.q[k]) - gains[i].kd * state.qdot[k] + g[k]
    }))
}

/// Drives both passive joints toward hanging vertical: `τ_i = −kp q_i − kd q̇_i`.
pub fn damping_control(state: &SystemState, gains: &SwingGains) -> ([f64; 2], [f64; 2]) {
    let law = |g: &PdGains, q: usize| -g.kp * state.q[q] - g.kd * state.qdot[q];
    (
        [law(&gains.upper, ROLL1), law(&gains.upper, PITCH1)],
        [law(&gains.lower, ROLL2), law(&gains.lower, PITCH2)],
    )
}

/// Thrust command and bookkeeping for one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub wrench_demand: BodyWrench,
    /// Clamped to the thrust bounds.
    pub thrusts: ThrustVector,
    pub manipulator_torques: DVector<f64>,
    /// Some thrust had to be clamped.
    pub saturated: bool,
}

/// Maps virtual torques to a wrench demand and per-motor thrusts, clamping to `bounds`.
pub fn realize(
    model: &ChainModel,
    state: &SystemState,
    tau_y: f64,
    tau_1: [f64; 2],
    tau_2: [f64; 2],
    a: &AllocationMatrix,
    bounds: &ThrustBounds,
) -> Result<ControlCommand> {
    let j = chain_jacobian(model, state)?;
    let tau = VirtualTorque::new(tau_y, tau_1[0], tau_1[1], tau_2[0], tau_2[1]);
    let wrench_demand = virtual_torque_to_wrench(&j, &tau);
    let raw = allocate_thrusts(a, &wrench_demand)?.thrusts;
    let mut clamped = raw;
    let mut saturated = false;
    for i in 0..clamped.0.len() {
        let c = raw.0[i].clamp(bounds.lower[i], bounds.upper[i]);
        saturated |= c != raw.0[i];
        clamped.0[i] = c;
    }
    Ok(ControlCommand {
        wrench_demand,
        thrusts: clamped,
        manipulator_torques: DVector::zeros(model.manipulator_dof()),
        saturated,
    })
}

/// References tracked by the cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct References {
    pub yaw: f64,
    pub manipulator: Option<DVector<f64>>,
}

/// Stateful wrapper holding the outer-loop output between outer ticks.
#[derive(Debug, Clone)]
pub struct CascadeController {
    pub gains: ControllerGains,
    pub allocation: AllocationMatrix,
    pub bounds: ThrustBounds,
    held_swing: ([f64; 2], [f64; 2]),
    next_outer: f64,
}

impl CascadeController {
    pub fn new(gains: ControllerGains, allocation: AllocationMatrix, bounds: ThrustBounds) -> Self {
        CascadeController { gains, allocation, bounds, held_swing: ([0.0; 2], [0.0; 2]), next_outer: f64::NEG_INFINITY }
    }

    /// Computes the command at `state.time`; the swing loop only refreshes at its own rate.
    pub fn command(&mut self, model: &ChainModel, state: &SystemState, refs: &References) -> Result<ControlCommand> {
        // tolerance keeps tick placement stable under accumulated time round-off
        if state.time + 1e-9 >= self.next_outer {
            self.held_swing = damping_control(state, &self.gains.swing);
            let period = 1.0 / self.gains.outer_rate;
            self.next_outer = if self.next_outer.is_finite() { self.next_outer + period } else { state.time + period };
        }
        let tau_y = yaw_control(state, refs.yaw, &self.gains.yaw);
        let (tau_1, tau_2) = self.held_swing;
        let mut cmd = realize(model, state, tau_y, tau_1, tau_2, &self.allocation, &self.bounds)?;
        if model.manipulator_dof() > 0 {
            let reference = match &refs.manipulator {
                Some(r) => r.clone(),
                None => state.q.rows(PASSIVE_DOF, model.manipulator_dof()).into_owned(),
            };
            let gains = if self.gains.manipulator.is_empty() {
                vec![PdGains::default(); model.manipulator_dof()]
            } else {
                self.gains.manipulator.clone()
            };
            cmd.manipulator_torques = manipulator_control(model, state, &reference, &gains)?;
        }
        Ok(cmd)
    }
}
