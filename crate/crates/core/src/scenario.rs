//! Declarative simulation runs: parsing, rollout, traces and plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::control::{CascadeController, ControlCommand, ControllerGains, PdGains, References, SwingGains};
use crate::dynamics::chain::{ChainModel, SystemState, PASSIVE_DOF, PITCH1, PITCH2, ROLL1, ROLL2, YAW};
use crate::dynamics::{step, total_energy, GeneralizedForce, StepInputs};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_arrangement, load_model};
use crate::model::allocation::{build_allocation_matrix, BodyWrench};
use crate::model::arrangement::{PropulsionArrangement, UNIT_COUNT};
use crate::trajectory::{postures, ManipulatorTrajectory};
use crate::wrench::{ThrustBounds, WrenchSetSlice};

/// Body-frame wrench applied for `duration` seconds from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub start: f64,
    pub duration: f64,
    pub wrench: BodyWrench,
}

impl Disturbance {
    /// Tangential pull of `force` newtons at the tip of `arm` (0-based unit index).
    pub fn arm_tip_pull(arr: &PropulsionArrangement, arm: usize, force: f64, start: f64, duration: f64) -> Self {
        let unit = &arr.units()[arm];
        let tangent = Vector3::z().cross(&unit.arm_direction);
        let f = tangent * force;
        Disturbance { start, duration, wrench: BodyWrench::new(f, unit.position().cross(&f)) }
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

/// Everything needed for one deterministic rollout.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ChainModel,
    pub arrangement: PropulsionArrangement,
    pub gains: ControllerGains,
    pub bounds: ThrustBounds,
    pub duration: f64,
    pub dt: f64,
    /// `(time s, yaw setpoint rad)`, strictly increasing in time.
    pub schedule: Vec<(f64, f64)>,
    pub disturbances: Vec<Disturbance>,
    pub manipulator: Option<ManipulatorTrajectory>,
    pub seed: u64,
    pub initial: SystemState,
    pub outputs: Outputs,
}

/// Output file locations, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub trace: Option<PathBuf>,
    pub commands: Option<PathBuf>,
    pub plots: Option<PathBuf>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Invalid("dt must be positive".into()));
        }
        if self.schedule.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Invalid("schedule times must be strictly increasing".into()));
        }
        if let Some(&(t, _)) = self.schedule.last() {
            if self.duration < t {
                return Err(Error::Invalid("duration ends before the last setpoint".into()));
            }
        }
        if !(self.duration >= 0.0) {
            return Err(Error::Invalid("duration must be nonnegative".into()));
        }
        if let Some(traj) = &self.manipulator {
            if traj.dof() != self.model.manipulator_dof() {
                return Err(Error::Invalid("trajectory and model disagree on manipulator dof".into()));
            }
        }
        self.model.validate()?;
        self.gains.validate(&self.model)?;
        self.bounds.validate()?;
        self.initial.check_dimension(&self.model)
    }

    /// Zero-order hold over the schedule; before the first entry the initial yaw is held.
    pub fn yaw_reference(&self, t: f64) -> f64 {
        match self.schedule.partition_point(|&(s, _)| s <= t) {
            0 => self.initial.q[YAW],
            k => self.schedule[k - 1].1,
        }
    }

    pub fn disturbance(&self, t: f64) -> BodyWrench {
        self.disturbances
            .iter()
            .filter(|d| d.active(t))
            .fold(BodyWrench::zero(), |acc, d| acc + d.wrench)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

// ---- document format ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: Option<String>,
    #[serde(default = "preset_model")]
    model: String,
    #[serde(default = "preset_arrangement")]
    arrangement: String,
    duration: f64,
    dt: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    initial: InitialDoc,
    #[serde(default)]
    gains: GainsDoc,
    #[serde(default)]
    thrust_bounds: Option<BoundsDoc>,
    #[serde(default, rename = "setpoint")]
    setpoints: Vec<SetpointDoc>,
    #[serde(default, rename = "disturbance")]
    disturbances: Vec<DisturbanceDoc>,
    manipulator: Option<ManipulatorDoc>,
    #[serde(default)]
    output: OutputDoc,
}

fn preset_model() -> String {
    "default".into()
}
fn preset_arrangement() -> String {
    "baseline".into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default)]
    yaw_rate_deg: f64,
    /// `[roll1, pitch1, roll2, pitch2]`, degrees.
    #[serde(default)]
    swing_deg: [f64; 4],
    /// Uniform random perturbation (± degrees) added to each passive angle, drawn from `seed`.
    #[serde(default)]
    swing_noise_deg: f64,
    #[serde(default)]
    manipulator: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GainsDoc {
    yaw_kp: f64,
    yaw_kd: f64,
    upper_kp: f64,
    upper_kd: f64,
    lower_kp: f64,
    lower_kd: f64,
    #[serde(default)]
    manipulator_kp: Vec<f64>,
    #[serde(default)]
    manipulator_kd: Vec<f64>,
    outer_rate: f64,
}

impl Default for GainsDoc {
    fn default() -> Self {
        let g = ControllerGains::default();
        GainsDoc {
            yaw_kp: g.yaw.kp,
            yaw_kd: g.yaw.kd,
            upper_kp: g.swing.upper.kp,
            upper_kd: g.swing.upper.kd,
            lower_kp: g.swing.lower.kp,
            lower_kd: g.swing.lower.kd,
            manipulator_kp: Vec::new(),
            manipulator_kd: Vec::new(),
            outer_rate: g.outer_rate,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsDoc {
    lower: f64,
    upper: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetpointDoc {
    time: f64,
    yaw_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceDoc {
    start: f64,
    duration: f64,
    #[serde(default)]
    force: [f64; 3],
    #[serde(default)]
    torque: [f64; 3],
    /// 1-based unit whose arm tip is pulled tangentially; overrides `force`/`torque`.
    arm_tip_unit: Option<usize>,
    arm_tip_force: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManipulatorDoc {
    /// `aggressive` for the shipped posture sequence, or `waypoints`.
    #[serde(default = "waypoints_kind")]
    trajectory: String,
    #[serde(default = "default_hold")]
    hold: f64,
    #[serde(default = "default_travel")]
    travel: f64,
    #[serde(default, rename = "waypoint")]
    waypoints: Vec<WaypointDoc>,
}

fn waypoints_kind() -> String {
    "waypoints".into()
}
fn default_hold() -> f64 {
    3.0
}
fn default_travel() -> f64 {
    1.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    time: f64,
    joints: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputDoc {
    trace: Option<PathBuf>,
    commands: Option<PathBuf>,
    plots: Option<PathBuf>,
}

/// Parses a scenario document; relative model/arrangement paths resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
    let model = load_model(&doc.model, base)?;
    let arrangement = load_arrangement(&doc.arrangement, base)?;
    let nm = model.manipulator_dof();

    let g = &doc.gains;
    if g.manipulator_kp.len() != g.manipulator_kd.len() {
        return Err(Error::Parse("manipulator_kp and manipulator_kd differ in length".into()));
    }
    let gains = ControllerGains {
        yaw: PdGains { kp: g.yaw_kp, kd: g.yaw_kd },
        swing: SwingGains {
            upper: PdGains { kp: g.upper_kp, kd: g.upper_kd },
            lower: PdGains { kp: g.lower_kp, kd: g.lower_kd },
        },
        manipulator: g.manipulator_kp.iter().zip(&g.manipulator_kd).map(|(&kp, &kd)| PdGains { kp, kd }).collect(),
        outer_rate: g.outer_rate,
    };

    let bounds = match &doc.thrust_bounds {
        Some(b) => ThrustBounds::uniform(b.lower, b.upper)?,
        None => ThrustBounds::from_arrangement(&arrangement),
    };

    let mut disturbances = Vec::new();
    for d in &doc.disturbances {
        let dist = match (d.arm_tip_unit, d.arm_tip_force) {
            (Some(unit), Some(force)) => {
                if unit == 0 || unit > UNIT_COUNT {
                    return Err(Error::Parse("arm_tip_unit must be in 1..=8".into()));
                }
                Disturbance::arm_tip_pull(&arrangement, unit - 1, force, d.start, d.duration)
            }
            (None, None) => Disturbance {
                start: d.start,
                duration: d.duration,
                wrench: BodyWrench::new(Vector3::from(d.force), Vector3::from(d.torque)),
            },
            _ => return Err(Error::Parse("arm_tip_unit and arm_tip_force go together".into())),
        };
        if !(dist.duration >= 0.0) {
            return Err(Error::Parse("disturbance duration must be nonnegative".into()));
        }
        disturbances.push(dist);
    }

    let manipulator = match &doc.manipulator {
        None => None,
        Some(m) => Some(match m.trajectory.as_str() {
            "aggressive" => ManipulatorTrajectory::new(postures::aggressive_sequence(m.hold, m.travel))?,
            "waypoints" => ManipulatorTrajectory::new(m.waypoints.iter().map(|w| (w.time, w.joints.clone())).collect())?,
            other => return Err(Error::Parse(format!("unknown manipulator trajectory '{other}'"))),
        }),
    };

    let mut initial = SystemState::rest(&model);
    initial.q[YAW] = doc.initial.yaw_deg.to_radians();
    initial.qdot[YAW] = doc.initial.yaw_rate_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(doc.seed);
    for (k, idx) in [ROLL1, PITCH1, ROLL2, PITCH2].into_iter().enumerate() {
        let noise = if doc.initial.swing_noise_deg > 0.0 {
            rng.random_range(-doc.initial.swing_noise_deg..=doc.initial.swing_noise_deg)
        } else {
            0.0
        };
        initial.q[idx] = (doc.initial.swing_deg[k] + noise).to_radians();
    }
    if !doc.initial.manipulator.is_empty() {
        if doc.initial.manipulator.len() != nm {
            return Err(Error::Parse("initial manipulator posture has the wrong length".into()));
        }
        for (i, v) in doc.initial.manipulator.iter().enumerate() {
            initial.q[PASSIVE_DOF + i] = *v;
        }
    } else if let Some(traj) = &manipulator {
        let (q, _, _) = traj.sample(0.0);
        initial.q.rows_mut(PASSIVE_DOF, nm).copy_from(&q);
    }

    let scenario = Scenario {
        name: doc.name.unwrap_or_else(|| "scenario".into()),
        model,
        arrangement,
        gains,
        bounds,
        duration: doc.duration,
        dt: doc.dt,
        schedule: doc.setpoints.iter().map(|s| (s.time, s.yaw_deg.to_radians())).collect(),
        disturbances,
        manipulator,
        seed: doc.seed,
        initial,
        outputs: Outputs { trace: doc.output.trace, commands: doc.output.commands, plots: doc.output.plots },
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

// ---- rollout ----

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub yaw_ref: f64,
    pub command: ControlCommand,
    pub disturbance: BodyWrench,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_yaw_error: f64,
    pub final_yaw_rate: f64,
    pub max_thrust: f64,
    pub saturation_count: usize,
    /// `E(T) − E(0)`, joules.
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub rows: Vec<TraceRow>,
    pub summary: RunSummary,
    pub dof: usize,
    pub manipulator_dof: usize,
}

/// Runs the closed loop for `duration / dt` steps and records every state.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    scenario.validate()?;
    let model = &scenario.model;
    let a = build_allocation_matrix(&scenario.arrangement);
    let mut controller = CascadeController::new(scenario.gains.clone(), a, scenario.bounds);
    let steps = scenario.steps();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut state = scenario.initial.clone();
    let e0 = total_energy(model, &state).map_err(|e| e.at_step(0))?;
    let nm = model.manipulator_dof();

    for k in 0..=steps {
        state.time = k as f64 * scenario.dt;
        let t = state.time;
        let refs = References {
            yaw: scenario.yaw_reference(t),
            manipulator: scenario.manipulator.as_ref().map(|traj| traj.sample(t).0),
        };
        let command = controller.command(model, &state, &refs).map_err(|e| e.at_step(k))?;
        let disturbance = scenario.disturbance(t);
        rows.push(TraceRow {
            time: t,
            q: state.q.clone(),
            qdot: state.qdot.clone(),
            yaw_ref: refs.yaw,
            command: command.clone(),
            disturbance,
        });
        if k == steps {
            break;
        }
        let mut tau = GeneralizedForce::zeros(model);
        tau.0.rows_mut(PASSIVE_DOF, nm).copy_from(&command.manipulator_torques);
        let propulsion = a.apply(&command.thrusts);
        let inputs = StepInputs { tau, external: propulsion + disturbance };
        state = step(model, &state, &inputs, scenario.dt).map_err(|e| e.at_step(k))?;
    }

    let last = rows.last().expect("at least one row");
    let summary = RunSummary {
        final_yaw_error: last.yaw_ref - last.q[YAW],
        final_yaw_rate: last.qdot[YAW],
        max_thrust: rows.iter().map(|r| r.command.thrusts.max_abs()).fold(0.0, f64::max),
        saturation_count: rows.iter().filter(|r| r.command.saturated).count(),
        energy_drift: total_energy(model, &state)? - e0,
    };
    Ok(RunReport { name: scenario.name.clone(), rows, summary, dof: model.dof(), manipulator_dof: nm })
}

// ---- CSV output ----

fn coordinate_names(manipulator_dof: usize) -> Vec<String> {
    let mut names: Vec<String> =
        ["yaw", "roll1", "pitch1", "roll2", "pitch2"].iter().map(|s| s.to_string()).collect();
    names.extend((1..=manipulator_dof).map(|i| format!("qm{i}")));
    names
}

fn join_row(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = cells.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// `time, q..., qdot...`
pub fn state_trace_csv(report: &RunReport) -> String {
    let names = coordinate_names(report.manipulator_dof);
    let mut out = String::from("time");
    for n in &names {
        let _ = write!(out, ",q_{n}");
    }
    for n in &names {
        let _ = write!(out, ",qd_{n}");
    }
    out.push('\n');
    for r in &report.rows {
        out += &join_row(std::iter::once(fmt_f64(r.time)).chain(r.q.iter().chain(r.qdot.iter()).map(|x| fmt_f64(*x))));
    }
    out
}

/// `time, w (6), u (8), tau_m..., saturated`
pub fn command_trace_csv(report: &RunReport) -> String {
    let mut header = vec!["time".to_string()];
    header.extend(["fx", "fy", "fz", "tx", "ty", "tz"].iter().map(|s| format!("w_{s}")));
    header.extend((1..=UNIT_COUNT).map(|i| format!("u{i}")));
    header.extend((1..=report.manipulator_dof).map(|i| format!("tau_m{i}")));
    header.push("saturated".into());
    let mut out = join_row(header);
    for r in &report.rows {
        let c = &r.command;
        let w = c.wrench_demand.to_vector();
        let cells = std::iter::once(r.time)
            .chain(w.iter().copied())
            .chain(c.thrusts.0.iter().copied())
            .chain(c.manipulator_torques.iter().copied())
            .map(fmt_f64)
            .chain(std::iter::once(u8::from(c.saturated).to_string()));
        out += &join_row(cells);
    }
    out
}

/// Yaw angle, setpoint and rate in degrees.
pub fn yaw_plot_csv(report: &RunReport) -> String {
    let mut out = String::from("time,yaw_deg,yaw_ref_deg,yaw_rate_deg_s\n");
    for r in &report.rows {
        out += &join_row(
            [r.time, r.q[YAW].to_degrees(), r.yaw_ref.to_degrees(), r.qdot[YAW].to_degrees()].map(fmt_f64),
        );
    }
    out
}

/// `time, u1..u8`
pub fn thrust_plot_csv(times: &[f64], thrusts: &[crate::model::allocation::ThrustVector]) -> String {
    let mut header = vec!["time".to_string()];
    header.extend((1..=UNIT_COUNT).map(|i| format!("u{i}")));
    let mut out = join_row(header);
    for (t, u) in times.iter().zip(thrusts) {
        out += &join_row(std::iter::once(*t).chain(u.0.iter().copied()).map(fmt_f64));
    }
    out
}

/// `x, y, z, radius` per sampled direction.
pub fn slice_csv(slice: &WrenchSetSlice) -> String {
    let mut out = String::from("x,y,z,radius\n");
    for (d, r) in slice.directions.iter().zip(&slice.radii) {
        out += &join_row([d.x, d.y, d.z, *r].map(fmt_f64));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `<name>_yaw.csv` and `<name>_thrust.csv` into `dir`; returns the paths.
pub fn emit_plots(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let yaw = dir.join(format!("{}_yaw.csv", report.name));
    let thrust = dir.join(format!("{}_thrust.csv", report.name));
    write_file(&yaw, &yaw_plot_csv(report))?;
    let times: Vec<f64> = report.rows.iter().map(|r| r.time).collect();
    let thrusts: Vec<_> = report.rows.iter().map(|r| r.command.thrusts).collect();
    write_file(&thrust, &thrust_plot_csv(&times, &thrusts))?;
    Ok(vec![yaw, thrust])
}

/// Writes a slice point cloud to `path`.
pub fn emit_slice(slice: &WrenchSetSlice, path: &Path) -> Result<()> {
    write_file(path, &slice_csv(slice))
}

/// Writes the traces and plot files named in the scenario's outputs under `dir`.
pub fn write_outputs(scenario: &Scenario, report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let trace = dir.join(scenario.outputs.trace.clone().unwrap_or_else(|| format!("{}_trace.csv", scenario.name).into()));
    write_file(&trace, &state_trace_csv(report))?;
    written.push(trace);
    let commands =
        dir.join(scenario.outputs.commands.clone().unwrap_or_else(|| format!("{}_commands.csv", scenario.name).into()));
    write_file(&commands, &command_trace_csv(report))?;
    written.push(commands);
    let plots = dir.join(scenario.outputs.plots.clone().unwrap_or_default());
    written.extend(emit_plots(report, &plots)?);
    Ok(written)
}

/// Flight time in minutes: pack energy over electrical power draw.
pub fn endurance(cells: u32, cell_voltage: f64, capacity_ah: f64, bus_voltage: f64, current: f64) -> Result<f64> {
    if !(cells > 0 && cell_voltage > 0.0 && capacity_ah > 0.0) {
        return Err(Error::Invalid("battery parameters must be positive".into()));
    }
    let power = bus_voltage * current;
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::DivisionDomain);
    }
    Ok(cells as f64 * cell_voltage * capacity_ah * 60.0 / power)
}
