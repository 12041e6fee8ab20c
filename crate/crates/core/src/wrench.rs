//! Attainable wrench sets and thrust requirements.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::dynamics::chain::{ChainModel, SystemState, PASSIVE_DOF};
use crate::dynamics::{bias_forces, mass_matrix};
use crate::error::{Error, Result};
use crate::model::allocation::{allocate_thrusts, AllocationMatrix, ThrustVector};
use crate::model::arrangement::{PropulsionArrangement, UNIT_COUNT};
use crate::model::jacobian::{chain_jacobian, virtual_torque_to_wrench, VirtualTorque};
use crate::trajectory::ManipulatorTrajectory;

/// Per-motor thrust box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustBounds {
    pub lower: [f64; UNIT_COUNT],
    pub upper: [f64; UNIT_COUNT],
}

impl Default for ThrustBounds {
    fn default() -> Self {
        ThrustBounds { lower: [0.0; UNIT_COUNT], upper: [crate::model::arrangement::DEFAULT_MAX_THRUST; UNIT_COUNT] }
    }
}

impl ThrustBounds {
    pub fn new(lower: [f64; UNIT_COUNT], upper: [f64; UNIT_COUNT]) -> Result<Self> {
        let b = ThrustBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::new([lower; UNIT_COUNT], [upper; UNIT_COUNT])
    }

    /// `[0, max_thrust_i]` for each unit.
    pub fn from_arrangement(arr: &PropulsionArrangement) -> Self {
        ThrustBounds { lower: [0.0; UNIT_COUNT], upper: arr.max_thrusts() }
    }

    pub fn validate(&self) -> Result<()> {
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::Invalid(format!("thrust bounds must satisfy lower <= upper, got [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, u: &ThrustVector) -> bool {
        u.0.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ThrustBounds { lower: self.lower.map(|x| x * c), upper: self.upper.map(|x| x * c) }
    }
}

/// Which slice of the six-dimensional wrench set to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SliceKind {
    /// Forces attainable with zero net torque.
    ForceZeroTorque,
    /// Torques attainable with zero net force.
    TorqueZeroForce,
}

impl SliceKind {
    fn target(self, direction: &Vector3<f64>) -> DVector<f64> {
        let mut t = DVector::zeros(6);
        let offset = match self {
            SliceKind::ForceZeroTorque => 0,
            SliceKind::TorqueZeroForce => 3,
        };
        for k in 0..3 {
            t[offset + k] = direction[k];
        }
        t
    }
}

/// Optimal value of a support LP and the thrust vector that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub thrusts: Vec<f64>,
}

fn lp_error(e: minilp::Error) -> Error {
    Error::Infeasible(e.to_string())
}

/// `max s` subject to `matrix · u = s · target`, `lower <= u <= upper`, `s >= 0`.
///
/// Works for any number of rows and motors.
pub fn max_along(matrix: &DMatrix<f64>, lower: &[f64], upper: &[f64], target: &DVector<f64>) -> Result<LpSolution> {
    let (rows, cols) = matrix.shape();
    if lower.len() != cols || upper.len() != cols || target.len() != rows {
        return Err(Error::Invalid("support LP dimension mismatch".into()));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let u: Vec<_> = (0..cols).map(|i| lp.add_var(0.0, (lower[i], upper[i]))).collect();
    let s = lp.add_var(1.0, (0.0, f64::INFINITY));
    for r in 0..rows {
        let mut expr: Vec<_> = (0..cols).filter(|&i| matrix[(r, i)] != 0.0).map(|i| (u[i], matrix[(r, i)])).collect();
        if target[r] != 0.0 {
            expr.push((s, -target[r]));
        }
        lp.add_constraint(&expr[..], ComparisonOp::Eq, 0.0);
    }
    let sol = lp.solve().map_err(lp_error)?;
    Ok(LpSolution { value: sol[s], thrusts: u.iter().map(|&v| sol[v]).collect() })
}

/// `max <objective, rows · u>` over `u` in the box subject to `equality · u = 0`.
pub fn max_linear(
    rows: &DMatrix<f64>,
    equality: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    objective: &DVector<f64>,
) -> Result<LpSolution> {
    let cols = rows.ncols();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let weights = rows.transpose() * objective;
    let u: Vec<_> = (0..cols).map(|i| lp.add_var(weights[i], (lower[i], upper[i]))).collect();
    for r in 0..equality.nrows() {
        let expr: Vec<_> = (0..cols).map(|i| (u[i], equality[(r, i)])).collect();
        lp.add_constraint(&expr[..], ComparisonOp::Eq, 0.0);
    }
    let sol = lp.solve().map_err(lp_error)?;
    Ok(LpSolution { value: sol.objective(), thrusts: u.iter().map(|&v| sol[v]).collect() })
}

fn dense(a: &AllocationMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, UNIT_COUNT, a.0.as_slice())
}

/// Largest attainable magnitude along `direction` in the chosen slice, with its witness.
pub fn support_radius_witness(
    a: &AllocationMatrix,
    bounds: &ThrustBounds,
    direction: &Vector3<f64>,
    kind: SliceKind,
) -> Result<LpSolution> {
    bounds.validate()?;
    let dir = direction.normalize();
    max_along(&dense(a), &bounds.lower, &bounds.upper, &kind.target(&dir))
}

/// Radial extent of the slice along `direction`.
pub fn support_radius(a: &AllocationMatrix, bounds: &ThrustBounds, direction: &Vector3<f64>, kind: SliceKind) -> Result<f64> {
    support_radius_witness(a, bounds, direction, kind).map(|s| s.value)
}

/// Support function `max <direction, x>` over the slice (not restricted to the ray).
pub fn support_value(a: &AllocationMatrix, bounds: &ThrustBounds, direction: &Vector3<f64>, kind: SliceKind) -> Result<f64> {
    bounds.validate()?;
    let m = dense(a);
    let (free, zero) = match kind {
        SliceKind::ForceZeroTorque => (m.rows(0, 3).into_owned(), m.rows(3, 3).into_owned()),
        SliceKind::TorqueZeroForce => (m.rows(3, 3).into_owned(), m.rows(0, 3).into_owned()),
    };
    let obj = DVector::from_column_slice(direction.as_slice());
    max_linear(&free, &zero, &bounds.lower, &bounds.upper, &obj).map(|s| s.value)
}

/// Samples of one slice over a set of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSetSlice {
    pub kind: SliceKind,
    pub directions: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
}

impl WrenchSetSlice {
    pub fn points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.directions.iter().zip(&self.radii).map(|(d, r)| d * *r)
    }
}

/// `n` near-uniform unit vectors on the sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

pub fn slice_along(a: &AllocationMatrix, bounds: &ThrustBounds, kind: SliceKind, directions: Vec<Vector3<f64>>) -> Result<WrenchSetSlice> {
    let radii = directions
        .par_iter()
        .map(|d| support_radius(a, bounds, d, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(WrenchSetSlice { kind, directions, radii })
}

/// Support radii over `n_directions` Fibonacci-sphere directions.
pub fn slice(a: &AllocationMatrix, bounds: &ThrustBounds, kind: SliceKind, n_directions: usize) -> Result<WrenchSetSlice> {
    if n_directions < 6 {
        return Err(Error::Invalid("a slice needs at least 6 directions".into()));
    }
    slice_along(a, bounds, kind, fibonacci_sphere(n_directions))
}

/// Thrusts needed to hold the platform still while the manipulator moves.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrustProfile {
    pub times: Vec<f64>,
    pub thrusts: Vec<ThrustVector>,
    /// Samples where some thrust leaves the bounds.
    pub saturated: Vec<bool>,
}

impl ThrustProfile {
    /// Largest `|u_i|` over motors and time.
    pub fn peak(&self) -> f64 {
        self.thrusts.iter().map(|u| u.max_abs()).fold(0.0, f64::max)
    }

    pub fn per_motor_peak(&self) -> [f64; UNIT_COUNT] {
        std::array::from_fn(|i| self.thrusts.iter().map(|u| u.0[i].abs()).fold(0.0, f64::max))
    }

    /// Largest per-motor `|u_i|` averaged over a sliding window of `window` seconds.
    pub fn max_continuous(&self, window: f64) -> f64 {
        if self.times.len() < 2 {
            return self.peak();
        }
        let dt = self.times[1] - self.times[0];
        let width = ((window / dt).round() as usize).clamp(1, self.times.len());
        let mut best = 0.0_f64;
        for i in 0..UNIT_COUNT {
            let mags: Vec<f64> = self.thrusts.iter().map(|u| u.0[i].abs()).collect();
            let mut sum: f64 = mags[..width].iter().sum();
            best = best.max(sum / width as f64);
            for k in width..mags.len() {
                sum += mags[k] - mags[k - width];
                best = best.max(sum / width as f64);
            }
        }
        best
    }

    pub fn saturation_count(&self) -> usize {
        self.saturated.iter().filter(|&&s| s).count()
    }
}

/// Generalized forces on the suspension coordinates the propellers must supply so the
/// platform stays hanging vertical while the manipulator follows `(q_m, q̇_m, q̈_m)`.
pub fn holding_torques(
    model: &ChainModel,
    q_m: &DVector<f64>,
    qd_m: &DVector<f64>,
    qdd_m: &DVector<f64>,
) -> Result<VirtualTorque> {
    let n = model.dof();
    let nm = model.manipulator_dof();
    if q_m.len() != nm || qd_m.len() != nm || qdd_m.len() != nm {
        return Err(Error::Invalid("manipulator trajectory dimension mismatch".into()));
    }
    let mut q = DVector::zeros(n);
    let mut qd = DVector::zeros(n);
    let mut qdd = DVector::zeros(n);
    q.rows_mut(PASSIVE_DOF, nm).copy_from(q_m);
    qd.rows_mut(PASSIVE_DOF, nm).copy_from(qd_m);
    qdd.rows_mut(PASSIVE_DOF, nm).copy_from(qdd_m);
    let tau = mass_matrix(model, &q)? * qdd + bias_forces(model, &q, &qd)?.total();
    Ok(VirtualTorque::from_iterator(tau.rows(0, PASSIVE_DOF).iter().copied()))
}

/// Per-motor thrusts along a manipulator trajectory sampled every `dt` seconds.
pub fn thrust_profile(
    model: &ChainModel,
    arr: &PropulsionArrangement,
    traj: &ManipulatorTrajectory,
    bounds: &ThrustBounds,
    dt: f64,
) -> Result<ThrustProfile> {
    if !(dt > 0.0) {
        return Err(Error::Invalid("dt must be positive".into()));
    }
    if traj.dof() != model.manipulator_dof() {
        return Err(Error::Invalid("trajectory and model disagree on manipulator dof".into()));
    }
    let a = crate::model::allocation::build_allocation_matrix(arr);
    let rest = SystemState::rest(model);
    let j = chain_jacobian(model, &rest)?;
    let steps = (traj.duration() / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let thrusts = times
        .par_iter()
        .map(|&t| {
            let (q, qd, qdd) = traj.sample(t);
            let tau = holding_torques(model, &q, &qd, &qdd)?;
            let w = virtual_torque_to_wrench(&j, &tau);
            allocate_thrusts(&a, &w).map(|alloc| alloc.thrusts)
        })
        .collect::<Result<Vec<_>>>()?;
    let saturated = thrusts.iter().map(|u| !bounds.contains(u)).collect();
    Ok(ThrustProfile { times, thrusts, saturated })
}
