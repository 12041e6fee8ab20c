//! Condition-number minimization over the installation angles.
//!
//! Constraints on the thrust directions `v_i`:
//! 1. balance: the uniform thrust vector maps onto `balanced_direction` (up to scale),
//! 2. normalization: `|v_i| = 1`,
//! 3. leg lift: `|z_B · v_j| >= sin(delta_p)` for the landing-leg units,
//! 4. perpendicularity: `d_i · v_i = 0`.
//!
//! (2) and (4) hold by construction when `beta = 0`; the search moves only `alpha`.
//! (3) is enforced by clamping, (1) by a Gauss–Newton projection onto its zero set.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Rotation3, SMatrix, Unit, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::allocation::{build_allocation_matrix, AllocationMatrix, SINGULAR_CUTOFF};
use crate::model::arrangement::{thrust_direction, PropulsionArrangement, LEG_UNITS, UNIT_COUNT};

pub type Alpha = [f64; UNIT_COUNT];

pub const FEASIBILITY_TOL: f64 = 1e-6;
const PROJECTION_TOL: f64 = 1e-12;
const RELATIVE_IMPROVEMENT: f64 = 1e-8;
const STALL_ITERATIONS: usize = 50;
const MAX_ITERATIONS: usize = 3000;
const MIN_STEP: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;
const RANDOM_POLLS: usize = 8;

/// `σ_max / σ_min`, or `+∞` when the matrix is rank deficient.
pub fn condition_number(a: &AllocationMatrix) -> f64 {
    let s = a.singular_values();
    if s[0] == 0.0 || s[5] <= SINGULAR_CUTOFF * s[0] {
        return f64::INFINITY;
    }
    s[0] / s[5]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    /// Geometry the angles are applied to (arm directions, lengths, spins, drag).
    pub template: PropulsionArrangement,
    /// Zero-based unit indices carrying a landing leg.
    pub leg_indices: Vec<usize>,
    /// Minimum elevation of leg-unit thrust out of the platform plane, radians.
    pub delta_p: f64,
    /// Body wrench direction `[force; torque]` the uniform thrust vector must map onto.
    pub balanced_direction: Vector6<f64>,
    pub starts: usize,
}

impl Default for DesignProblem {
    fn default() -> Self {
        DesignProblem {
            template: PropulsionArrangement::baseline(),
            leg_indices: LEG_UNITS.to_vec(),
            delta_p: PI / 6.0,
            balanced_direction: Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0),
            starts: 64,
        }
    }
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_p > 0.0 && self.delta_p < FRAC_PI_2) {
            return Err(Error::Invalid(format!("delta_p must lie in (0, π/2), got {}", self.delta_p)));
        }
        if self.leg_indices.iter().any(|&i| i >= UNIT_COUNT) {
            return Err(Error::Invalid("leg index out of range".into()));
        }
        if (self.balanced_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid("balanced_direction must be normalized".into()));
        }
        if self.starts == 0 {
            return Err(Error::Invalid("at least one start is required".into()));
        }
        Ok(())
    }

    pub fn arrangement(&self, alpha: &Alpha) -> PropulsionArrangement {
        self.template.with_alphas(alpha)
    }

    fn matrix(&self, alpha: &Alpha) -> AllocationMatrix {
        build_allocation_matrix(&self.arrangement(alpha))
    }
}

/// Worst violation of each constraint; zero iff satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintResiduals {
    pub balance: f64,
    pub normalization: f64,
    pub leg_projection: f64,
    pub perpendicularity: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.balance.max(self.normalization).max(self.leg_projection).max(self.perpendicularity)
    }

    pub fn feasible(&self) -> bool {
        self.max() < FEASIBILITY_TOL
    }
}

fn balance_vector(a: &AllocationMatrix, dir: &Vector6<f64>) -> Vector6<f64> {
    let image = a.0.column_sum() / (UNIT_COUNT as f64).sqrt();
    image - dir * image.dot(dir)
}

/// Residuals for a full arrangement (any `beta`).
pub fn arrangement_residuals(arr: &PropulsionArrangement, prob: &DesignProblem) -> ConstraintResiduals {
    let a = build_allocation_matrix(arr);
    let dirs: Vec<_> = arr.units().iter().map(thrust_direction).collect();
    let sin_dp = prob.delta_p.sin();
    ConstraintResiduals {
        balance: balance_vector(&a, &prob.balanced_direction).norm(),
        normalization: dirs.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max),
        leg_projection: prob
            .leg_indices
            .iter()
            .map(|&j| (sin_dp - dirs[j].z.abs()).max(0.0))
            .fold(0.0, f64::max),
        perpendicularity: arr
            .units()
            .iter()
            .zip(&dirs)
            .map(|(u, v)| u.arm_direction.dot(v).abs())
            .fold(0.0, f64::max),
    }
}

/// Residuals for installation angles applied to the problem's template.
pub fn constraint_residuals(alpha: &Alpha, prob: &DesignProblem) -> ConstraintResiduals {
    arrangement_residuals(&prob.arrangement(alpha), prob)
}

/// Outcome of a design run.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub alpha: Alpha,
    pub condition_number: f64,
    pub constraint_residuals: ConstraintResiduals,
    pub iterations: usize,
    pub converged: bool,
}

/// One local refinement from a single start.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRun {
    pub start: Alpha,
    pub alpha: Alpha,
    pub condition_number: f64,
    /// Incumbent condition number after every iteration; starts with the projected start.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn wrap(angle: f64) -> f64 {
    // into (-π, π]
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Nearest angle whose cosine magnitude is at least `sin(delta_p)`.
fn clamp_leg(angle: f64, delta_p: f64) -> (f64, bool) {
    let a = wrap(angle);
    // distance to the closest in-plane direction (±π/2) must be at least delta_p
    let target = if a >= 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
    let off = a - target;
    if off.abs() >= delta_p {
        return (a, false);
    }
    let clamped = if off >= 0.0 { target + delta_p } else { target - delta_p };
    (wrap(clamped), true)
}

/// Derivative of the balance residual with respect to each angle.
fn balance_jacobian(prob: &DesignProblem, alpha: &Alpha) -> SMatrix<f64, 6, UNIT_COUNT> {
    let arr = prob.arrangement(alpha);
    let dir = &prob.balanced_direction;
    let proj = SMatrix::<f64, 6, 6>::identity() - dir * dir.transpose();
    let scale = 1.0 / (UNIT_COUNT as f64).sqrt();
    let mut jac = SMatrix::<f64, 6, UNIT_COUNT>::zeros();
    for (i, unit) in arr.units().iter().enumerate() {
        // d/dα of R(perp, β) R(d, α) z = R(perp, β) (d × R(d, α) z); R(perp, β) fixes perp
        let mut base = unit.clone();
        base.beta = 0.0;
        let v0 = thrust_direction(&base);
        let dv0 = unit.arm_direction.cross(&v0);
        let dv = if unit.beta == 0.0 {
            dv0
        } else {
            let axis = Unit::new_normalize(Vector3::z().cross(&unit.arm_direction));
            Rotation3::from_axis_angle(&axis, unit.beta) * dv0
        };
        let dtorque = unit.position().cross(&dv) + dv * (unit.spin.sign() * arr.drag_coefficient);
        let col = Vector6::new(dv.x, dv.y, dv.z, dtorque.x, dtorque.y, dtorque.z) * scale;
        jac.set_column(i, &(proj * col));
    }
    jac
}

/// Pulls `alpha` onto the feasible set; `None` if the projection does not converge.
pub fn project(prob: &DesignProblem, alpha: &Alpha) -> Option<Alpha> {
    let mut a = alpha.map(wrap);
    for _ in 0..60 {
        let mut frozen = [false; UNIT_COUNT];
        for &j in &prob.leg_indices {
            let (c, hit) = clamp_leg(a[j], prob.delta_p);
            a[j] = c;
            frozen[j] = hit;
        }
        let r = balance_vector(&prob.matrix(&a), &prob.balanced_direction);
        if r.norm() < PROJECTION_TOL {
            return Some(a);
        }
        let mut jac = balance_jacobian(prob, &a);
        for (i, f) in frozen.iter().enumerate() {
            if *f {
                jac.column_mut(i).fill(0.0);
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return None;
        }
        let step = svd.solve(&r, 1e-10 * smax).ok()?;
        // damp large Newton steps
        let norm = step.norm();
        let limit = 0.5;
        let factor = if norm > limit { limit / norm } else { 1.0 };
        for i in 0..UNIT_COUNT {
            a[i] = wrap(a[i] - factor * step[i]);
        }
    }
    None
}

fn feasible_kappa(prob: &DesignProblem, alpha: &Alpha) -> Option<f64> {
    let k = condition_number(&prob.matrix(alpha));
    if !k.is_finite() {
        return None;
    }
    constraint_residuals(alpha, prob).feasible().then_some(k)
}

/// Projected pattern search with a shrinking step from one start point.
///
/// Each iteration polls `±step` along every coordinate and along `RANDOM_POLLS` random unit
/// directions drawn from `seed`; the best improving projected point is accepted.
pub fn local_search(prob: &DesignProblem, start: &Alpha, seed: u64) -> Option<LocalRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = project(prob, start)?;
    let mut kappa = feasible_kappa(prob, &alpha)?;
    let mut history = vec![kappa];
    let mut step = 0.25;
    let mut iterations = 0;
    let mut stall = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let before = kappa;
        let mut directions: Vec<Alpha> = (0..UNIT_COUNT)
            .map(|i| std::array::from_fn(|k| if k == i { 1.0 } else { 0.0 }))
            .collect();
        for _ in 0..RANDOM_POLLS {
            let d: Alpha = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            directions.push(d.map(|x| x / norm));
        }
        let center = alpha;
        for d in &directions {
            for sign in [1.0, -1.0] {
                let trial: Alpha = std::array::from_fn(|k| wrap(center[k] + sign * step * d[k]));
                let Some(p) = project(prob, &trial) else { continue };
                if let Some(k) = feasible_kappa(prob, &p) {
                    if k < kappa {
                        kappa = k;
                        alpha = p;
                    }
                }
            }
        }
        history.push(kappa);
        if kappa < before {
            if (before - kappa) / before < RELATIVE_IMPROVEMENT {
                stall += 1;
            } else {
                stall = 0;
            }
        } else {
            step *= 0.5;
            stall += 1;
        }
        if step < MIN_STEP || stall >= STALL_ITERATIONS {
            converged = true;
            break;
        }
    }
    Some(LocalRun {
        start: *start,
        alpha,
        condition_number: kappa,
        history,
        iterations,
        converged,
    })
}

fn lexicographic(a: &Alpha, b: &Alpha) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Best local refinement over the given start points.
pub fn optimize_from(prob: &DesignProblem, starts: &[Alpha], seed: u64) -> Result<DesignResult> {
    prob.validate()?;
    let runs: Vec<Option<LocalRun>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| local_search(prob, s, poll_seed(seed, i)))
        .collect();
    let runs: Vec<LocalRun> = runs.into_iter().flatten().collect();
    let best_kappa = runs
        .iter()
        .map(|r| r.condition_number)
        .min_by(|a, b| a.total_cmp(b))
        .ok_or(Error::NoFeasiblePoint)?;
    let best = runs
        .iter()
        .filter(|r| r.condition_number <= best_kappa * (1.0 + TIE_TOL))
        .min_by(|a, b| lexicographic(&a.alpha, &b.alpha))
        .expect("at least one run attains the minimum");
    let residuals = constraint_residuals(&best.alpha, prob);
    Ok(DesignResult {
        alpha: best.alpha,
        condition_number: best.condition_number,
        constraint_residuals: residuals,
        iterations: runs.iter().map(|r| r.iterations).sum(),
        converged: best.converged && residuals.feasible(),
    })
}

fn poll_seed(seed: u64, start: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(start as u64 + 1)
}

/// Uniform random starts in `(-π, π]`, drawn from `seed`.
pub fn random_starts(count: usize, seed: u64) -> Vec<Alpha> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| std::array::from_fn(|_| wrap(rng.random_range(-PI..PI)))).collect()
}

/// Multi-start design with `prob.starts` random start points.
pub fn optimize(prob: &DesignProblem, seed: u64) -> Result<DesignResult> {
    optimize_from(prob, &random_starts(prob.starts, seed), seed)
}

/// Whether a leg-unit motor can lift its leg at the minimum installation elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegLift {
    pub feasible: bool,
    /// Vertical thrust component minus leg weight, newtons.
    pub margin: f64,
}

/// Motor and leg share the same lever arm about the hinge, so it cancels.
pub fn leg_lift_check(leg_mass: f64, lever: f64, max_thrust: f64, delta_p: f64) -> Result<LegLift> {
    if !(leg_mass >= 0.0 && lever > 0.0 && max_thrust > 0.0 && delta_p > 0.0) {
        return Err(Error::Invalid("leg lift inputs must be positive".into()));
    }
    let margin = max_thrust * delta_p.sin() - leg_mass * crate::dynamics::chain::STANDARD_GRAVITY;
    Ok(LegLift { feasible: margin >= 0.0, margin })
}
