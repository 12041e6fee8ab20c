//! Equations of motion `M(q) q̈ + C(q, q̇) q̇ + g(q) = τ` for the suspended chain.
//!
//! `M` is assembled from per-body Jacobians; its partial derivatives are computed in
//! closed form from the chain geometry, and `C` is built from the Christoffel symbols of
//! those derivatives, so `Ṁ - 2C` is skew-symmetric by construction.

pub mod chain;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

pub use chain::{ChainModel, LinkSpec, SystemState};
use chain::{check_domain, Kinematics, PASSIVE_DOF, PITCH1, PITCH2, ROLL1, ROLL2};

use crate::error::{Error, Result};
use crate::model::allocation::BodyWrench;

/// Generalized force ordered like the coordinates: `[τ_y, τ₁, τ₂, τ_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedForce(pub DVector<f64>);

impl GeneralizedForce {
    pub fn zeros(model: &ChainModel) -> Self {
        GeneralizedForce(DVector::zeros(model.dof()))
    }

    pub fn from_parts(tau_y: f64, tau_1: [f64; 2], tau_2: [f64; 2], tau_m: &[f64]) -> Self {
        let mut v = vec![tau_y, tau_1[0], tau_1[1], tau_2[0], tau_2[1]];
        v.extend_from_slice(tau_m);
        GeneralizedForce(DVector::from_vec(v))
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

fn prepare(model: &ChainModel, q: &DVector<f64>) -> Result<Kinematics> {
    if q.len() != model.dof() {
        return Err(Error::Invalid(format!(
            "configuration has {} entries, model has {} coordinates",
            q.len(),
            model.dof()
        )));
    }
    check_domain(q)?;
    Ok(Kinematics::compute(model, q))
}

fn assemble_mass(kin: &Kinematics) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(kin.n, kin.n);
    for body in &kin.bodies {
        let (jv, jw) = kin.point_jacobian(&body.com, body.moved_by);
        let iw = body.world_inertia();
        m += jv.transpose() * &jv * body.mass + jw.transpose() * (iw * &jw);
    }
    // symmetrize away round-off so downstream checks see an exactly symmetric matrix
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Joint-space inertia matrix.
pub fn mass_matrix(model: &ChainModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(assemble_mass(&prepare(model, q)?))
}

/// `∂M/∂q_c` for every coordinate `c`, in closed form.
pub fn mass_matrix_partials(model: &ChainModel, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
    let kin = prepare(model, q)?;
    Ok(partials(&kin))
}

fn partials(kin: &Kinematics) -> Vec<DMatrix<f64>> {
    let n = kin.n;
    let mut out = vec![DMatrix::zeros(n, n); n];
    for body in &kin.bodies {
        let (jv, jw) = kin.point_jacobian(&body.com, body.moved_by);
        let iw = body.world_inertia();
        let active = &kin.joints[..body.moved_by];
        for (k, jk) in active.iter().enumerate() {
            let mut djv = DMatrix::zeros(3, n);
            let mut djw = DMatrix::zeros(3, n);
            for (j, jj) in active.iter().enumerate() {
                let (dv, dw) = if k < j {
                    let r = body.com - jj.origin;
                    (jk.axis.cross(&jj.axis.cross(&r)), jk.axis.cross(&jj.axis))
                } else {
                    let r = body.com - jk.origin;
                    (jj.axis.cross(&jk.axis.cross(&r)), Vector3::zeros())
                };
                djv.fixed_view_mut::<3, 1>(0, jj.coord).copy_from(&dv);
                djw.fixed_view_mut::<3, 1>(0, jj.coord).copy_from(&dw);
            }
            let s = skew(&jk.axis);
            let diw = s * iw - iw * s;
            let lin = djv.transpose() * &jv * body.mass;
            let ang = djw.transpose() * (iw * &jw);
            let dm = &lin + lin.transpose() + &ang + ang.transpose() + jw.transpose() * (diw * &jw);
            out[jk.coord] += dm;
        }
    }
    out
}

/// Coriolis/centrifugal matrix from Christoffel symbols of the first kind.
pub fn coriolis_matrix(model: &ChainModel, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
    let kin = prepare(model, q)?;
    Ok(christoffel(&partials(&kin), qdot))
}

fn christoffel(dm: &[DMatrix<f64>], qdot: &DVector<f64>) -> DMatrix<f64> {
    let n = dm.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k];
            }
            c[(i, j)] = acc;
        }
    }
    c
}

fn gravity_of(model: &ChainModel, kin: &Kinematics) -> DVector<f64> {
    let mut g = DVector::zeros(kin.n);
    for body in &kin.bodies {
        let (jv, _) = kin.point_jacobian(&body.com, body.moved_by);
        g += jv.row(2).transpose() * (body.mass * model.gravity);
    }
    g
}

/// Gradient of the gravitational potential.
pub fn gravity_vector(model: &ChainModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let kin = prepare(model, q)?;
    Ok(gravity_of(model, &kin))
}

/// Velocity-dependent and gravity terms of the equations of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasForces {
    /// `C(q, q̇) q̇`
    pub coriolis: DVector<f64>,
    /// `g(q)`
    pub gravity: DVector<f64>,
}

impl BiasForces {
    pub fn total(&self) -> DVector<f64> {
        &self.coriolis + &self.gravity
    }
}

pub fn bias_forces(model: &ChainModel, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<BiasForces> {
    let kin = prepare(model, q)?;
    let coriolis = if qdot.iter().all(|&x| x == 0.0) {
        DVector::zeros(kin.n)
    } else {
        christoffel(&partials(&kin), qdot) * qdot
    };
    Ok(BiasForces { coriolis, gravity: gravity_of(model, &kin) })
}

/// Gravitational potential relative to the all-zero configuration.
pub fn potential_energy(model: &ChainModel, q: &DVector<f64>) -> Result<f64> {
    let kin = prepare(model, q)?;
    let reference = Kinematics::compute(model, &DVector::zeros(kin.n));
    Ok(kin
        .bodies
        .iter()
        .zip(&reference.bodies)
        .map(|(b, r)| b.mass * model.gravity * (b.com.z - r.com.z))
        .sum())
}

pub fn kinetic_energy(model: &ChainModel, state: &SystemState) -> Result<f64> {
    let m = mass_matrix(model, &state.q)?;
    Ok(0.5 * state.qdot.dot(&(m * &state.qdot)))
}

/// Kinetic plus gravitational potential energy, joules.
pub fn total_energy(model: &ChainModel, state: &SystemState) -> Result<f64> {
    Ok(kinetic_energy(model, state)? + potential_energy(model, &state.q)?)
}

/// Platform body Jacobian (rows angular then linear, body frame) over all coordinates.
pub fn platform_jacobian(model: &ChainModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(prepare(model, q)?.platform_body_jacobian())
}

/// Generalized force produced by a body-frame wrench acting at the platform center.
pub fn wrench_to_generalized(model: &ChainModel, q: &DVector<f64>, w: &BodyWrench) -> Result<DVector<f64>> {
    let j = platform_jacobian(model, q)?;
    let dual = DVector::from_column_slice(&[
        w.torque.x, w.torque.y, w.torque.z, w.force.x, w.force.y, w.force.z,
    ]);
    Ok(j.transpose() * dual)
}

fn damping_force(model: &ChainModel, qdot: &DVector<f64>) -> DVector<f64> {
    let mut d = DVector::zeros(qdot.len());
    if model.passive_damping > 0.0 {
        for idx in [ROLL1, PITCH1, ROLL2, PITCH2] {
            d[idx] = model.passive_damping * qdot[idx];
        }
    }
    d
}

/// `q̈ = M⁻¹ (τ + Jᵀ w_ext − C q̇ − g − D q̇)`.
pub fn forward_dynamics(
    model: &ChainModel,
    state: &SystemState,
    tau: &GeneralizedForce,
    external: &BodyWrench,
) -> Result<DVector<f64>> {
    state.check_dimension(model)?;
    if tau.0.len() != model.dof() {
        return Err(Error::Invalid("generalized force dimension mismatch".into()));
    }
    let kin = prepare(model, &state.q)?;
    let m = assemble_mass(&kin);
    let mut rhs = tau.0.clone() - gravity_of(model, &kin) - damping_force(model, &state.qdot);
    if state.qdot.iter().any(|&x| x != 0.0) {
        rhs -= christoffel(&partials(&kin), &state.qdot) * &state.qdot;
    }
    if *external != BodyWrench::zero() {
        let j = kin.platform_body_jacobian();
        let dual = DVector::from_column_slice(&[
            external.torque.x,
            external.torque.y,
            external.torque.z,
            external.force.x,
            external.force.y,
            external.force.z,
        ]);
        rhs += j.transpose() * dual;
    }
    let chol = m.cholesky().ok_or_else(|| {
        Error::SingularConfiguration("mass matrix is not positive definite".into())
    })?;
    Ok(chol.solve(&rhs))
}

/// Inputs held constant over one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInputs {
    pub tau: GeneralizedForce,
    pub external: BodyWrench,
}

impl StepInputs {
    pub fn zero(model: &ChainModel) -> Self {
        StepInputs { tau: GeneralizedForce::zeros(model), external: BodyWrench::zero() }
    }
}

/// One explicit fourth-order Runge–Kutta step.
pub fn step(model: &ChainModel, state: &SystemState, inputs: &StepInputs, dt: f64) -> Result<SystemState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    state.check_dimension(model)?;
    let deriv = |q: &DVector<f64>, qd: &DVector<f64>, t: f64| -> Result<(DVector<f64>, DVector<f64>)> {
        let s = SystemState { q: q.clone(), qdot: qd.clone(), time: t };
        let qdd = forward_dynamics(model, &s, &inputs.tau, &inputs.external).map_err(|e| match e {
            Error::SingularConfiguration(_) => Error::DomainExit { time: t },
            other => other,
        })?;
        Ok((qd.clone(), qdd))
    };
    let (q0, v0, t0) = (&state.q, &state.qdot, state.time);
    let h = dt;
    let (k1q, k1v) = deriv(q0, v0, t0)?;
    let (k2q, k2v) = deriv(&(q0 + &k1q * (h / 2.0)), &(v0 + &k1v * (h / 2.0)), t0 + h / 2.0)?;
    let (k3q, k3v) = deriv(&(q0 + &k2q * (h / 2.0)), &(v0 + &k2v * (h / 2.0)), t0 + h / 2.0)?;
    let (k4q, k4v) = deriv(&(q0 + &k3q * h), &(v0 + &k3v * h), t0 + h)?;
    let q = q0 + (k1q + &k2q * 2.0 + &k3q * 2.0 + k4q) * (h / 6.0);
    let qdot = v0 + (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (h / 6.0);
    let t = t0 + h;
    check_domain(&q).map_err(|_| Error::DomainExit { time: t })?;
    Ok(SystemState { q, qdot, time: t })
}

/// Index range of the manipulator coordinates.
pub fn manipulator_range(model: &ChainModel) -> std::ops::Range<usize> {
    PASSIVE_DOF..model.dof()
}
