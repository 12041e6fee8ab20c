//! Map between the platform body twist and the suspension coordinate rates.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};

use super::allocation::BodyWrench;
use crate::dynamics::chain::{check_domain, ChainModel, Kinematics, SystemState, PASSIVE_DOF};
use crate::error::{Error, Result};

/// 5×6 map from body twist `(ω; v)` to `[q̇_y, q̇₁, q̇₂]`.
pub type ChainJacobian = SMatrix<f64, PASSIVE_DOF, 6>;
/// Virtual torques `[τ_y, τ₁, τ₂]`.
pub type VirtualTorque = SVector<f64, PASSIVE_DOF>;

/// Left inverse (pseudoinverse) of the platform twist Jacobian restricted to the
/// suspension coordinates. Rows: yaw, roll1, pitch1, roll2, pitch2.
pub fn chain_jacobian(model: &ChainModel, state: &SystemState) -> Result<ChainJacobian> {
    state.check_dimension(model)?;
    check_domain(&state.q)?;
    let kin = Kinematics::compute(model, &state.q);
    let full = kin.platform_body_jacobian();
    let passive: SMatrix<f64, 6, PASSIVE_DOF> =
        SMatrix::from_iterator(full.columns(0, PASSIVE_DOF).iter().copied());
    let svd = passive.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularConfiguration(format!(
            "suspension twist map lost rank (σ_min/σ_max = {:.3e})",
            smin / smax
        )));
    }
    svd.pseudo_inverse(1e-10 * smax).map_err(|e| Error::SingularConfiguration(e.to_string()))
}

/// `w = Jᵀ τ`, reordered from the twist-dual `(torque; force)` into a body wrench.
pub fn virtual_torque_to_wrench(j: &ChainJacobian, tau: &VirtualTorque) -> BodyWrench {
    let dual = j.transpose() * tau;
    BodyWrench::new(Vector3::new(dual[3], dual[4], dual[5]), Vector3::new(dual[0], dual[1], dual[2]))
}

/// Dual pairing of a wrench with a twist `(ω; v)`: mechanical power.
pub fn power(w: &BodyWrench, twist: &SVector<f64, 6>) -> f64 {
    w.torque.dot(&twist.fixed_rows::<3>(0)) + w.force.dot(&twist.fixed_rows::<3>(3))
}

/// Platform body Jacobian restricted to the suspension coordinates (6×5).
pub fn platform_twist_jacobian(model: &ChainModel, state: &SystemState) -> Result<DMatrix<f64>> {
    check_domain(&state.q)?;
    let kin = Kinematics::compute(model, &state.q);
    Ok(kin.platform_body_jacobian().columns(0, PASSIVE_DOF).into_owned())
}
