//! Thrust-to-wrench allocation map and its pseudoinverse.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{SMatrix, SVector, Vector3, Vector6, SVD};

use super::arrangement::{thrust_direction, PropulsionArrangement, UNIT_COUNT};
use crate::error::{Error, Result};

pub type Matrix6x8 = SMatrix<f64, 6, UNIT_COUNT>;
pub type Vector8 = SVector<f64, UNIT_COUNT>;

/// Relative cutoff below which singular values count as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

/// Force and torque on the platform, both in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyWrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl BodyWrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        BodyWrench { force, torque }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pure_force(force: Vector3<f64>) -> Self {
        BodyWrench { force, torque: Vector3::zeros() }
    }

    pub fn pure_torque(torque: Vector3<f64>) -> Self {
        BodyWrench { force: Vector3::zeros(), torque }
    }

    /// Stacked as `[force; torque]`, the row order of the allocation matrix.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x, self.force.y, self.force.z, self.torque.x, self.torque.y, self.torque.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        BodyWrench {
            force: Vector3::new(v[0], v[1], v[2]),
            torque: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|x| x.is_finite())
    }
}

impl Add for BodyWrench {
    type Output = BodyWrench;
    fn add(self, rhs: BodyWrench) -> BodyWrench {
        BodyWrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

impl Sub for BodyWrench {
    type Output = BodyWrench;
    fn sub(self, rhs: BodyWrench) -> BodyWrench {
        BodyWrench::new(self.force - rhs.force, self.torque - rhs.torque)
    }
}

impl Neg for BodyWrench {
    type Output = BodyWrench;
    fn neg(self) -> BodyWrench {
        BodyWrench::new(-self.force, -self.torque)
    }
}

impl Mul<f64> for BodyWrench {
    type Output = BodyWrench;
    fn mul(self, s: f64) -> BodyWrench {
        BodyWrench::new(self.force * s, self.torque * s)
    }
}

/// Per-motor thrust magnitudes, newtons. Never clipped here; see `control::realize`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustVector(pub Vector8);

impl ThrustVector {
    pub fn zero() -> Self {
        ThrustVector(Vector8::zeros())
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

/// Maps the eight thrust magnitudes to the body wrench, rows `[force; torque]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationMatrix(pub Matrix6x8);

impl AllocationMatrix {
    pub fn from_matrix(m: Matrix6x8) -> Self {
        AllocationMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix6x8 {
        &self.0
    }

    pub fn apply(&self, u: &ThrustVector) -> BodyWrench {
        BodyWrench::from_vector(&(self.0 * u.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> [f64; 6] {
        let mut s: Vec<f64> = self.0.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        std::array::from_fn(|i| s[i])
    }

    pub fn rank(&self) -> usize {
        let s = self.singular_values();
        let cutoff = SINGULAR_CUTOFF * s[0];
        if s[0] == 0.0 {
            return 0;
        }
        s.iter().filter(|&&x| x > cutoff).count()
    }

    /// Moore-Penrose pseudoinverse with the relative singular-value cutoff.
    pub fn pseudo_inverse(&self) -> SMatrix<f64, UNIT_COUNT, 6> {
        let smax = self.singular_values()[0];
        if smax == 0.0 {
            return SMatrix::zeros();
        }
        let svd = SVD::new(self.0, true, true);
        // the cutoff is strictly positive here, so the call cannot fail
        svd.pseudo_inverse(SINGULAR_CUTOFF * smax).expect("positive cutoff")
    }
}

/// Column `i` is `[v_i; p_i x v_i + spin_i * c * v_i]`.
pub fn build_allocation_matrix(arr: &PropulsionArrangement) -> AllocationMatrix {
    let mut m = Matrix6x8::zeros();
    for (i, unit) in arr.units().iter().enumerate() {
        let v = thrust_direction(unit);
        let torque = unit.position().cross(&v) + v * (unit.spin.sign() * arr.drag_coefficient);
        m.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
        m.fixed_view_mut::<3, 1>(3, i).copy_from(&torque);
    }
    AllocationMatrix(m)
}

/// Minimum-norm thrusts for a wrench demand and the achieved residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub thrusts: ThrustVector,
    pub residual: f64,
}

/// `u = A† w`. Fails when the demand leaves the range of a rank-deficient matrix.
pub fn allocate_thrusts(a: &AllocationMatrix, w: &BodyWrench) -> Result<Allocation> {
    if !a.is_finite() || !w.is_finite() {
        return Err(Error::Invalid("non-finite allocation input".into()));
    }
    let target = w.to_vector();
    let u = a.pseudo_inverse() * target;
    let residual = (a.0 * u - target).norm();
    let rank = a.rank();
    if rank < 6 && residual > 1e-9 * (1.0 + target.norm()) {
        return Err(Error::RankDeficient { rank, residual });
    }
    Ok(Allocation { thrusts: ThrustVector(u), residual })
}
