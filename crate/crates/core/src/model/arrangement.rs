//! Propulsion unit placement and thrust directions.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of propulsion units on the platform.
pub const UNIT_COUNT: usize = 8;

/// Zero-based indices of the units mounted on the landing-leg arms (units 2, 5 and 8).
pub const LEG_UNITS: [usize; 3] = [1, 4, 7];

/// Distance from platform center to each motor, meters.
pub const DEFAULT_ARM_LENGTH: f64 = 0.75;

/// Propeller drag-torque to thrust ratio, meters.
pub const DEFAULT_DRAG_COEFFICIENT: f64 = 0.016;

/// Per-motor thrust limit, newtons.
pub const DEFAULT_MAX_THRUST: f64 = 40.0;

/// Installation angles (degrees) of the reference octorotor design.
pub const BASELINE_ALPHA_DEG: [f64; UNIT_COUNT] =
    [53.1, -54.2, -126.9, 125.9, 53.1, -54.1, -126.9, 125.9];

/// Propeller spin sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spin {
    Clockwise,
    CounterClockwise,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Clockwise => 1.0,
            Spin::CounterClockwise => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Spin> {
        match sign {
            1 => Ok(Spin::Clockwise),
            -1 => Ok(Spin::CounterClockwise),
            s => Err(Error::Invalid(format!("spin must be +1 or -1, got {s}"))),
        }
    }
}

/// One motor/propeller placement on the platform.
#[derive(Debug, Clone, PartialEq)]
pub struct PropulsionUnit {
    /// Unit vector in the platform plane pointing along the arm.
    pub arm_direction: Vector3<f64>,
    pub arm_length: f64,
    /// Rotation of the thrust axis about the arm, measured from the platform normal.
    pub alpha: f64,
    /// Rotation about the in-plane perpendicular to the arm.
    pub beta: f64,
    pub spin: Spin,
    pub max_thrust: f64,
}

impl PropulsionUnit {
    /// Unit on an arm at `arm_angle` radians from the body x axis.
    pub fn on_arm(arm_angle: f64, arm_length: f64, alpha: f64, beta: f64, spin: Spin, max_thrust: f64) -> Self {
        PropulsionUnit {
            arm_direction: Vector3::new(arm_angle.cos(), arm_angle.sin(), 0.0),
            arm_length,
            alpha,
            beta,
            spin,
            max_thrust,
        }
    }

    pub fn arm_angle(&self) -> f64 {
        self.arm_direction.y.atan2(self.arm_direction.x)
    }

    /// Motor position in the body frame.
    pub fn position(&self) -> Vector3<f64> {
        self.arm_direction * self.arm_length
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.arm_direction;
        if !d.iter().all(|x| x.is_finite()) || (d.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid("arm direction must be a unit vector".into()));
        }
        if d.z.abs() > 1e-12 {
            return Err(Error::Invalid("arm direction must lie in the platform plane".into()));
        }
        if !(self.max_thrust > 0.0) {
            return Err(Error::Invalid("max_thrust must be positive".into()));
        }
        if !(self.arm_length.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Invalid("non-finite unit parameter".into()));
        }
        Ok(())
    }
}

/// Thrust axis of a unit: the platform normal rotated by `alpha` about the arm, then by
/// `beta` about the in-plane perpendicular to the arm.
pub fn thrust_direction(unit: &PropulsionUnit) -> Vector3<f64> {
    let z = Vector3::z();
    let arm = Unit::new_normalize(unit.arm_direction);
    let perp = Unit::new_normalize(z.cross(&unit.arm_direction));
    let about_arm = Rotation3::from_axis_angle(&arm, unit.alpha);
    let about_perp = Rotation3::from_axis_angle(&perp, unit.beta);
    about_perp * (about_arm * z)
}

/// Eight propulsion units plus the shared propeller drag ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PropulsionArrangement {
    units: Vec<PropulsionUnit>,
    pub drag_coefficient: f64,
}

impl PropulsionArrangement {
    pub fn new(units: Vec<PropulsionUnit>, drag_coefficient: f64) -> Result<Self> {
        if units.len() != UNIT_COUNT {
            return Err(Error::Invalid(format!(
                "arrangement needs exactly {UNIT_COUNT} units, got {}",
                units.len()
            )));
        }
        for u in &units {
            u.validate()?;
        }
        if !drag_coefficient.is_finite() {
            return Err(Error::Invalid("drag coefficient must be finite".into()));
        }
        Ok(PropulsionArrangement { units, drag_coefficient })
    }

    /// Octagonal frame: arms every 45 degrees starting on the body x axis, spins alternating
    /// clockwise / counterclockwise starting with unit 1.
    pub fn octagonal(alpha: [f64; UNIT_COUNT], beta: [f64; UNIT_COUNT]) -> Self {
        let units = (0..UNIT_COUNT)
            .map(|i| {
                let spin = if i % 2 == 0 { Spin::Clockwise } else { Spin::CounterClockwise };
                PropulsionUnit::on_arm(
                    i as f64 * PI / 4.0,
                    DEFAULT_ARM_LENGTH,
                    alpha[i],
                    beta[i],
                    spin,
                    DEFAULT_MAX_THRUST,
                )
            })
            .collect();
        PropulsionArrangement { units, drag_coefficient: DEFAULT_DRAG_COEFFICIENT }
    }

    /// Octagonal frame with the given installation angles and all `beta = 0`.
    pub fn with_alpha(alpha: [f64; UNIT_COUNT]) -> Self {
        Self::octagonal(alpha, [0.0; UNIT_COUNT])
    }

    /// The reference design and its installation angles.
    pub fn baseline() -> Self {
        Self::with_alpha(BASELINE_ALPHA_DEG.map(f64::to_radians))
    }

    /// All thrusts along the platform normal.
    pub fn collinear() -> Self {
        Self::with_alpha([0.0; UNIT_COUNT])
    }

    pub fn units(&self) -> &[PropulsionUnit] {
        &self.units
    }

    pub fn alpha(&self) -> [f64; UNIT_COUNT] {
        std::array::from_fn(|i| self.units[i].alpha)
    }

    /// Copy with new installation angles; everything else kept.
    pub fn with_alphas(&self, alpha: &[f64; UNIT_COUNT]) -> Self {
        let mut out = self.clone();
        for (u, a) in out.units.iter_mut().zip(alpha) {
            u.alpha = *a;
        }
        out
    }

    pub fn leg_units(&self) -> impl Iterator<Item = &PropulsionUnit> {
        LEG_UNITS.iter().map(move |&i| &self.units[i])
    }

    pub fn max_thrusts(&self) -> [f64; UNIT_COUNT] {
        std::array::from_fn(|i| self.units[i].max_thrust)
    }
}
