//! Kinematic tree of the suspended system.
//!
//! The chain is a serial sequence of revolute joints hanging from a fixed anchor:
//! yaw about the vertical, the upper passive joint (pitch then roll), the rigid cable,
//! the lower passive joint (pitch then roll), the platform disk and finally the
//! manipulator links. Generalized coordinates are ordered
//! `[yaw, roll1, pitch1, roll2, pitch2, q_m...]`, which differs from the order in which the
//! joints appear along the chain; every joint records the coordinate it drives.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

pub const YAW: usize = 0;
pub const ROLL1: usize = 1;
pub const PITCH1: usize = 2;
pub const ROLL2: usize = 3;
pub const PITCH2: usize = 4;
/// Number of coordinates owned by the suspension (yaw plus two roll/pitch pairs).
pub const PASSIVE_DOF: usize = 5;
pub const MAX_MANIPULATOR_LINKS: usize = 7;

/// Distance from `±π/2` at which a passive pitch is treated as singular.
pub const PITCH_MARGIN: f64 = 1e-6;

pub const STANDARD_GRAVITY: f64 = 9.81;

/// One manipulator link: a revolute joint followed by a rigid body.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com_offset: Vector3<f64>,
    /// Rotary inertia about the center of mass, link frame.
    pub inertia: Matrix3<f64>,
    /// Joint axis in the parent frame (unit).
    pub axis: Vector3<f64>,
    /// Joint location in the parent frame.
    pub parent_offset: Vector3<f64>,
}

impl LinkSpec {
    /// Slender rod of the given mass and length hanging along `-z` from its joint.
    pub fn rod(mass: f64, length: f64, axis: Vector3<f64>, parent_offset: Vector3<f64>) -> Self {
        let radius = 0.05;
        let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
        LinkSpec {
            mass,
            com_offset: Vector3::new(0.0, 0.0, -length / 2.0),
            inertia: Matrix3::from_diagonal(&Vector3::new(
                transverse,
                transverse,
                0.5 * mass * radius * radius,
            )),
            axis,
            parent_offset,
        }
    }
}

/// Inertial and geometric description of anchor, cable, platform and manipulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub cable_length: f64,
    pub platform_mass: f64,
    pub platform_radius: f64,
    /// Distance from the lower passive joint down to the platform center.
    pub suspension_offset: f64,
    pub manipulator: Vec<LinkSpec>,
    /// Manipulator base relative to the platform center, platform frame.
    pub manipulator_mount_offset: Vector3<f64>,
    /// Gravitational acceleration magnitude (acts along `-z`).
    pub gravity: f64,
    /// Viscous damping on the four passive roll/pitch coordinates, N·m·s/rad.
    pub passive_damping: f64,
}

impl Default for ChainModel {
    fn default() -> Self {
        ChainModel {
            cable_length: 12.0,
            platform_mass: 45.0,
            platform_radius: 0.75,
            suspension_offset: 0.25,
            manipulator: Vec::new(),
            manipulator_mount_offset: Vector3::new(0.0, 0.0, -0.1),
            gravity: STANDARD_GRAVITY,
            passive_damping: 0.0,
        }
    }
}

impl ChainModel {
    /// Default suspension carrying a 15 kg seven-joint arm mounted off-center.
    pub fn with_seven_dof_arm() -> Self {
        let x = Vector3::x();
        let y = Vector3::y();
        let z = Vector3::z();
        let down = |d: f64| Vector3::new(0.0, 0.0, -d);
        let manipulator = vec![
            LinkSpec::rod(3.0, 0.15, z, Vector3::zeros()),
            LinkSpec::rod(3.0, 0.15, y, down(0.15)),
            LinkSpec::rod(2.5, 0.30, z, down(0.15)),
            LinkSpec::rod(2.5, 0.30, x, down(0.30)),
            LinkSpec::rod(1.5, 0.25, z, down(0.30)),
            LinkSpec::rod(1.5, 0.10, y, down(0.25)),
            LinkSpec::rod(1.0, 0.10, z, down(0.10)),
        ];
        ChainModel {
            manipulator,
            manipulator_mount_offset: Vector3::new(0.25, 0.0, -0.1),
            ..ChainModel::default()
        }
    }

    pub fn dof(&self) -> usize {
        PASSIVE_DOF + self.manipulator.len()
    }

    pub fn manipulator_dof(&self) -> usize {
        self.manipulator.len()
    }

    /// Homogeneous disk inertia about its center, platform frame.
    pub fn platform_inertia(&self) -> Matrix3<f64> {
        let r2 = self.platform_radius * self.platform_radius;
        let m = self.platform_mass;
        Matrix3::from_diagonal(&Vector3::new(m * r2 / 4.0, m * r2 / 4.0, m * r2 / 2.0))
    }

    pub fn total_mass(&self) -> f64 {
        self.platform_mass + self.manipulator.iter().map(|l| l.mass).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{what} must be positive, got {x}")))
            }
        };
        positive(self.cable_length, "cable_length")?;
        positive(self.platform_mass, "platform_mass")?;
        positive(self.platform_radius, "platform_radius")?;
        positive(self.gravity, "gravity")?;
        if !(self.suspension_offset.is_finite() && self.passive_damping >= 0.0) {
            return Err(Error::Invalid("bad suspension offset or damping".into()));
        }
        if self.manipulator.len() > MAX_MANIPULATOR_LINKS {
            return Err(Error::Invalid(format!(
                "at most {MAX_MANIPULATOR_LINKS} manipulator links supported"
            )));
        }
        for (i, link) in self.manipulator.iter().enumerate() {
            positive(link.mass, &format!("link {i} mass"))?;
            if (link.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("link {i} axis must be a unit vector")));
            }
            let sym = (link.inertia - link.inertia.transpose()).amax();
            if sym > 1e-12 * link.inertia.amax().max(1.0) || link.inertia.cholesky().is_none() {
                return Err(Error::Invalid(format!(
                    "link {i} inertia must be symmetric positive definite"
                )));
            }
        }
        Ok(())
    }
}

/// Generalized coordinates, rates and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub time: f64,
}

impl SystemState {
    /// Hanging vertical, at rest, manipulator joints at zero.
    pub fn rest(model: &ChainModel) -> Self {
        let n = model.dof();
        SystemState { q: DVector::zeros(n), qdot: DVector::zeros(n), time: 0.0 }
    }

    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        SystemState { q, qdot, time: 0.0 }
    }

    pub fn yaw(&self) -> f64 {
        self.q[YAW]
    }

    pub fn yaw_rate(&self) -> f64 {
        self.qdot[YAW]
    }

    pub fn check_dimension(&self, model: &ChainModel) -> Result<()> {
        let n = model.dof();
        if self.q.len() != n || self.qdot.len() != n {
            return Err(Error::Invalid(format!(
                "state dimension {} / {} does not match model dof {n}",
                self.q.len(),
                self.qdot.len()
            )));
        }
        Ok(())
    }
}

/// Errors if either passive pitch is at (or beyond) the parametrization singularity.
pub fn check_domain(q: &DVector<f64>) -> Result<()> {
    for (idx, name) in [(PITCH1, "upper"), (PITCH2, "lower")] {
        let p = q[idx];
        if !p.is_finite() || p.abs() >= FRAC_PI_2 - PITCH_MARGIN {
            return Err(Error::SingularConfiguration(format!(
                "{name} passive-joint pitch {p:.6} rad at the ±π/2 boundary"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub(crate) struct JointFrame {
    pub coord: usize,
    pub axis: Vector3<f64>,
    pub origin: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BodyFrame {
    pub mass: f64,
    pub com: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub inertia: Matrix3<f64>,
    /// Bodies move with chain joints `0..moved_by`.
    pub moved_by: usize,
}

impl BodyFrame {
    pub fn world_inertia(&self) -> Matrix3<f64> {
        self.rotation * self.inertia * self.rotation.transpose()
    }
}

/// Forward kinematics of the whole chain at one configuration.
#[derive(Debug, Clone)]
pub(crate) struct Kinematics {
    pub n: usize,
    pub joints: Vec<JointFrame>,
    pub bodies: Vec<BodyFrame>,
    pub platform_center: Vector3<f64>,
    pub platform_rotation: Matrix3<f64>,
    /// Number of chain joints moving the platform.
    pub platform_moved_by: usize,
}

fn rot(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

impl Kinematics {
    pub fn compute(model: &ChainModel, q: &DVector<f64>) -> Kinematics {
        let n = model.dof();
        let mut joints = Vec::with_capacity(n);
        let mut bodies = Vec::with_capacity(1 + model.manipulator.len());
        let mut r = Matrix3::identity();
        let mut o = Vector3::zeros();

        let mut push_joint = |r: &mut Matrix3<f64>, o: &Vector3<f64>, local_axis: Vector3<f64>, coord: usize| {
            let axis = *r * local_axis;
            joints.push(JointFrame { coord, axis, origin: *o });
            *r *= rot(&local_axis, q[coord]);
        };

        push_joint(&mut r, &o, Vector3::z(), YAW);
        push_joint(&mut r, &o, Vector3::y(), PITCH1);
        push_joint(&mut r, &o, Vector3::x(), ROLL1);
        o += r * Vector3::new(0.0, 0.0, -model.cable_length);
        push_joint(&mut r, &o, Vector3::y(), PITCH2);
        push_joint(&mut r, &o, Vector3::x(), ROLL2);
        o += r * Vector3::new(0.0, 0.0, -model.suspension_offset);

        let platform_center = o;
        let platform_rotation = r;
        bodies.push(BodyFrame {
            mass: model.platform_mass,
            com: o,
            rotation: r,
            inertia: model.platform_inertia(),
            moved_by: PASSIVE_DOF,
        });

        o += r * model.manipulator_mount_offset;
        for (k, link) in model.manipulator.iter().enumerate() {
            o += r * link.parent_offset;
            push_joint(&mut r, &o, link.axis, PASSIVE_DOF + k);
            bodies.push(BodyFrame {
                mass: link.mass,
                com: o + r * link.com_offset,
                rotation: r,
                inertia: link.inertia,
                moved_by: PASSIVE_DOF + k + 1,
            });
        }

        Kinematics {
            n,
            joints,
            bodies,
            platform_center,
            platform_rotation,
            platform_moved_by: PASSIVE_DOF,
        }
    }

    /// Linear (3×n) and angular (3×n) Jacobians of a point rigidly attached behind
    /// the first `moved_by` chain joints.
    pub fn point_jacobian(&self, point: &Vector3<f64>, moved_by: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut jv = DMatrix::zeros(3, self.n);
        let mut jw = DMatrix::zeros(3, self.n);
        for joint in &self.joints[..moved_by] {
            let lin = joint.axis.cross(&(point - joint.origin));
            jv.fixed_view_mut::<3, 1>(0, joint.coord).copy_from(&lin);
            jw.fixed_view_mut::<3, 1>(0, joint.coord).copy_from(&joint.axis);
        }
        (jv, jw)
    }

    /// Platform geometric Jacobian in the body frame, rows `[angular; linear]`, 6×n.
    pub fn platform_body_jacobian(&self) -> DMatrix<f64> {
        let (jv, jw) = self.point_jacobian(&self.platform_center, self.platform_moved_by);
        let rt = self.platform_rotation.transpose();
        let mut j = DMatrix::zeros(6, self.n);
        j.view_mut((0, 0), (3, self.n)).copy_from(&(rt * jw));
        j.view_mut((3, 0), (3, self.n)).copy_from(&(rt * jv));
        j
    }
}
