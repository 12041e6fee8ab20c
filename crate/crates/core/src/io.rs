//! Text documents for arrangements, chain models and design runs (TOML).
//!
//! Angles in documents are degrees; unit indices are 1-based.

use std::path::Path;

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::design::{DesignProblem, DesignResult};
use crate::dynamics::chain::{ChainModel, LinkSpec};
use crate::error::{Error, Result};
use crate::model::arrangement::{PropulsionArrangement, PropulsionUnit, Spin, UNIT_COUNT};

/// Formats a float with 17 significant digits so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn render<T: Serialize>(doc: &T) -> Result<String> {
    toml::to_string(doc).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDoc {
    pub arm_angle_deg: f64,
    #[serde(default = "default_arm_length")]
    pub arm_length: f64,
    pub alpha_deg: f64,
    #[serde(default)]
    pub beta_deg: f64,
    /// +1 clockwise, −1 counterclockwise.
    pub spin: i32,
    pub max_thrust: f64,
}

fn default_arm_length() -> f64 {
    crate::model::arrangement::DEFAULT_ARM_LENGTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrangementDoc {
    pub drag_coefficient: f64,
    #[serde(rename = "unit")]
    pub units: Vec<UnitDoc>,
}

impl ArrangementDoc {
    pub fn from_arrangement(arr: &PropulsionArrangement) -> Self {
        ArrangementDoc {
            drag_coefficient: arr.drag_coefficient,
            units: arr
                .units()
                .iter()
                .map(|u| UnitDoc {
                    arm_angle_deg: u.arm_angle().to_degrees(),
                    arm_length: u.arm_length,
                    alpha_deg: u.alpha.to_degrees(),
                    beta_deg: u.beta.to_degrees(),
                    spin: u.spin.sign() as i32,
                    max_thrust: u.max_thrust,
                })
                .collect(),
        }
    }

    pub fn to_arrangement(&self) -> Result<PropulsionArrangement> {
        let units = self
            .units
            .iter()
            .map(|u| {
                Ok(PropulsionUnit::on_arm(
                    u.arm_angle_deg.to_radians(),
                    u.arm_length,
                    u.alpha_deg.to_radians(),
                    u.beta_deg.to_radians(),
                    Spin::from_sign(u.spin)?,
                    u.max_thrust,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        PropulsionArrangement::new(units, self.drag_coefficient)
    }
}

pub fn parse_arrangement(text: &str) -> Result<PropulsionArrangement> {
    parse::<ArrangementDoc>(text, "arrangement")?.to_arrangement()
}

pub fn render_arrangement(arr: &PropulsionArrangement) -> Result<String> {
    render(&ArrangementDoc::from_arrangement(arr))
}

/// A preset name (`baseline`, `collinear`) or a path to an arrangement document.
pub fn load_arrangement(spec: &str, base: &Path) -> Result<PropulsionArrangement> {
    match spec {
        "baseline" => Ok(PropulsionArrangement::baseline()),
        "collinear" => Ok(PropulsionArrangement::collinear()),
        path => parse_arrangement(&read(&base.join(path))?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub mass: f64,
    pub com_offset: [f64; 3],
    /// Row-major 3×3 inertia about the center of mass.
    pub inertia: [[f64; 3]; 3],
    pub axis: [f64; 3],
    pub parent_offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub cable_length: f64,
    pub platform_mass: f64,
    pub platform_radius: f64,
    pub suspension_offset: f64,
    pub gravity: f64,
    #[serde(default)]
    pub passive_damping: f64,
    pub manipulator_mount_offset: [f64; 3],
    #[serde(default, rename = "link")]
    pub links: Vec<LinkDoc>,
}

impl ModelDoc {
    pub fn from_model(m: &ChainModel) -> Self {
        ModelDoc {
            cable_length: m.cable_length,
            platform_mass: m.platform_mass,
            platform_radius: m.platform_radius,
            suspension_offset: m.suspension_offset,
            gravity: m.gravity,
            passive_damping: m.passive_damping,
            manipulator_mount_offset: m.manipulator_mount_offset.into(),
            links: m
                .manipulator
                .iter()
                .map(|l| LinkDoc {
                    mass: l.mass,
                    com_offset: l.com_offset.into(),
                    inertia: std::array::from_fn(|r| std::array::from_fn(|c| l.inertia[(r, c)])),
                    axis: l.axis.into(),
                    parent_offset: l.parent_offset.into(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<ChainModel> {
        let model = ChainModel {
            cable_length: self.cable_length,
            platform_mass: self.platform_mass,
            platform_radius: self.platform_radius,
            suspension_offset: self.suspension_offset,
            manipulator: self
                .links
                .iter()
                .map(|l| LinkSpec {
                    mass: l.mass,
                    com_offset: Vector3::from(l.com_offset),
                    inertia: Matrix3::from_fn(|r, c| l.inertia[r][c]),
                    axis: Vector3::from(l.axis),
                    parent_offset: Vector3::from(l.parent_offset),
                })
                .collect(),
            manipulator_mount_offset: Vector3::from(self.manipulator_mount_offset),
            gravity: self.gravity,
            passive_damping: self.passive_damping,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn parse_model(text: &str) -> Result<ChainModel> {
    parse::<ModelDoc>(text, "model")?.to_model()
}

pub fn render_model(model: &ChainModel) -> Result<String> {
    render(&ModelDoc::from_model(model))
}

/// A preset name (`default`, `seven_dof_arm`) or a path to a model document.
pub fn load_model(spec: &str, base: &Path) -> Result<ChainModel> {
    match spec {
        "default" => Ok(ChainModel::default()),
        "seven_dof_arm" => Ok(ChainModel::with_seven_dof_arm()),
        path => parse_model(&read(&base.join(path))?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignProblemDoc {
    #[serde(default = "default_template")]
    pub arrangement: String,
    #[serde(default = "default_delta_p")]
    pub delta_p_deg: f64,
    #[serde(default = "default_legs")]
    pub leg_units: Vec<usize>,
    #[serde(default = "default_balanced")]
    pub balanced_direction: [f64; 6],
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Extra start points (degrees), refined alongside the random ones.
    #[serde(default)]
    pub initial_alpha_deg: Vec<[f64; UNIT_COUNT]>,
}

fn default_template() -> String {
    "baseline".into()
}
fn default_delta_p() -> f64 {
    30.0
}
fn default_legs() -> Vec<usize> {
    vec![2, 5, 8]
}
fn default_balanced() -> [f64; 6] {
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
}
fn default_starts() -> usize {
    64
}

impl DesignProblemDoc {
    pub fn to_problem(&self, base: &Path) -> Result<DesignProblem> {
        if self.leg_units.iter().any(|&i| i == 0 || i > UNIT_COUNT) {
            return Err(Error::Invalid("leg_units are 1-based indices in 1..=8".into()));
        }
        let dir = Vector6::from_row_slice(&self.balanced_direction);
        let norm = dir.norm();
        if norm == 0.0 {
            return Err(Error::Invalid("balanced_direction must be nonzero".into()));
        }
        let prob = DesignProblem {
            template: load_arrangement(&self.arrangement, base)?,
            leg_indices: self.leg_units.iter().map(|i| i - 1).collect(),
            delta_p: self.delta_p_deg.to_radians(),
            balanced_direction: dir / norm,
            starts: self.starts,
        };
        prob.validate()?;
        Ok(prob)
    }
}

pub fn parse_design_problem(text: &str) -> Result<DesignProblemDoc> {
    parse(text, "design problem")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsDoc {
    pub balance: f64,
    pub normalization: f64,
    pub leg_projection: f64,
    pub perpendicularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResultDoc {
    pub alpha_deg: Vec<f64>,
    pub condition_number: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: ResidualsDoc,
}

impl DesignResultDoc {
    pub fn from_result(r: &DesignResult) -> Self {
        let c = &r.constraint_residuals;
        DesignResultDoc {
            alpha_deg: r.alpha.iter().map(|a| a.to_degrees()).collect(),
            condition_number: r.condition_number,
            iterations: r.iterations,
            converged: r.converged,
            residuals: ResidualsDoc {
                balance: c.balance,
                normalization: c.normalization,
                leg_projection: c.leg_projection,
                perpendicularity: c.perpendicularity,
            },
        }
    }
}

pub fn render_design_result(r: &DesignResult) -> Result<String> {
    render(&DesignResultDoc::from_result(r))
}
