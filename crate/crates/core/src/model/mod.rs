//! Propulsion geometry, allocation and the twist/wrench map of the suspension.

pub mod allocation;
pub mod arrangement;
pub mod jacobian;

pub use allocation::{allocate_thrusts, build_allocation_matrix, Allocation, AllocationMatrix, BodyWrench, ThrustVector};
pub use arrangement::{thrust_direction, PropulsionArrangement, PropulsionUnit, Spin};
pub use jacobian::{chain_jacobian, virtual_torque_to_wrench, ChainJacobian, VirtualTorque};
