//! Design and simulation toolkit for a cable-suspended platform with eight tilted
//! propulsion units.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod scenario;
pub mod trajectory;
pub mod wrench;

pub use error::{Error, Result};
