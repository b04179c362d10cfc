//! Safe path following for linear robots with a state-dependent directional metric.
//!
//! A virtual reference governor chases the farthest point of a navigation path
//! that lies inside a local safe zone. The zone is an ellipsoid whose shape
//! follows the robot's direction of motion and whose size is the directional
//! clearance to obstacles minus a bound on the robot's future deviation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod governor;
pub mod metric;
pub mod path;
pub mod planner;
pub mod sim;
pub mod world;

pub use error::{Error, Result};
