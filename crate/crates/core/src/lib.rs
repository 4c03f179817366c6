//! Geometric navigation supervision.
//!
//! Plans SE(2) paths on traversability grid maps with MPPI, turns planner and
//! teleoperation trajectories into goal-conditioned datasets, and scores
//! planners with success, collision and SPL in open and closed loop.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod geometry;
pub mod worldmodel;

pub use error::{NavError, Result};
pub use exec::Execution;
pub use geometry::{CommandSequence, Path, Pose2, Twist2, VelocityLimits};
pub mod datasetgen;
pub mod eval;
pub mod geodesic;
pub mod mppi;
pub mod sim;
