//! Goal-conditioned trajectory datasets: time-warped teleop segments,
//! planner-labeled goals, and their union.

mod build;
mod sample;
mod teleop;

pub use build::*;
pub use sample::*;
pub use teleop::*;
