//! MPPI over body-velocity command sequences.
//!
//! Each iteration samples Gaussian perturbations of the current mean,
//! clamps them to the velocity limits, rolls them out, scores them, and
//! moves the mean to the softmax-weighted average. The best rollout seen
//! across all iterations is returned, so its cost never increases.

mod cost;
mod footprint;
mod planner;

pub use cost::{
    cost_effort, cost_goal, cost_traversability, cost_traversability_indexed, total_cost, CostBreakdown, CostContext,
};
pub use footprint::{Footprint, FootprintQuery, RowPrefix};
pub use planner::{
    check_collision, check_collision_indexed, mppi_update, plan, plan_warm, planning_field, replay, MppiConfig,
    NoiseStd, PlanResult,
};

#[cfg(test)]
mod tests;
