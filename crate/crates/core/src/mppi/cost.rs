//! Cost terms: traversability under the footprint, geodesic goal distance
//! with heading alignment near the goal, and command effort.

use serde::{Deserialize, Serialize};

use super::footprint::{Footprint, FootprintQuery};
use super::MppiConfig;
use crate::error::Result;
use crate::geodesic::DistanceField;
use crate::geometry::{heading_error, rollout, CommandSequence, Path, Pose2};
use crate::worldmodel::{GridMap2D, WorldScene, OBSTACLE_COST};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub trav: f64,
    pub goal: f64,
    pub effort: f64,
    pub total: f64,
}

/// Weighted term; a zero weight contributes nothing even for infinite terms.
#[inline]
fn weighted(w: f64, c: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * c
    }
}

impl CostBreakdown {
    pub fn combine(trav: f64, goal: f64, effort: f64, w_trav: f64, w_goal: f64, w_effort: f64) -> Self {
        CostBreakdown {
            trav,
            goal,
            effort,
            total: weighted(w_trav, trav) + weighted(w_goal, goal) + weighted(w_effort, effort),
        }
    }
}

/// Traversability cost with a prebuilt prefix index over the cost map.
pub fn cost_traversability_indexed(path: &Path, costs: &FootprintQuery<'_>, footprint: &Footprint) -> f64 {
    path.iter()
        .map(|w| {
            let (sum, outside) = costs.sum(footprint, w);
            sum + outside as f64 * OBSTACLE_COST
        })
        .sum()
}

/// Sum over waypoints of the cost-map cells under the dilated footprint;
/// each out-of-map cell counts as an obstacle.
pub fn cost_traversability(path: &Path, cost_map: &GridMap2D, footprint: &Footprint) -> f64 {
    cost_traversability_indexed(path, &FootprintQuery::new(cost_map), footprint)
}

/// `Σ d(s_i)` plus `|θ_G − θ_i|` for waypoints within `align_radius` of the goal.
pub fn cost_goal(path: &Path, field: &DistanceField, goal: &Pose2, align_radius: f64) -> f64 {
    path.iter()
        .map(|w| {
            let d = field.query(w);
            if d <= align_radius {
                d + heading_error(goal.theta, w.theta)
            } else {
                d
            }
        })
        .sum()
}

pub fn cost_effort(cmds: &CommandSequence, w_lin: f64, w_lat: f64, w_ang: f64) -> f64 {
    cmds.commands
        .iter()
        .map(|c| w_lin * c.vx.abs() + w_lat * c.vy.abs() + w_ang * c.omega.abs())
        .sum()
}

/// Read-only state shared by every rollout of one plan.
pub struct CostContext<'a> {
    pub scene: &'a WorldScene,
    pub field: &'a DistanceField,
    pub goal: Pose2,
    costs: FootprintQuery<'a>,
}

impl<'a> CostContext<'a> {
    pub fn new(scene: &'a WorldScene, field: &'a DistanceField, goal: Pose2) -> Self {
        CostContext {
            scene,
            field,
            goal,
            costs: FootprintQuery::new(&scene.cost),
        }
    }

    pub fn evaluate_path(&self, path: &Path, cmds: &CommandSequence, config: &MppiConfig) -> CostBreakdown {
        let trav = if config.w_trav == 0.0 {
            0.0
        } else {
            cost_traversability_indexed(path, &self.costs, &config.footprint)
        };
        let goal = if config.w_goal == 0.0 {
            0.0
        } else {
            cost_goal(path, self.field, &self.goal, config.goal_align_radius)
        };
        let effort = cost_effort(cmds, config.w_lin, config.w_lat, config.w_ang);
        CostBreakdown::combine(trav, goal, effort, config.w_trav, config.w_goal, config.w_effort)
    }

    pub fn evaluate(
        &self,
        start: &Pose2,
        cmds: &CommandSequence,
        config: &MppiConfig,
    ) -> Result<(Path, CostBreakdown)> {
        let path = rollout(start, cmds)?;
        let cost = self.evaluate_path(&path, cmds, config);
        Ok((path, cost))
    }
}

/// `w_trav·C_trav + w_goal·C_goal + w_effort·C_effort` of the rollout of `cmds`.
pub fn total_cost(
    start: &Pose2,
    cmds: &CommandSequence,
    scene: &WorldScene,
    field: &DistanceField,
    goal: &Pose2,
    config: &MppiConfig,
) -> Result<CostBreakdown> {
    CostContext::new(scene, field, *goal)
        .evaluate(start, cmds, config)
        .map(|(_, c)| c)
}
