//! Run configuration: one TOML file, every field defaulted.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use geonav::datasetgen::DatasetConfig;
use geonav::eval::{MppiPlanner, PathPlanner, StraightLinePlanner};
use geonav::mppi::{Footprint, MppiConfig};
use geonav::sim::{FollowerConfig, MppiReplanner, ObstacleSchedule};
use geonav::worldmodel::WorldSpec;
use geonav::{Execution, Pose2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub world: WorldSection,
    /// Planner for `plan` and `eval`.
    pub planner: MppiConfig,
    /// Dataset parameters; `dataset.planner` labels the geometric samples.
    pub dataset: DatasetConfig,
    pub eval: EvalSection,
    pub sim: SimSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            world: WorldSection::default(),
            planner: MppiConfig::default(),
            dataset: DatasetConfig::default(),
            eval: EvalSection::default(),
            sim: SimSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSection {
    pub spec: WorldSpec,
    pub seed: u64,
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection {
            spec: WorldSpec::Empty,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Generated worlds when no case file is given.
    pub worlds: usize,
    pub world_spec: WorldSpec,
    /// Seed of the first world; world i uses `world_seed + i`.
    pub world_seed: u64,
    pub cases_per_world: usize,
    pub case_seed: u64,
    /// Footprint used to judge collisions.
    pub footprint: Footprint,
    pub execution: Execution,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            worlds: 200,
            world_spec: WorldSpec::random_obstacles(12),
            world_seed: 0,
            cases_per_world: 1,
            case_seed: 0,
            footprint: Footprint::default(),
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub start: [f64; 3],
    pub follower: FollowerConfig,
    /// Replanning MPPI configuration (seed increments per replan).
    pub replanner: MppiConfig,
    pub schedule: ObstacleSchedule,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            start: [0.0; 3],
            follower: FollowerConfig::default(),
            replanner: MppiReplanner::closed_loop_config(0),
            schedule: ObstacleSchedule::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing config")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlannerName {
    Mppi,
    Straight,
}

impl PlannerName {
    pub fn build(self, cfg: &MppiConfig) -> Box<dyn PathPlanner> {
        match self {
            PlannerName::Mppi => Box::new(MppiPlanner { config: cfg.clone() }),
            PlannerName::Straight => Box::new(StraightLinePlanner::default()),
        }
    }
}

/// `x,y,theta` (theta optional, radians).
pub fn parse_pose(s: &str) -> std::result::Result<Pose2, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(format!("expected x,y[,theta], got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    let pose = Pose2::from_array(v);
    if !pose.is_finite() {
        return Err(format!("non-finite pose '{s}'"));
    }
    Ok(pose)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(toml::from_str::<RunConfig>("").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[planner]\nhorizon = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[sim.follower]\nlook_ahead = 0.5").is_err());
    }

    #[test]
    fn poses_parse() {
        assert_eq!(parse_pose("1,2").unwrap(), Pose2::new(1.0, 2.0, 0.0));
        assert_eq!(parse_pose(" 1, -2 ,0.5").unwrap(), Pose2::new(1.0, -2.0, 0.5));
        assert!(parse_pose("1").is_err());
        assert!(parse_pose("1,x").is_err());
        assert!(parse_pose("1,inf").is_err());
    }
}
