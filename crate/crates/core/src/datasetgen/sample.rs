//! Dataset samples, their JSON Lines records, and the frame/sample filters.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::{Path, Pose2};
use crate::worldmodel::WorldScene;

/// Minimum final displacement of a teleop sample.
pub const MIN_DISPLACEMENT: f64 = 0.25;
/// Minimum fraction of valid elevation cells for geometric samples.
pub const MIN_VALID_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Teleop,
    Geometric,
}

/// Goal and waypoints are robot-centric (frame of the robot at `frame_ref`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frame_ref: String,
    pub scene_ref: String,
    pub source: Source,
    pub goal: Pose2,
    pub waypoints: Path,
    /// Planar distance from the origin to the final waypoint.
    pub displacement: f64,
}

impl Sample {
    pub fn new(frame_ref: String, scene_ref: String, source: Source, goal: Pose2, waypoints: Path) -> Self {
        let displacement = waypoints.last().map_or(0.0, |w| w.norm());
        Sample {
            frame_ref,
            scene_ref,
            source,
            goal,
            waypoints,
            displacement,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.goal.is_finite() && self.waypoints.iter().all(|w| w.is_finite()) && self.displacement.is_finite()
    }

    pub fn to_record(&self) -> SampleRecord {
        SampleRecord {
            frame_ref: self.frame_ref.clone(),
            scene_ref: self.scene_ref.clone(),
            source: self.source,
            goal: self.goal.to_array().map(round_sig),
            waypoints: self.waypoints.iter().map(|w| w.to_array().map(round_sig)).collect(),
            displacement: round_sig(self.displacement),
        }
    }

    pub fn from_record(r: &SampleRecord) -> Sample {
        Sample {
            frame_ref: r.frame_ref.clone(),
            scene_ref: r.scene_ref.clone(),
            source: r.source,
            goal: Pose2::from_array(r.goal),
            waypoints: Path::new(r.waypoints.iter().map(|w| Pose2::from_array(*w)).collect()),
            displacement: r.displacement,
        }
    }
}

/// Rounds to 9 significant digits (the dataset's declared precision).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// On-disk form of a [`Sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub frame_ref: String,
    pub scene_ref: String,
    pub source: Source,
    pub goal: [f64; 3],
    pub waypoints: Vec<[f64; 3]>,
    pub displacement: f64,
}

pub fn write_jsonl<W: Write>(records: &[SampleRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_jsonl(records: &[SampleRecord], path: &FsPath) -> Result<()> {
    let f = File::create(path).map_err(|e| NavError::io(path, e))?;
    write_jsonl(records, BufWriter::new(f)).map_err(|e| NavError::io(path, e))
}

pub fn load_jsonl(path: &FsPath) -> Result<Vec<SampleRecord>> {
    let f = File::open(path).map_err(|e| NavError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| NavError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| NavError::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Teleop segment that barely moves.
    Stationary,
    /// Geometric frame whose elevation map is mostly unknown.
    InvalidElevation,
    /// Planner output touching an obstacle.
    Collided,
    PlannerError,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Stationary => "stationary",
            RejectReason::InvalidElevation => "invalid_elevation",
            RejectReason::Collided => "collided",
            RejectReason::PlannerError => "planner_error",
        }
    }
}

/// Frame-level check for geometric samples.
pub fn frame_is_valid(scene: &WorldScene) -> bool {
    scene.elevation.valid_fraction() >= MIN_VALID_FRACTION
}

pub fn filter_sample(sample: &Sample, scene: &WorldScene) -> std::result::Result<(), RejectReason> {
    match sample.source {
        Source::Teleop if sample.displacement < MIN_DISPLACEMENT => Err(RejectReason::Stationary),
        Source::Geometric if !frame_is_valid(scene) => Err(RejectReason::InvalidElevation),
        _ => Ok(()),
    }
}
