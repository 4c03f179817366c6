//! Goal sampling, planner-labeled samples and dataset assembly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sample::{filter_sample, frame_is_valid, save_jsonl, RejectReason, Sample, SampleRecord, Source};
use super::teleop::{extract_teleop_segment, sample_goal_time, TeleopLog};
use crate::error::{NavError, Result};
use crate::exec::{self, Execution};
use crate::geometry::{compose, path_length, Path, Pose2};
use crate::mppi::{check_collision, plan, Footprint, MppiConfig};
use crate::worldmodel::WorldScene;

pub const TEL_FILE: &str = "tel.jsonl";
pub const GEO_FILE: &str = "geo.jsonl";
pub const AUG_FILE: &str = "aug.jsonl";
pub const STATS_FILE: &str = "stats.json";

/// Robot-centric goal distribution (diagonal Gaussian).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalDistribution {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for GoalDistribution {
    fn default() -> Self {
        GoalDistribution {
            mean: [5.0, 0.0, 0.0],
            std: [2.5, 2.0, std::f64::consts::FRAC_PI_4],
        }
    }
}

/// `k` independent goal draws (heading wrapped).
pub fn sample_goals<R: Rng>(k: usize, dist: &GoalDistribution, rng: &mut R) -> Result<Vec<Pose2>> {
    if k == 0 {
        return Err(NavError::invalid("K must be at least 1"));
    }
    let axes = (0..3)
        .map(|a| Normal::new(dist.mean[a], dist.std[a]).map_err(|e| NavError::invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..k)
        .map(|_| {
            let x = axes[0].sample(rng);
            let y = axes[1].sample(rng);
            let t = axes[2].sample(rng);
            Pose2::new(x, y, t)
        })
        .collect())
}

/// Seed of one frame, independent of processing order.
pub fn frame_seed(global_seed: u64, frame_ref: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(frame_ref.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub seed: u64,
    /// Goals per geometric frame.
    pub goals_per_frame: usize,
    /// Geometric frames per scene; the first is the scene origin, the rest
    /// are random footprint-free poses.
    pub frames_per_scene: usize,
    /// Every n-th log entry becomes a teleop frame.
    pub teleop_stride: usize,
    /// Goal time offset range `(min, max]` after t0, seconds.
    pub goal_time_min: f64,
    pub goal_time_max: f64,
    pub goals: GoalDistribution,
    pub planner: MppiConfig,
    /// Parallelism over frames.
    pub execution: Execution,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            goals_per_frame: 10,
            frames_per_scene: 1,
            teleop_stride: 1,
            goal_time_min: 1.0,
            goal_time_max: 15.0,
            goals: GoalDistribution::default(),
            planner: MppiConfig::default(),
            execution: Execution::Parallel,
        }
    }
}

impl DatasetConfig {
    pub fn horizon_steps(&self) -> usize {
        self.planner.horizon_steps
    }

    /// Duration T of one sample, seconds.
    pub fn horizon_seconds(&self) -> f64 {
        self.planner.horizon_steps as f64 * self.planner.dt
    }

    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        if self.goals_per_frame == 0 || self.teleop_stride == 0 {
            return Err(NavError::invalid(
                "goals_per_frame and teleop_stride must be at least 1",
            ));
        }
        if !(self.goal_time_min > 0.0 && self.goal_time_max > self.goal_time_min) {
            return Err(NavError::invalid("need 0 < goal_time_min < goal_time_max"));
        }
        if self.goals.std.iter().any(|s| !(*s >= 0.0)) || self.goals.mean.iter().any(|m| !m.is_finite()) {
            return Err(NavError::invalid(
                "goal distribution must be finite with non-negative std",
            ));
        }
        Ok(())
    }
}

/// Kept samples of one frame plus rejection counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameOutput {
    pub samples: Vec<Sample>,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl FrameOutput {
    fn reject(&mut self, r: RejectReason) {
        *self.rejected.entry(r).or_default() += 1;
    }

    fn merge(&mut self, other: FrameOutput) {
        self.samples.extend(other.samples);
        for (k, v) in other.rejected {
            *self.rejected.entry(k).or_default() += v;
        }
    }
}

/// Plans `k` sampled goals from `robot_pose` (world frame of the scene) and
/// keeps collision-free results as robot-centric geometric samples. Goals
/// the planner cannot reach are planned best-effort toward the nearest
/// reachable cell; the sampled goal is still recorded.
pub fn generate_geo_samples(
    scene: &WorldScene,
    frame_ref: &str,
    robot_pose: &Pose2,
    k: usize,
    config: &DatasetConfig,
) -> Result<FrameOutput> {
    let mut out = FrameOutput::default();
    if !frame_is_valid(scene) {
        out.rejected.insert(RejectReason::InvalidElevation, k);
        return Ok(out);
    }
    let seed = frame_seed(config.seed, frame_ref);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goals = sample_goals(k, &config.goals, &mut rng)?;
    for (i, goal) in goals.into_iter().enumerate() {
        let planner = MppiConfig {
            seed: seed.wrapping_add(i as u64),
            ..config.planner.clone()
        };
        let world_goal = compose(robot_pose, &goal);
        let result = match plan(scene, robot_pose, &world_goal, &planner) {
            Ok(r) => r,
            Err(_) => {
                out.reject(RejectReason::PlannerError);
                continue;
            }
        };
        if result.collided {
            out.reject(RejectReason::Collided);
            continue;
        }
        let sample = Sample::new(
            frame_ref.to_string(),
            scene.id.clone(),
            Source::Geometric,
            goal,
            result.path.relative_to(robot_pose),
        );
        match filter_sample(&sample, scene) {
            Ok(()) => out.samples.push(sample),
            Err(r) => out.reject(r),
        }
    }
    Ok(out)
}

/// Teleop samples of one log: every `teleop_stride`-th entry with time left
/// after it is a frame with one sampled goal time.
pub fn teleop_samples(log: &TeleopLog, config: &DatasetConfig) -> Result<FrameOutput> {
    let n = config.horizon_steps();
    let horizon = config.horizon_seconds();
    let frames: Vec<_> = log.entries().iter().step_by(config.teleop_stride).collect();
    let per_frame = exec::map(config.execution, &frames, |e| -> Result<FrameOutput> {
        let mut out = FrameOutput::default();
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(config.seed, &e.frame_ref));
        let Some(tg) = sample_goal_time(log, e.timestamp, config.goal_time_min, config.goal_time_max, &mut rng) else {
            return Ok(out);
        };
        let s = extract_teleop_segment(log, e.timestamp, tg, n, horizon)?;
        if s.displacement < super::sample::MIN_DISPLACEMENT {
            out.reject(RejectReason::Stationary);
        } else {
            out.samples.push(s);
        }
        Ok(out)
    });
    let mut all = FrameOutput::default();
    for f in per_frame {
        all.merge(f?);
    }
    Ok(all)
}

/// Geometric frames of a scene: the origin plus random footprint-free poses.
pub fn geo_frames(scene: &WorldScene, count: usize, seed: u64, footprint: &Footprint) -> Vec<(String, Pose2)> {
    let mut frames = Vec::with_capacity(count);
    if count == 0 {
        return frames;
    }
    frames.push((format!("{}/f000", scene.id), Pose2::IDENTITY));
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, &scene.id));
    let g = &scene.obstacles;
    let (w, h) = (g.width() as f64 * g.resolution(), g.height() as f64 * g.resolution());
    let mut attempts = 0;
    while frames.len() < count && attempts < 1000 * count {
        attempts += 1;
        let local = Pose2::new(
            rng.random_range(0.0..w),
            rng.random_range(0.0..h),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let pose = compose(&g.origin(), &local);
        if !check_collision(&Path::new(vec![pose]), g, footprint) {
            frames.push((format!("{}/f{:03}", scene.id, frames.len()), pose));
        }
    }
    frames
}

/// Table III-style numbers of one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sample_count: usize,
    pub total_length_m: f64,
    pub total_time_h: f64,
    pub avg_velocity_mps: f64,
}

impl DatasetStats {
    /// Stats of records as written (rounded values).
    pub fn of(records: &[SampleRecord], horizon_seconds: f64) -> Self {
        let total_length_m: f64 = records
            .iter()
            .map(|r| path_length(&Pose2::IDENTITY, &Sample::from_record(r).waypoints))
            .sum();
        let n = records.len();
        let total_time_h = n as f64 * horizon_seconds / 3600.0;
        DatasetStats {
            sample_count: n,
            total_length_m,
            total_time_h,
            avg_velocity_mps: if n > 0 {
                total_length_m / (total_time_h * 3600.0)
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub tel: DatasetStats,
    pub geo: DatasetStats,
    pub aug: DatasetStats,
    /// Rejected sample counts by reason, per source.
    pub rejected_tel: BTreeMap<String, usize>,
    pub rejected_geo: BTreeMap<String, usize>,
}

impl DatasetReport {
    /// Table III column order: dataset, samples, length, time, velocity.
    pub fn format_table(&self) -> String {
        let mut s = format!(
            "{:<8}  {:>9}  {:>11}  {:>9}  {:>16}\n",
            "Dataset", "#Samples", "Length [m]", "Time [h]", "Avg. vel. [m/s]"
        );
        for (name, st) in [("D_TEL", &self.tel), ("D_GEO", &self.geo), ("D_AUG", &self.aug)] {
            s += &format!(
                "{:<8}  {:>9}  {:>11.1}  {:>9.4}  {:>16.2}\n",
                name, st.sample_count, st.total_length_m, st.total_time_h, st.avg_velocity_mps
            );
        }
        s
    }

    /// Reject reasons and counts, one `source/reason count` line each.
    pub fn format_rejections(&self) -> String {
        let lines = self.rejected_tel.iter().map(|(k, v)| format!("tel/{k} {v}\n"));
        lines
            .chain(self.rejected_geo.iter().map(|(k, v)| format!("geo/{k} {v}\n")))
            .collect()
    }
}

/// In-memory dataset: records in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tel: Vec<SampleRecord>,
    pub geo: Vec<SampleRecord>,
    pub report: DatasetReport,
}

impl Dataset {
    pub fn aug(&self) -> Vec<SampleRecord> {
        self.tel.iter().chain(&self.geo).cloned().collect()
    }

    /// Writes tel/geo/aug JSON Lines and the stats report into `dir`.
    pub fn write(&self, dir: &FsPath) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| NavError::io(dir, e))?;
        save_jsonl(&self.tel, &dir.join(TEL_FILE))?;
        save_jsonl(&self.geo, &dir.join(GEO_FILE))?;
        save_jsonl(&self.aug(), &dir.join(AUG_FILE))?;
        let path = dir.join(STATS_FILE);
        let text = serde_json::to_string_pretty(&self.report).expect("report serializes");
        fs::write(&path, text + "\n").map_err(|e| NavError::io(path, e))
    }
}

fn names(m: BTreeMap<RejectReason, usize>) -> BTreeMap<String, usize> {
    m.into_iter().map(|(k, v)| (k.as_str().to_string(), v)).collect()
}

/// D_TEL from the logs, D_GEO from the scenes, D_AUG = D_TEL ∪ D_GEO.
pub fn build_dataset(logs: &[TeleopLog], scenes: &[WorldScene], config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    if logs.is_empty() && scenes.is_empty() {
        return Err(NavError::invalid("dataset needs at least one teleop log or scene"));
    }
    let mut tel = FrameOutput::default();
    for log in logs {
        tel.merge(teleop_samples(log, config)?);
    }

    let frames: Vec<(usize, String, Pose2)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            geo_frames(s, config.frames_per_scene, config.seed, &config.planner.footprint)
                .into_iter()
                .map(move |(r, p)| (i, r, p))
        })
        .collect();
    // frames fan out; each plan then runs its population sequentially
    let planner_mode = if config.execution.is_parallel() {
        Execution::Sequential
    } else {
        config.planner.execution
    };
    let inner = DatasetConfig {
        planner: MppiConfig {
            execution: planner_mode,
            ..config.planner.clone()
        },
        ..config.clone()
    };
    let per_frame = exec::map(config.execution, &frames, |(i, r, p)| {
        generate_geo_samples(&scenes[*i], r, p, config.goals_per_frame, &inner)
    });
    let mut geo = FrameOutput::default();
    for f in per_frame {
        geo.merge(f?);
    }

    let tel_records: Vec<SampleRecord> = tel.samples.iter().map(Sample::to_record).collect();
    let geo_records: Vec<SampleRecord> = geo.samples.iter().map(Sample::to_record).collect();
    let h = config.horizon_seconds();
    let aug: Vec<SampleRecord> = tel_records.iter().chain(&geo_records).cloned().collect();
    let report = DatasetReport {
        tel: DatasetStats::of(&tel_records, h),
        geo: DatasetStats::of(&geo_records, h),
        aug: DatasetStats::of(&aug, h),
        rejected_tel: names(tel.rejected),
        rejected_geo: names(geo.rejected),
    };
    Ok(Dataset {
        tel: tel_records,
        geo: geo_records,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasetgen::sample::load_jsonl;
    use crate::datasetgen::teleop::synthetic_teleop_log;
    use crate::geometry::Twist2;
    use crate::worldmodel::{generate_world, WorldSpec};

    fn fast_config() -> DatasetConfig {
        DatasetConfig {
            goals_per_frame: 4,
            teleop_stride: 10,
            planner: MppiConfig {
                population_size: 64,
                iterations: 4,
                ..MppiConfig::default()
            },
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn goals_count_and_determinism() {
        let d = GoalDistribution::default();
        let a = sample_goals(10, &d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_goals(10, &d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        assert!(sample_goals(0, &d, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn goal_mean_close() {
        let goals = sample_goals(10_000, &GoalDistribution::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let n = goals.len() as f64;
        let mx = goals.iter().map(|g| g.x).sum::<f64>() / n;
        let my = goals.iter().map(|g| g.y).sum::<f64>() / n;
        let mt = goals.iter().map(|g| g.theta).sum::<f64>() / n;
        assert!(
            (mx - 5.0).abs() < 0.1 && my.abs() < 0.1 && mt.abs() < 0.1,
            "{mx} {my} {mt}"
        );
    }

    #[test]
    fn frame_seeds_differ() {
        assert_ne!(frame_seed(0, "a"), frame_seed(0, "b"));
        assert_ne!(frame_seed(0, "a"), frame_seed(1, "a"));
        assert_eq!(frame_seed(5, "x/1"), frame_seed(5, "x/1"));
    }

    #[test]
    fn geo_samples_on_empty_scene() {
        let scene = generate_world(&WorldSpec::Empty, 0).unwrap();
        let cfg = DatasetConfig {
            goals_per_frame: 10,
            ..fast_config()
        };
        let out = generate_geo_samples(&scene, "empty/f000", &Pose2::IDENTITY, 10, &cfg).unwrap();
        assert_eq!(out.samples.len() + out.rejected.values().sum::<usize>(), 10);
        assert_eq!(out.samples.len(), 10, "{:?}", out.rejected);
        for s in &out.samples {
            assert_eq!(s.waypoints.len(), 50);
            assert_eq!(s.source, Source::Geometric);
            assert!(s.is_finite());
        }
    }

    #[test]
    fn geo_samples_skip_invalid_frames() {
        let mut scene = generate_world(&WorldSpec::Empty, 0).unwrap();
        let cells: Vec<_> = scene.elevation.cells().collect();
        for c in &cells[..(cells.len() * 4 / 5)] {
            scene.elevation.set_valid(*c, false);
        }
        let out = generate_geo_samples(&scene, "f", &Pose2::IDENTITY, 10, &fast_config()).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.rejected[&RejectReason::InvalidElevation], 10);
    }

    #[test]
    fn geo_samples_from_offset_pose_are_robot_centric() {
        let scene = generate_world(&WorldSpec::Empty, 0).unwrap();
        let robot = Pose2::new(-1.0, 0.5, 0.8);
        let out = generate_geo_samples(&scene, "f", &robot, 3, &fast_config()).unwrap();
        let goals = sample_goals(
            3,
            &GoalDistribution::default(),
            &mut ChaCha8Rng::seed_from_u64(frame_seed(0, "f")),
        )
        .unwrap();
        for s in &out.samples {
            assert!(goals.contains(&s.goal));
            // first waypoint is one step from the robot
            assert!(s.waypoints.waypoints[0].norm() <= 0.1 * 1.0f64.hypot(0.5) + 1e-9);
        }
    }

    #[test]
    fn build_and_write() {
        let dir = tempfile::tempdir().unwrap();
        let logs = vec![synthetic_teleop_log("log-a", 40.0, 10.0, 1).unwrap()];
        let scenes = vec![generate_world(&WorldSpec::random_obstacles(6), 2).unwrap()];
        let cfg = fast_config();
        let ds = build_dataset(&logs, &scenes, &cfg).unwrap();
        ds.write(dir.path()).unwrap();
        let tel = load_jsonl(&dir.path().join(TEL_FILE)).unwrap();
        let geo = load_jsonl(&dir.path().join(GEO_FILE)).unwrap();
        let aug = load_jsonl(&dir.path().join(AUG_FILE)).unwrap();
        assert_eq!(tel, ds.tel);
        assert_eq!(aug.len(), tel.len() + geo.len());
        assert!(!tel.is_empty() && !geo.is_empty());
        let r = &ds.report;
        assert_eq!(r.aug.sample_count, r.tel.sample_count + r.geo.sample_count);
        assert!((r.aug.total_time_h - aug.len() as f64 * 5.0 / 3600.0).abs() < 1e-12);
        assert_eq!(DatasetStats::of(&aug, 5.0), r.aug);
        for rec in &tel {
            assert!(rec.displacement >= 0.25);
            assert_eq!(rec.waypoints.len(), 50);
        }

        let seq = build_dataset(
            &logs,
            &scenes,
            &DatasetConfig {
                execution: Execution::Sequential,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(seq, ds);
    }

    #[test]
    fn straight_log_stats() {
        let log =
            crate::datasetgen::teleop::constant_velocity_log("s", Twist2::new(1.0, 0.0, 0.0), 60.0, 10.0).unwrap();
        let cfg = DatasetConfig {
            teleop_stride: 5,
            ..fast_config()
        };
        let ds = build_dataset(&[log], &[], &cfg).unwrap();
        // full-horizon samples average 1 m/s; warped ones are shorter
        assert!(ds.report.tel.avg_velocity_mps <= 1.0 + 1e-6);
        assert!(ds.report.tel.avg_velocity_mps > 0.5);
        assert!(ds.geo.is_empty());
    }
}
