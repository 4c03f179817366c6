//! Teleoperation logs: CSV I/O, pose interpolation and time-warped segments.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::{Sample, Source};
use crate::error::{NavError, Result};
use crate::geometry::{relative_to, step, wrap_angle, Path, Pose2, Twist2};

/// One recorded robot pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub frame_ref: String,
    pub scene_ref: String,
}

impl LogEntry {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

/// Time-ordered world-frame poses with frame and scene ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleopLog {
    entries: Vec<LogEntry>,
}

impl TeleopLog {
    /// Requires ≥ 2 entries, strictly increasing timestamps, finite values.
    pub fn new(entries: Vec<LogEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(NavError::invalid(format!(
                "teleop log needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if ![e.timestamp, e.x, e.y, e.theta].iter().all(|v| v.is_finite()) {
                return Err(NavError::invalid(format!("entry {i} has non-finite values")));
            }
        }
        if let Some(i) = entries.windows(2).position(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(NavError::invalid(format!(
                "timestamps not strictly increasing at entry {}",
                i + 1
            )));
        }
        Ok(TeleopLog { entries })
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn start_time(&self) -> f64 {
        self.entries[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.entries[self.entries.len() - 1].timestamp
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= self.start_time() && t <= self.end_time() {
            Ok(())
        } else {
            Err(NavError::invalid(format!(
                "time {t} outside log range [{}, {}]",
                self.start_time(),
                self.end_time()
            )))
        }
    }

    /// Index of the last entry with timestamp ≤ t.
    fn entry_at(&self, t: f64) -> usize {
        self.entries.partition_point(|e| e.timestamp <= t).saturating_sub(1)
    }

    /// Interpolated pose: linear in position, shortest arc in heading.
    /// Exact at recorded timestamps.
    pub fn pose_at(&self, t: f64) -> Result<Pose2> {
        self.check_time(t)?;
        let i = self.entry_at(t);
        let a = &self.entries[i];
        if t == a.timestamp || i + 1 == self.entries.len() {
            return Ok(a.pose());
        }
        let b = &self.entries[i + 1];
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        let pa = a.pose();
        let pb = b.pose();
        Ok(Pose2::new(
            pa.x + s * (pb.x - pa.x),
            pa.y + s * (pb.y - pa.y),
            pa.theta + s * wrap_angle(pb.theta - pa.theta),
        ))
    }

    pub fn read_csv_from<R: Read>(reader: R, source: &FsPath) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| NavError::format(source, e.to_string()))?
            .clone();
        let expected = ["timestamp", "x", "y", "theta", "frame_ref", "scene_ref"];
        if headers.iter().ne(expected) {
            return Err(NavError::format(
                source,
                format!(
                    "expected header {}, found {}",
                    expected.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let entries = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| NavError::format(source, format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<LogEntry>>>()?;
        TeleopLog::new(entries).map_err(|e| NavError::format(source, e.to_string()))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e).map_err(|e| NavError::invalid(e.to_string()))?;
        }
        w.flush().map_err(|e| NavError::io("<teleop csv>", e))
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let f = File::open(path).map_err(|e| NavError::io(path, e))?;
        Self::read_csv_from(f, path)
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        let f = File::create(path).map_err(|e| NavError::io(path, e))?;
        self.write_csv_to(f).map_err(|e| match e {
            NavError::Io { source, .. } => NavError::io(path, source),
            other => other,
        })
    }
}

/// Cuts one sample out of a log. Waypoints are `n` poses uniformly spaced
/// over `[t0, t0 + min(horizon, tg − t0)]` in the `t0` frame; when the goal
/// lies within the horizon the segment is stretched so the last waypoint is
/// the goal.
pub fn extract_teleop_segment(log: &TeleopLog, t0: f64, tg: f64, n: usize, horizon: f64) -> Result<Sample> {
    if n == 0 || !(horizon > 0.0) {
        return Err(NavError::invalid("segment needs n ≥ 1 and a positive horizon"));
    }
    if !(t0 < tg) {
        return Err(NavError::invalid(format!("t0 ({t0}) must precede tg ({tg})")));
    }
    log.check_time(t0)?;
    log.check_time(tg)?;
    let origin = log.pose_at(t0)?;
    let goal_world = log.pose_at(tg)?;
    let warped = tg - t0 <= horizon;
    let span = if warped { tg - t0 } else { horizon };
    let waypoints = (1..=n)
        .map(|i| {
            let t = if warped && i == n {
                tg
            } else {
                t0 + span * i as f64 / n as f64
            };
            log.pose_at(t).map(|p| relative_to(&origin, &p))
        })
        .collect::<Result<Vec<_>>>()?;
    let frame = &log.entries[log.entry_at(t0)];
    Ok(Sample::new(
        frame.frame_ref.clone(),
        frame.scene_ref.clone(),
        Source::Teleop,
        relative_to(&origin, &goal_world),
        Path::new(waypoints),
    ))
}

/// Goal time uniform over `(t0 + min, t0 + max]`, clipped to the log end;
/// `None` when nothing later than `t0 + min` is left in the log.
pub fn sample_goal_time<R: Rng>(log: &TeleopLog, t0: f64, min: f64, max: f64, rng: &mut R) -> Option<f64> {
    let lo = t0 + min;
    let hi = (t0 + max).min(log.end_time());
    if !(hi > lo) {
        return None;
    }
    let u: f64 = rng.random();
    Some(hi - u * (hi - lo))
}

/// Log of a constant body-frame command from the origin, sampled at `rate` Hz.
pub fn constant_velocity_log(scene_ref: &str, cmd: Twist2, duration: f64, rate: f64) -> Result<TeleopLog> {
    if !(duration > 0.0 && rate > 0.0) {
        return Err(NavError::invalid("duration and rate must be positive"));
    }
    let steps = (duration * rate).round() as usize;
    let dt = 1.0 / rate;
    let mut pose = Pose2::IDENTITY;
    let mut entries = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        entries.push(LogEntry {
            timestamp: i as f64 * dt,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            frame_ref: format!("{scene_ref}/{i:06}"),
            scene_ref: scene_ref.to_string(),
        });
        pose = step(&pose, &cmd, dt);
    }
    TeleopLog::new(entries)
}

/// A smooth synthetic drive: piecewise-constant commands held for 1–3 s,
/// occasionally standing still, sampled at `rate` Hz.
pub fn synthetic_teleop_log(scene_ref: &str, duration: f64, rate: f64, seed: u64) -> Result<TeleopLog> {
    if !(duration > 0.0 && rate > 0.0) {
        return Err(NavError::invalid("duration and rate must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / rate;
    let steps = (duration * rate).round() as usize;
    let mut pose = Pose2::IDENTITY;
    let mut cmd = Twist2::ZERO;
    let mut hold = 0usize;
    let mut entries = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        entries.push(LogEntry {
            timestamp: i as f64 * dt,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            frame_ref: format!("{scene_ref}/{i:06}"),
            scene_ref: scene_ref.to_string(),
        });
        if hold == 0 {
            cmd = if rng.random_bool(0.15) {
                Twist2::ZERO
            } else {
                Twist2::new(
                    rng.random_range(0.3..1.0),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.6..0.6),
                )
            };
            hold = (rng.random_range(1.0..3.0) * rate) as usize;
        }
        hold = hold.saturating_sub(1);
        pose = step(&pose, &cmd, dt);
    }
    TeleopLog::new(entries)
}
