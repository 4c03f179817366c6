//! Closed-loop execution: a lookahead path follower at the control rate,
//! periodic replanning, and scheduled obstacle changes.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::eval::{straight_line_baseline, EvalCase, EvalOutcome, SUCCESS_RADIUS};
use crate::geodesic::{compute_gdf, DistanceField};
use crate::geometry::{
    heading_error, path_length, relative_to, step, CommandSequence, Path, Pose2, Twist2, VelocityLimits,
};
use crate::mppi::{plan_warm, Footprint, MppiConfig, RowPrefix};
use crate::worldmodel::{GridMap2D, Region, WorldScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FollowerConfig {
    pub lookahead: f64,
    pub control_dt: f64,
    pub replan_period: f64,
    pub max_sim_time: f64,
    pub limits: VelocityLimits,
    /// Per-axis std of additive command noise (vx, vy, ω); zero disables it.
    pub actuation_noise: [f64; 3],
    pub noise_seed: u64,
    /// Body used for collision checks while driving (no safety margin).
    pub body: Footprint,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig {
            lookahead: 0.6,
            control_dt: 1.0 / 30.0,
            replan_period: 1.0 / 6.0,
            max_sim_time: 30.0,
            limits: VelocityLimits::default(),
            actuation_noise: [0.0; 3],
            noise_seed: 0,
            body: Footprint::default().body(),
        }
    }
}

impl FollowerConfig {
    pub fn validate(&self, resolution: f64) -> Result<()> {
        let positive = [self.lookahead, self.control_dt, self.replan_period, self.max_sim_time];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(NavError::invalid("follower lookahead and periods must be positive"));
        }
        if self.lookahead < 2.0 * resolution {
            return Err(NavError::invalid(format!(
                "lookahead {} is below two cells ({})",
                self.lookahead,
                2.0 * resolution
            )));
        }
        if self.actuation_noise.iter().any(|s| !(*s >= 0.0)) {
            return Err(NavError::invalid("actuation noise must be non-negative"));
        }
        self.limits.validate()?;
        self.body.validate()
    }
}

/// Drive toward the first waypoint at least `lookahead` away (searching
/// forward from the nearest one), else the last. Translation is scaled
/// jointly so the direction survives the limits; ω is clamped.
pub fn follower_step(robot: &Pose2, path: &Path, cfg: &FollowerConfig) -> Twist2 {
    let w = &path.waypoints;
    if w.is_empty() {
        return Twist2::ZERO;
    }
    let nearest = (0..w.len())
        .min_by(|&a, &b| robot.distance(&w[a]).total_cmp(&robot.distance(&w[b])))
        .expect("non-empty");
    let target = w[nearest..]
        .iter()
        .find(|p| robot.distance(p) >= cfg.lookahead)
        .unwrap_or(&w[w.len() - 1]);
    let rel = relative_to(robot, target);
    let dt = cfg.control_dt;
    let (vx, vy) = (rel.x / dt, rel.y / dt);
    let l = &cfg.limits;
    let scale = (vx.abs() / l.vx_max).max(vy.abs() / l.vy_max).max(1.0);
    Twist2::new(
        vx / scale,
        vy / scale,
        (rel.theta / dt).clamp(-l.omega_max, l.omega_max),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEvent {
    pub time: f64,
    pub region: Region,
    pub action: ObstacleAction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleSchedule {
    pub events: Vec<ObstacleEvent>,
}

impl ObstacleSchedule {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self.events.iter().find(|e| !(e.time >= 0.0 && e.time <= horizon)) {
            Some(e) => Err(NavError::invalid(format!(
                "event at t = {} outside the sim horizon [0, {horizon}]",
                e.time
            ))),
            None => Ok(()),
        }
    }

    /// A wall across the x axis appearing at `time`.
    pub fn wall(time: f64, x: f64, thickness: f64, half_span: f64) -> Self {
        ObstacleSchedule {
            events: vec![ObstacleEvent {
                time,
                region: Region::new(x - thickness / 2.0, -half_span, x + thickness / 2.0, half_span),
                action: ObstacleAction::Add,
            }],
        }
    }
}

/// Planning safety margin used by [`MppiReplanner::closed_loop_config`].
pub const CLOSED_LOOP_MARGIN: f64 = 0.2;

/// Source of paths during a run.
pub trait Replanner {
    fn replan(&mut self, scene: &WorldScene, robot: &Pose2, goal: &Pose2, time: f64) -> Result<Path>;
}

impl<F> Replanner for F
where
    F: FnMut(&WorldScene, &Pose2, &Pose2, f64) -> Result<Path>,
{
    fn replan(&mut self, scene: &WorldScene, robot: &Pose2, goal: &Pose2, time: f64) -> Result<Path> {
        self(scene, robot, goal, time)
    }
}

/// MPPI warm-started from the previous solution shifted by the elapsed time.
#[derive(Debug, Clone)]
pub struct MppiReplanner {
    pub config: MppiConfig,
    previous: Option<(CommandSequence, f64)>,
    /// Plans made so far.
    pub plans: usize,
    /// Plans whose best-cost history increased somewhere (should stay 0).
    pub monotone_violations: usize,
}

impl MppiReplanner {
    pub fn new(config: MppiConfig) -> Self {
        MppiReplanner {
            config,
            previous: None,
            plans: 0,
            monotone_violations: 0,
        }
    }

    /// Lighter than the open-loop default: the warm start carries most of
    /// the solution between 6 Hz replans. The wider margin absorbs the
    /// follower cutting corners toward its lookahead point.
    pub fn closed_loop_config(seed: u64) -> MppiConfig {
        MppiConfig {
            population_size: 256,
            iterations: 6,
            seed,
            footprint: Footprint {
                safety_margin: CLOSED_LOOP_MARGIN,
                ..Footprint::default()
            },
            ..MppiConfig::default()
        }
    }
}

impl Replanner for MppiReplanner {
    fn replan(&mut self, scene: &WorldScene, robot: &Pose2, goal: &Pose2, time: f64) -> Result<Path> {
        let warm = self.previous.as_ref().map(|(cmds, t)| {
            let shift = ((time - t) / cmds.dt).round().max(0.0) as usize;
            let mut c: Vec<Twist2> = cmds.commands.iter().skip(shift).copied().collect();
            c.resize(cmds.len(), Twist2::ZERO);
            CommandSequence {
                commands: c,
                dt: cmds.dt,
            }
        });
        let cfg = MppiConfig {
            seed: self.config.seed.wrapping_add(self.plans as u64),
            ..self.config.clone()
        };
        self.plans += 1;
        let r = plan_warm(scene, robot, goal, &cfg, warm.as_ref())?;
        if r.best_cost_history.windows(2).any(|w| w[1] > w[0]) {
            self.monotone_violations += 1;
        }
        self.previous = Some((r.commands, time));
        Ok(r.path)
    }
}

/// Re-aims a straight line at the goal every replan.
#[derive(Debug, Clone, Default)]
pub struct StraightLineReplanner;

impl Replanner for StraightLineReplanner {
    fn replan(&mut self, _scene: &WorldScene, robot: &Pose2, goal: &Pose2, _time: f64) -> Result<Path> {
        Ok(straight_line_baseline(robot, goal, 50))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Reached,
    Collided,
    Timeout,
}

impl Termination {
    /// Process exit code of the CLI `sim` command.
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::Reached => 0,
            Termination::Collided => 2,
            Termination::Timeout => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl TracePoint {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.theta)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub robot: Pose2,
    pub active_path: Path,
    pub scene: WorldScene,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub state: SimState,
    pub termination: Termination,
    pub outcome: EvalOutcome,
    pub replans: usize,
    pub planner_failures: usize,
    /// Simulation times at which schedule events took effect.
    pub applied_events: Vec<f64>,
}

/// Collision and goal-distance lookups for one version of the scene.
struct SceneView {
    prefix: RowPrefix,
    field: Option<DistanceField>,
}

impl SceneView {
    fn new(scene: &WorldScene, goal: &Pose2) -> Self {
        SceneView {
            prefix: RowPrefix::new(&scene.obstacles),
            field: compute_gdf(&scene.obstacles, goal).ok(),
        }
    }

    fn collides(&self, grid: &GridMap2D, body: &Footprint, pose: &Pose2) -> bool {
        let mut hit = false;
        body.for_each_span(grid, pose, |row, lo, hi| {
            let (sum, out) = self.prefix.span(row, lo, hi);
            hit |= sum > 0.0 || out > 0;
        });
        hit
    }

    fn gd(&self, pose: &Pose2) -> f64 {
        self.field.as_ref().map_or(f64::INFINITY, |f| f.query(pose))
    }
}

/// Drives from `start` to `goal`, replanning every `replan_period` on the
/// current scene. Ends when the geodesic distance to the goal is within
/// 1 m (reached), the body touches an obstacle (collided), or time runs out.
pub fn run_closed_loop(
    scene: &WorldScene,
    start: &Pose2,
    goal: &Pose2,
    planner: &mut dyn Replanner,
    cfg: &FollowerConfig,
    schedule: &ObstacleSchedule,
) -> Result<SimRun> {
    cfg.validate(scene.obstacles.resolution())?;
    schedule.validate(cfg.max_sim_time)?;
    let mut events = schedule.events.clone();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_event = 0;

    let mut noise = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
    let noise_axes: Vec<Option<Normal<f64>>> = cfg
        .actuation_noise
        .iter()
        .map(|&s| (s > 0.0).then(|| Normal::new(0.0, s).expect("finite std")))
        .collect();

    let mut state = SimState {
        time: 0.0,
        robot: *start,
        active_path: Path::default(),
        scene: scene.clone(),
        trace: vec![TracePoint {
            time: 0.0,
            x: start.x,
            y: start.y,
            theta: start.theta,
        }],
    };
    let mut view = SceneView::new(&state.scene, goal);
    let initial_distance = view.gd(start);
    let mut applied_events = Vec::new();
    let (mut replans, mut planner_failures) = (0usize, 0usize);
    let mut k = 0u64;

    let termination = loop {
        let t = k as f64 * cfg.control_dt;
        state.time = t;
        let mut changed = false;
        while next_event < events.len() && events[next_event].time <= t + 1e-9 {
            let e = &events[next_event];
            state.scene = state.scene.with_region(&e.region, e.action == ObstacleAction::Add)?;
            applied_events.push(t);
            next_event += 1;
            changed = true;
        }
        if changed {
            view = SceneView::new(&state.scene, goal);
        }
        if view.collides(&state.scene.obstacles, &cfg.body, &state.robot) {
            break Termination::Collided;
        }
        if view.gd(&state.robot) <= SUCCESS_RADIUS {
            break Termination::Reached;
        }
        if t >= cfg.max_sim_time - 1e-9 {
            break Termination::Timeout;
        }
        if t + 1e-9 >= replans as f64 * cfg.replan_period {
            replans += 1;
            match planner.replan(&state.scene, &state.robot, goal, t) {
                Ok(p) => state.active_path = p,
                Err(_) => {
                    planner_failures += 1;
                    state.active_path = Path::default();
                }
            }
        }
        let mut cmd = follower_step(&state.robot, &state.active_path, cfg);
        if noise_axes.iter().any(Option::is_some) {
            let mut d = [0.0; 3];
            for (v, n) in d.iter_mut().zip(&noise_axes) {
                if let Some(n) = n {
                    *v = n.sample(&mut noise);
                }
            }
            cmd = Twist2::new(cmd.vx + d[0], cmd.vy + d[1], cmd.omega + d[2]).clamped(&cfg.limits);
        }
        state.robot = step(&state.robot, &cmd, cfg.control_dt);
        k += 1;
        let p = state.robot;
        state.trace.push(TracePoint {
            time: k as f64 * cfg.control_dt,
            x: p.x,
            y: p.y,
            theta: p.theta,
        });
    };

    let driven = Path::new(state.trace[1..].iter().map(TracePoint::pose).collect());
    let final_gd = view.gd(&state.robot);
    let collided = termination == Termination::Collided;
    let outcome = EvalOutcome {
        case: EvalCase {
            scene_ref: scene.id.clone(),
            start: *start,
            goal: *goal,
            geodesic_start_distance: initial_distance,
        },
        executed_length: path_length(start, &driven),
        path: driven,
        collided,
        final_gd,
        success: termination == Termination::Reached,
        final_heading_error: heading_error(goal.theta, state.robot.theta),
        error: None,
    };
    Ok(SimRun {
        state,
        termination,
        outcome,
        replans,
        planner_failures,
        applied_events,
    })
}

/// Smallest distance from the robot center to an obstacle cell along the
/// trace (cell center minus half a cell), minus `half_width`.
pub fn min_clearance(trace: &[TracePoint], obstacles: &GridMap2D, half_width: f64) -> f64 {
    let cells: Vec<(f64, f64)> = obstacles
        .cells()
        .filter(|&c| obstacles.get(c) > 0.0)
        .map(|c| obstacles.cell_center(c))
        .collect();
    trace
        .iter()
        .map(|p| {
            cells
                .iter()
                .map(|&(x, y)| (x - p.x).hypot(y - p.y))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
        - obstacles.resolution() / 2.0
        - half_width
}

pub fn write_trace_csv<W: Write>(trace: &[TracePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in trace {
        w.serialize(p).map_err(|e| NavError::invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| NavError::io("<trace csv>", e))
}

pub fn read_trace_csv<R: Read>(reader: R, source: &FsPath) -> Result<Vec<TracePoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let trace = rdr
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| NavError::format(source, format!("row {}: {e}", i + 1))))
        .collect::<Result<Vec<TracePoint>>>()?;
    if trace.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(NavError::format(source, "trace times not strictly increasing"));
    }
    Ok(trace)
}

pub fn save_trace(trace: &[TracePoint], path: &FsPath) -> Result<()> {
    let f = File::create(path).map_err(|e| NavError::io(path, e))?;
    write_trace_csv(trace, f)
}

pub fn load_trace(path: &FsPath) -> Result<Vec<TracePoint>> {
    let f = File::open(path).map_err(|e| NavError::io(path, e))?;
    read_trace_csv(f, path)
}

/// Trace drawn over the obstacle grid, one character per `cell`-sized block:
/// `#` obstacle, `o` trace, `S` start, `G` goal, `.` free.
pub fn render_ascii(obstacles: &GridMap2D, trace: &[TracePoint], goal: &Pose2, cell: usize) -> String {
    let cell = cell.max(1);
    let (w, h) = (obstacles.width().div_ceil(cell), obstacles.height().div_ceil(cell));
    let mut canvas = vec![vec!['.'; w]; h];
    for c in obstacles.cells() {
        if obstacles.get(c) > 0.0 {
            canvas[c.row / cell][c.col / cell] = '#';
        }
    }
    let mut mark = |p: &Pose2, ch: char| {
        if let Some(c) = obstacles.world_to_cell(p) {
            canvas[c.row / cell][c.col / cell] = ch;
        }
    };
    for p in trace {
        mark(&p.pose(), 'o');
    }
    if let Some(s) = trace.first() {
        mark(&s.pose(), 'S');
    }
    mark(goal, 'G');
    canvas
        .iter()
        .rev()
        .map(|r| r.iter().collect::<String>() + "\n")
        .collect()
}
