use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cost::{CostBreakdown, CostContext};
use super::footprint::{Footprint, FootprintQuery};
use crate::error::{NavError, Result};
use crate::exec::{self, Execution};
use crate::geodesic::{compute_gdf, compute_gdf_to_cell, nearest_reachable_cell, DistanceField};
use crate::geometry::{rollout, wrap_angle, CommandSequence, Path, Pose2, Twist2, VelocityLimits};
use crate::worldmodel::{GridMap2D, WorldScene};

/// Per-axis standard deviation of the sampling noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseStd {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl NoiseStd {
    fn axis(&self, k: usize) -> f64 {
        [self.vx, self.vy, self.omega][k]
    }
}

impl Default for NoiseStd {
    fn default() -> Self {
        NoiseStd {
            vx: 0.4,
            vy: 0.25,
            omega: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    pub population_size: usize,
    pub iterations: usize,
    /// Softmax temperature λ.
    pub temperature: f64,
    pub noise_std: NoiseStd,
    /// Step-to-step correlation of the perturbations (AR(1) coefficient in
    /// [0, 1)); the marginal per-step std stays `noise_std`.
    pub noise_correlation: f64,
    /// Members 1..=k are the mean brought to rest from step `i·N/(k+1)`
    /// onwards; 0 disables them.
    pub braking_members: usize,
    /// Fraction of the noisy members whose heading is re-steered toward the
    /// goal heading while keeping their world-frame translation.
    pub aligned_fraction: f64,
    pub w_trav: f64,
    pub w_goal: f64,
    pub w_effort: f64,
    pub w_lin: f64,
    pub w_lat: f64,
    pub w_ang: f64,
    /// Heading alignment is charged for waypoints within this geodesic distance.
    pub goal_align_radius: f64,
    pub limits: VelocityLimits,
    pub footprint: Footprint,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            horizon_steps: 50,
            dt: 0.1,
            population_size: 1024,
            iterations: 24,
            temperature: 0.1,
            noise_std: NoiseStd::default(),
            noise_correlation: 0.9,
            braking_members: 9,
            aligned_fraction: 0.5,
            w_trav: 1.0,
            w_goal: 1.0,
            w_effort: 0.05,
            w_lin: 1.0,
            w_lat: 2.0,
            w_ang: 0.5,
            goal_align_radius: 1.0,
            limits: VelocityLimits::default(),
            footprint: Footprint::default(),
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            self.w_trav,
            self.w_goal,
            self.w_effort,
            self.w_lin,
            self.w_lat,
            self.w_ang,
        ];
        if self.horizon_steps < 1 {
            return Err(NavError::invalid("horizon_steps must be at least 1"));
        }
        if self.population_size < 2 {
            return Err(NavError::invalid("population_size must be at least 2"));
        }
        if !(self.temperature > 0.0) {
            return Err(NavError::invalid("temperature must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(NavError::invalid("dt must be positive"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(NavError::invalid("cost weights must be non-negative"));
        }
        let n = self.noise_std;
        if !(n.vx >= 0.0 && n.vy >= 0.0 && n.omega >= 0.0) {
            return Err(NavError::invalid("noise std must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.aligned_fraction) {
            return Err(NavError::invalid("aligned_fraction must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err(NavError::invalid("noise_correlation must be in [0, 1)"));
        }
        if !(self.goal_align_radius >= 0.0) {
            return Err(NavError::invalid("goal_align_radius must be non-negative"));
        }
        self.limits.validate()?;
        self.footprint.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub path: Path,
    pub commands: CommandSequence,
    pub cost: CostBreakdown,
    pub collided: bool,
    /// Geodesic distance of the final waypoint on the field used for planning.
    pub final_geodesic_distance: f64,
    /// Geodesic distance of the start on the same field.
    pub initial_geodesic_distance: f64,
    pub iterations_run: usize,
    /// Best cost seen after each iteration (non-increasing).
    pub best_cost_history: Vec<f64>,
    /// Set when the goal was unreachable and the field was built to the
    /// nearest reachable free cell instead.
    pub retargeted_goal: Option<Pose2>,
}

impl PlanResult {
    pub fn is_best_effort(&self) -> bool {
        self.retargeted_goal.is_some()
    }
}

/// Softmax-weighted mean of the population: `w_k ∝ exp(−(J_k − min J)/λ)`.
///
/// Non-finite costs get zero weight; when no cost is finite, `previous` is
/// returned unchanged.
pub fn mppi_update(
    costs: &[f64],
    population: &[CommandSequence],
    temperature: f64,
    previous: &CommandSequence,
) -> Result<CommandSequence> {
    if costs.len() != population.len() || population.is_empty() {
        return Err(NavError::invalid(format!(
            "population of {} members with {} costs",
            population.len(),
            costs.len()
        )));
    }
    if !(temperature > 0.0) {
        return Err(NavError::invalid("temperature must be positive"));
    }
    let n = population[0].len();
    if population.iter().any(|p| p.len() != n) {
        return Err(NavError::invalid("population members differ in length"));
    }
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Ok(previous.clone());
    }
    let weights: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                (-(c - min) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let norm: f64 = weights.iter().sum();
    let mut mean = vec![Twist2::ZERO; n];
    for (w, member) in weights.iter().zip(population) {
        if *w == 0.0 {
            continue;
        }
        let w = w / norm;
        for (m, c) in mean.iter_mut().zip(&member.commands) {
            m.vx += w * c.vx;
            m.vy += w * c.vy;
            m.omega += w * c.omega;
        }
    }
    CommandSequence::new(mean, population[0].dt)
}

/// True when any waypoint's footprint touches an obstacle cell or leaves the map.
pub fn check_collision(path: &Path, obstacles: &GridMap2D, footprint: &Footprint) -> bool {
    check_collision_indexed(path, &FootprintQuery::new(obstacles), footprint)
}

pub fn check_collision_indexed(path: &Path, obstacles: &FootprintQuery<'_>, footprint: &Footprint) -> bool {
    path.iter().any(|w| {
        let (sum, outside) = obstacles.sum(footprint, w);
        sum > 0.0 || outside > 0
    })
}

/// The distance field used to plan toward `goal`, retargeted to the nearest
/// free cell reachable from `start` when the goal itself is not.
pub fn planning_field(obstacles: &GridMap2D, start: &Pose2, goal: &Pose2) -> Result<(DistanceField, Option<Pose2>)> {
    if let Ok(field) = compute_gdf(obstacles, goal) {
        if field.query(start).is_finite() {
            return Ok((field, None));
        }
    }
    let cell = nearest_reachable_cell(obstacles, start, goal)
        .ok_or_else(|| NavError::InfeasibleGoal("map has no free cell".into()))?;
    let field = compute_gdf_to_cell(obstacles, cell)?;
    let (x, y) = obstacles.cell_center(cell);
    Ok((field, Some(Pose2::new(x, y, goal.theta))))
}

/// MPPI from a zero warm start.
/// Commands with the same world-frame translation as `commands` whose heading
/// turns to `heading` at the angular limit (translation is clamped again).
pub(crate) fn align_to_heading(
    start: &Pose2,
    commands: &[Twist2],
    dt: f64,
    heading: f64,
    limits: &VelocityLimits,
) -> Vec<Twist2> {
    let mut theta = start.theta;
    let mut turned = start.theta;
    commands
        .iter()
        .map(|m| {
            let (s, c) = theta.sin_cos();
            let (wx, wy) = (c * m.vx - s * m.vy, s * m.vx + c * m.vy);
            let omega = (wrap_angle(heading - turned) / dt).clamp(-limits.omega_max, limits.omega_max);
            let (s, c) = turned.sin_cos();
            let cmd = Twist2::new(c * wx + s * wy, -s * wx + c * wy, omega).clamped(limits);
            theta = wrap_angle(theta + m.omega * dt);
            turned = wrap_angle(turned + cmd.omega * dt);
            cmd
        })
        .collect()
}

pub fn plan(scene: &WorldScene, start: &Pose2, goal: &Pose2, config: &MppiConfig) -> Result<PlanResult> {
    plan_warm(scene, start, goal, config, None)
}

/// MPPI around an optional initial mean (shorter sequences are padded with zeros).
pub fn plan_warm(
    scene: &WorldScene,
    start: &Pose2,
    goal: &Pose2,
    config: &MppiConfig,
    warm_start: Option<&CommandSequence>,
) -> Result<PlanResult> {
    config.validate()?;
    if scene.obstacles.world_to_cell(start).is_none() {
        return Err(NavError::invalid(format!(
            "start ({:.3}, {:.3}) is outside the map",
            start.x, start.y
        )));
    }
    let (field, retargeted_goal) = planning_field(&scene.obstacles, start, goal)?;
    let target = retargeted_goal.unwrap_or(*goal);
    let ctx = CostContext::new(scene, &field, target);
    let n = config.horizon_steps;

    let mut mean = CommandSequence::zeros(n, config.dt)?;
    if let Some(w) = warm_start {
        for (m, c) in mean.commands.iter_mut().zip(&w.commands) {
            *m = c.clamped(&config.limits);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let rho = config.noise_correlation;
    let innovation = (1.0 - rho * rho).sqrt();
    let braking = config.braking_members.min(config.population_size - 1);
    let n_aligned = ((config.population_size - 1 - braking) as f64 * config.aligned_fraction) as usize;

    let mut best: Option<(CostBreakdown, CommandSequence, Path)> = None;
    let mut history = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let std: [f64; 3] = std::array::from_fn(|a| config.noise_std.axis(a));
        // member 0 is the noise-free mean
        let population: Vec<CommandSequence> = (0..config.population_size)
            .map(|k| {
                let mut eps = [0.0f64; 3];
                let commands = mean
                    .commands
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        if k == 0 {
                            return m.clamped(&config.limits);
                        }
                        if k <= braking {
                            return if i < k * n / (braking + 1) {
                                m.clamped(&config.limits)
                            } else {
                                Twist2::ZERO
                            };
                        }
                        for e in eps.iter_mut() {
                            let z: f64 = unit.sample(&mut rng);
                            *e = if i == 0 { z } else { rho * *e + innovation * z };
                        }
                        Twist2::new(
                            m.vx + std[0] * eps[0],
                            m.vy + std[1] * eps[1],
                            m.omega + std[2] * eps[2],
                        )
                        .clamped(&config.limits)
                    })
                    .collect::<Vec<_>>();
                let commands = if k >= config.population_size - n_aligned {
                    align_to_heading(start, &commands, config.dt, target.theta, &config.limits)
                } else {
                    commands
                };
                CommandSequence {
                    commands,
                    dt: config.dt,
                }
            })
            .collect();

        let evaluated: Vec<(Path, CostBreakdown)> =
            exec::map(config.execution, &population, |cmds| ctx.evaluate(start, cmds, config))
                .into_iter()
                .collect::<Result<_>>()?;

        let costs: Vec<f64> = evaluated
            .iter()
            .map(|(_, c)| if c.total.is_nan() { f64::INFINITY } else { c.total })
            .collect();
        let (k_best, &c_best) = costs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("population is non-empty");
        if best.as_ref().is_none_or(|(b, _, _)| c_best < b.total) {
            best = Some((
                evaluated[k_best].1,
                population[k_best].clone(),
                evaluated[k_best].0.clone(),
            ));
        }
        history.push(best.as_ref().map_or(f64::INFINITY, |b| b.0.total));
        mean = mppi_update(&costs, &population, config.temperature, &mean)?;
    }

    let (cost, commands, path) = match best {
        Some(b) => b,
        None => {
            // zero iterations: report the (clamped) warm start
            let cmds = CommandSequence::new(
                mean.commands.iter().map(|c| c.clamped(&config.limits)).collect(),
                config.dt,
            )?;
            let (path, cost) = ctx.evaluate(start, &cmds, config)?;
            (cost, cmds, path)
        }
    };
    let collided = check_collision(&path, &scene.obstacles, &config.footprint);
    let final_geodesic_distance = path.last().map_or(f64::INFINITY, |w| field.query(w));
    Ok(PlanResult {
        initial_geodesic_distance: field.query(start),
        path,
        commands,
        cost,
        collided,
        final_geodesic_distance,
        iterations_run: config.iterations,
        best_cost_history: history,
        retargeted_goal,
    })
}

/// Re-rolls a plan's commands; used to check `path == rollout(start, commands)`.
pub fn replay(start: &Pose2, result: &PlanResult) -> Result<Path> {
    rollout(start, &result.commands)
}
