//! SE(2) poses, body-frame velocity commands and the piecewise-constant
//! velocity rollout.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Absolute wrapped heading difference, in [0, π].
pub fn heading_error(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// A planar pose. `theta` is kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Pose2::new(a[0], a[1], a[2])
    }

    /// Planar distance between the two positions.
    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Group composition `self ∘ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        compose(self, other)
    }

    /// The pose of `target` expressed in the frame of `self`.
    pub fn relative(&self, target: &Pose2) -> Pose2 {
        relative_to(self, target)
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)
    }
}

/// Standard SE(2) composition.
pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    let (s, c) = a.theta.sin_cos();
    Pose2::new(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)
}

/// Expresses `target` in the frame of `reference`, so that
/// `compose(reference, relative_to(reference, target)) == target`.
pub fn relative_to(reference: &Pose2, target: &Pose2) -> Pose2 {
    let (s, c) = reference.theta.sin_cos();
    let dx = target.x - reference.x;
    let dy = target.y - reference.y;
    Pose2::new(c * dx + s * dy, -s * dx + c * dy, target.theta - reference.theta)
}

/// Body-frame velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2 {
    pub const ZERO: Twist2 = Twist2 {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Twist2 { vx, vy, omega }
    }

    pub fn clamped(self, limits: &VelocityLimits) -> Twist2 {
        Twist2 {
            vx: self.vx.clamp(-limits.vx_max, limits.vx_max),
            vy: self.vy.clamp(-limits.vy_max, limits.vy_max),
            omega: self.omega.clamp(-limits.omega_max, limits.omega_max),
        }
    }

    pub fn within(&self, limits: &VelocityLimits) -> bool {
        self.vx.abs() <= limits.vx_max && self.vy.abs() <= limits.vy_max && self.omega.abs() <= limits.omega_max
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Symmetric per-axis command bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityLimits {
    pub vx_max: f64,
    pub vy_max: f64,
    pub omega_max: f64,
}

impl Default for VelocityLimits {
    fn default() -> Self {
        VelocityLimits {
            vx_max: 1.0,
            vy_max: 0.5,
            omega_max: 1.0,
        }
    }
}

impl VelocityLimits {
    /// Largest planar speed an admissible command can reach.
    pub fn max_linear_speed(&self) -> f64 {
        self.vx_max.hypot(self.vy_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vx_max > 0.0 && self.vy_max >= 0.0 && self.omega_max > 0.0) {
            return Err(NavError::invalid(format!("velocity limits must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Ordered waypoints. Planner outputs hold exactly the configured horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Pose2>,
}

impl Path {
    pub fn new(waypoints: Vec<Pose2>) -> Self {
        Path { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn last(&self) -> Option<&Pose2> {
        self.waypoints.last()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pose2> {
        self.waypoints.iter()
    }

    /// Re-expresses every waypoint in the frame of `reference`.
    pub fn relative_to(&self, reference: &Pose2) -> Path {
        Path::new(self.waypoints.iter().map(|w| relative_to(reference, w)).collect())
    }
}

/// Piecewise-constant command sequence with a fixed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSequence {
    pub commands: Vec<Twist2>,
    pub dt: f64,
}

impl CommandSequence {
    pub fn new(commands: Vec<Twist2>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(NavError::invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(CommandSequence { commands, dt })
    }

    pub fn zeros(n: usize, dt: f64) -> Result<Self> {
        Self::new(vec![Twist2::ZERO; n], dt)
    }

    pub fn constant(cmd: Twist2, n: usize, dt: f64) -> Result<Self> {
        Self::new(vec![cmd; n], dt)
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.commands.len() as f64
    }
}

/// One step of the kinematic model: heading advances by `ω·dt`, position by
/// the body velocity rotated through the heading at the start of the step.
#[inline]
pub fn step(pose: &Pose2, cmd: &Twist2, dt: f64) -> Pose2 {
    let (s, c) = pose.theta.sin_cos();
    Pose2::new(
        pose.x + (c * cmd.vx - s * cmd.vy) * dt,
        pose.y + (s * cmd.vx + c * cmd.vy) * dt,
        pose.theta + cmd.omega * dt,
    )
}

/// Integrates `cmds` from `start`. Waypoint `i` is the pose after command `i`,
/// so the output has one waypoint per command and excludes `start`.
pub fn rollout(start: &Pose2, cmds: &CommandSequence) -> Result<Path> {
    if cmds.is_empty() {
        return Err(NavError::invalid("rollout needs at least one command"));
    }
    if !(cmds.dt > 0.0) {
        return Err(NavError::invalid(format!("dt must be positive, got {}", cmds.dt)));
    }
    let mut pose = *start;
    let waypoints = cmds
        .commands
        .iter()
        .map(|cmd| {
            pose = step(&pose, cmd, cmds.dt);
            pose
        })
        .collect();
    Ok(Path::new(waypoints))
}

/// Sum of planar segment lengths from `origin` through every waypoint.
pub fn path_length(origin: &Pose2, path: &Path) -> f64 {
    let mut prev = origin;
    let mut total = 0.0;
    for w in &path.waypoints {
        total += prev.distance(w);
        prev = w;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pose_close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && heading_error(a.theta, b.theta) <= tol
    }

    #[test]
    fn wrap_is_half_open_at_minus_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5 * PI - TAU), -0.5 * PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn zero_commands_stay_at_origin() {
        let cmds = CommandSequence::zeros(50, 0.1).unwrap();
        let path = rollout(&Pose2::IDENTITY, &cmds).unwrap();
        assert_eq!(path.len(), 50);
        assert!(path.iter().all(|w| *w == Pose2::IDENTITY));
    }

    #[test]
    fn straight_line_reaches_five_meters() {
        let cmds = CommandSequence::constant(Twist2::new(1.0, 0.0, 0.0), 50, 0.1).unwrap();
        let path = rollout(&Pose2::IDENTITY, &cmds).unwrap();
        let last = path.last().unwrap();
        assert_abs_diff_eq!(last.x, 5.0, epsilon = 1e-12);
        assert_eq!(last.y, 0.0);
        assert_eq!(last.theta, 0.0);
        assert_abs_diff_eq!(path_length(&Pose2::IDENTITY, &path), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_rotation_half_turn() {
        let cmds = CommandSequence::constant(Twist2::new(0.0, 0.0, PI / 5.0), 50, 0.1).unwrap();
        let path = rollout(&Pose2::IDENTITY, &cmds).unwrap();
        let last = path.last().unwrap();
        assert_eq!((last.x, last.y), (0.0, 0.0));
        assert!(heading_error(last.theta, PI) < 1e-12);
    }

    #[test]
    fn empty_commands_rejected() {
        let cmds = CommandSequence::new(vec![], 0.1).unwrap();
        assert!(matches!(
            rollout(&Pose2::IDENTITY, &cmds),
            Err(NavError::InvalidArgument(_))
        ));
        assert!(CommandSequence::new(vec![Twist2::ZERO], 0.0).is_err());
    }

    #[test]
    fn recurrence_matches_hand_rolled_oracle() {
        // vx = 1, ω = 0.5, dt = 0.1, ten steps.
        let cmds = CommandSequence::constant(Twist2::new(1.0, 0.0, 0.5), 10, 0.1).unwrap();
        let path = rollout(&Pose2::IDENTITY, &cmds).unwrap();
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        for w in path.iter() {
            x += th.cos() * 0.1;
            y += th.sin() * 0.1;
            th += 0.05;
            assert_abs_diff_eq!(w.x, x, epsilon = 1e-12);
            assert_abs_diff_eq!(w.y, y, epsilon = 1e-12);
            assert_abs_diff_eq!(w.theta, th, epsilon = 1e-12);
        }
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(0.3, -1.2, 2.0);
        assert_eq!(compose(&p, &Pose2::IDENTITY), p);
        assert_eq!(compose(&Pose2::IDENTITY, &p), p);
        let q = compose(&Pose2::new(1.0, 0.0, PI / 2.0), &Pose2::new(1.0, 0.0, 0.0));
        assert!(pose_close(&q, &Pose2::new(1.0, 1.0, PI / 2.0), 1e-12));
    }

    #[test]
    fn relative_examples() {
        let p = Pose2::new(-2.0, 0.7, -1.0);
        assert!(pose_close(&relative_to(&p, &p), &Pose2::IDENTITY, 1e-15));
        let r = relative_to(&Pose2::new(0.0, 0.0, PI / 2.0), &Pose2::new(0.0, 1.0, PI / 2.0));
        assert!(pose_close(&r, &Pose2::new(1.0, 0.0, 0.0), 1e-12));
        assert!(pose_close(&p.inverse().compose(&p), &Pose2::IDENTITY, 1e-12));
    }

    #[test]
    fn zigzag_length() {
        let path = Path::new(vec![
            Pose2::new(0.0, 0.0, 0.0),
            Pose2::new(1.0, 0.0, 0.0),
            Pose2::new(1.0, 1.0, 0.0),
        ]);
        assert_eq!(path_length(&Pose2::IDENTITY, &path), 2.0);
        assert_eq!(path_length(&Pose2::IDENTITY, &Path::default()), 0.0);
    }

    #[test]
    fn clamp_respects_limits() {
        let lim = VelocityLimits::default();
        let c = Twist2::new(3.0, -2.0, 0.2).clamped(&lim);
        assert_eq!(c, Twist2::new(1.0, -0.5, 0.2));
        assert!(c.within(&lim));
    }

    fn pose_strategy() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    fn cmd_strategy() -> impl Strategy<Value = Vec<Twist2>> {
        prop::collection::vec(
            (-1.0..1.0f64, -0.5..0.5f64, -1.0..1.0f64).prop_map(|(a, b, c)| Twist2::new(a, b, c)),
            1..60,
        )
    }

    proptest! {
        #[test]
        fn frame_round_trip(a in pose_strategy(), b in pose_strategy()) {
            let back = compose(&a, &relative_to(&a, &b));
            prop_assert!((back.x - b.x).abs() <= 1e-12);
            prop_assert!((back.y - b.y).abs() <= 1e-12);
            prop_assert!(heading_error(back.theta, b.theta) <= 1e-12);
            prop_assert!(back.theta > -PI && back.theta <= PI);
        }

        #[test]
        fn rotation_only_keeps_position(start in pose_strategy(), omegas in prop::collection::vec(-1.0..1.0f64, 1..80)) {
            let cmds = CommandSequence::new(omegas.iter().map(|&w| Twist2::new(0.0, 0.0, w)).collect(), 0.1).unwrap();
            let path = rollout(&start, &cmds).unwrap();
            for w in path.iter() {
                prop_assert_eq!((w.x, w.y), (start.x, start.y));
            }
        }

        #[test]
        fn displacement_is_bounded(start in pose_strategy(), cmds in cmd_strategy()) {
            let seq = CommandSequence::new(cmds.clone(), 0.1).unwrap();
            let path = rollout(&start, &seq).unwrap();
            let bound: f64 = cmds.iter().map(|c| c.linear_speed() * 0.1).sum();
            prop_assert!(start.distance(path.last().unwrap()) <= bound + 1e-9);
            prop_assert_eq!(path.len(), cmds.len());
            prop_assert_eq!(rollout(&start, &seq).unwrap(), path);
        }
    }
}
