use super::*;
use crate::geometry::{heading_error, path_length, rollout, CommandSequence, Path, Pose2, Twist2, VelocityLimits};
use crate::worldmodel::{generate_world, GridMap2D, WorldSpec};
use proptest::prelude::*;

fn member(v: f64) -> CommandSequence {
    CommandSequence::constant(Twist2::new(v, -v, 2.0 * v), 5, 0.1).unwrap()
}

#[test]
fn update_single_member_identity() {
    let p = vec![member(0.3)];
    let m = mppi_update(&[7.0], &p, 0.1, &member(0.0)).unwrap();
    assert_eq!(m, p[0]);
}

#[test]
fn update_equal_costs_average() {
    let p = vec![member(0.2), member(0.4), member(0.9)];
    let m = mppi_update(&[3.0, 3.0, 3.0], &p, 0.1, &member(0.0)).unwrap();
    for c in &m.commands {
        assert!((c.vx - 0.5).abs() < 1e-15);
        assert!((c.omega - 1.0).abs() < 1e-15);
    }
}

#[test]
fn update_cold_limit_picks_argmin() {
    let p = vec![member(0.2), member(0.4), member(0.9)];
    let m = mppi_update(&[3.0, 2.9, 3.5], &p, 1e-9, &member(0.0)).unwrap();
    for (a, b) in m.commands.iter().zip(&p[1].commands) {
        assert!((a.vx - b.vx).abs() <= 1e-6 && (a.vy - b.vy).abs() <= 1e-6 && (a.omega - b.omega).abs() <= 1e-6);
    }
}

#[test]
fn update_all_infinite_keeps_previous() {
    let p = vec![member(0.2), member(0.4)];
    let prev = member(0.7);
    let m = mppi_update(&[f64::INFINITY, f64::INFINITY], &p, 0.1, &prev).unwrap();
    assert_eq!(m, prev);
    assert!(mppi_update(&[1.0], &p, 0.1, &prev).is_err());
}

proptest! {
    #[test]
    fn update_is_shift_invariant(costs in prop::collection::vec(0.0..50.0f64, 2..12), shift in -100.0..100.0f64) {
        let p: Vec<CommandSequence> = (0..costs.len()).map(|k| member(k as f64 * 0.1)).collect();
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let a = mppi_update(&costs, &p, 0.7, &member(0.0)).unwrap();
        let b = mppi_update(&shifted, &p, 0.7, &member(0.0)).unwrap();
        for (x, y) in a.commands.iter().zip(&b.commands) {
            prop_assert!((x.vx - y.vx).abs() <= 1e-12);
            prop_assert!((x.omega - y.omega).abs() <= 1e-12);
        }
    }
}

#[test]
fn collision_examples() {
    let mut g = GridMap2D::default_robot_centered(0.0);
    let fp = Footprint::default();
    let path = crate::geometry::rollout(
        &Pose2::IDENTITY,
        &CommandSequence::constant(Twist2::new(1.0, 0.0, 0.2), 30, 0.1).unwrap(),
    )
    .unwrap();
    assert!(!check_collision(&path, &g, &fp));
    let centered = Pose2::new(1.003, 1.001, 0.0);
    let c = g.world_to_cell(&centered).unwrap();
    g.set(c, 1.0);
    assert!(check_collision(&Path::new(vec![centered]), &g, &fp));
    // one obstacle cell just inside the lateral edge (dilated half width 0.3)
    let mut g = GridMap2D::default_robot_centered(0.0);
    let edge = g.world_to_cell(&Pose2::new(0.0, 0.285, 0.0)).unwrap();
    g.set(edge, 1.0);
    let pose = Pose2::new(0.001, 0.001, 0.0);
    assert!(check_collision(&Path::new(vec![pose]), &g, &fp));
    assert!(!check_collision(
        &Path::new(vec![Pose2::new(0.001, -0.05, 0.0)]),
        &g,
        &fp
    ));
    // leaving the map
    assert!(check_collision(
        &Path::new(vec![Pose2::new(3.9, 0.0, 0.0)]),
        &GridMap2D::default_robot_centered(0.0),
        &fp
    ));
}

#[test]
fn plan_reaches_goal_on_empty_world() {
    let scene = generate_world(&WorldSpec::Empty, 0).unwrap();
    let goal = Pose2::new(3.0, 0.0, 0.0);
    let cfg = MppiConfig {
        seed: 3,
        ..MppiConfig::default()
    };
    let r = plan(&scene, &Pose2::IDENTITY, &goal, &cfg).unwrap();
    assert!(!r.collided);
    assert!(r.final_geodesic_distance <= 0.2, "{}", r.final_geodesic_distance);
    assert!(path_length(&Pose2::IDENTITY, &r.path) <= 1.15 * 3.0);
    assert_eq!(r.path.len(), 50);
    assert_eq!(replay(&Pose2::IDENTITY, &r).unwrap(), r.path);
    assert!(r.best_cost_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.commands.commands.iter().all(|c| c.within(&cfg.limits)));
}

#[test]
fn plan_goal_equals_start() {
    let scene = generate_world(&WorldSpec::Empty, 0).unwrap();
    let r = plan(&scene, &Pose2::IDENTITY, &Pose2::IDENTITY, &MppiConfig::default()).unwrap();
    assert!(r.path.iter().all(|w| w.norm() <= 0.3));
    assert!(r.cost.effort < 1e-9);
}

#[test]
fn plan_is_deterministic_and_consistent() {
    let scene = generate_world(&WorldSpec::random_obstacles(12), 21).unwrap();
    let goal = Pose2::new(2.8, -1.5, 1.0);
    let cfg = MppiConfig {
        population_size: 256,
        iterations: 8,
        seed: 77,
        ..MppiConfig::default()
    };
    let a = plan(&scene, &Pose2::IDENTITY, &goal, &cfg).unwrap();
    let b = plan(&scene, &Pose2::IDENTITY, &goal, &cfg).unwrap();
    assert_eq!(a, b);
    let seq = plan(
        &scene,
        &Pose2::IDENTITY,
        &goal,
        &MppiConfig {
            execution: crate::Execution::Sequential,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(a, seq);
    let (field, _) = planning_field(&scene.obstacles, &Pose2::IDENTITY, &goal).unwrap();
    let again = total_cost(&Pose2::IDENTITY, &a.commands, &scene, &field, &goal, &cfg).unwrap();
    assert!((again.total - a.cost.total).abs() <= 1e-9 * a.cost.total.abs().max(1.0));
}

#[test]
fn enclosed_goal_is_best_effort() {
    let spec = WorldSpec::BoxRoom {
        door_width: 0.0,
        half_size: 0.8,
        center_x: 2.5,
        center_y: 0.0,
        wall_thickness: 0.2,
    };
    let scene = generate_world(&spec, 0).unwrap();
    let goal = Pose2::new(2.5, 0.0, 0.0);
    let r = plan(&scene, &Pose2::IDENTITY, &goal, &MppiConfig::default()).unwrap();
    assert!(r.is_best_effort());
    assert!(!r.collided);
    assert!(r.final_geodesic_distance <= r.initial_geodesic_distance);
}

#[test]
fn off_map_goal_is_retargeted() {
    let scene = generate_world(&WorldSpec::Empty, 0).unwrap();
    let r = plan(
        &scene,
        &Pose2::IDENTITY,
        &Pose2::new(9.0, 0.0, 0.0),
        &MppiConfig {
            population_size: 128,
            iterations: 6,
            ..MppiConfig::default()
        },
    )
    .unwrap();
    let t = r.retargeted_goal.unwrap();
    assert!(t.x > 3.9 && t.y.abs() < 0.05);
    assert!(plan(
        &scene,
        &Pose2::new(5.0, 0.0, 0.0),
        &Pose2::IDENTITY,
        &MppiConfig::default()
    )
    .is_err());
}

#[test]
fn aligned_commands_keep_translation() {
    let limits = VelocityLimits::default();
    let start = Pose2::new(0.2, -0.1, 0.3);
    // slow enough that re-expressing in any heading stays within limits
    let cmds: Vec<Twist2> = (0..30)
        .map(|i| Twist2::new(0.3, 0.1 * (i as f64 * 0.3).sin(), 0.2))
        .collect();
    let aligned = super::planner::align_to_heading(&start, &cmds, 0.1, -2.0, &limits);
    let a = rollout(&start, &CommandSequence::new(cmds, 0.1).unwrap()).unwrap();
    let b = rollout(&start, &CommandSequence::new(aligned, 0.1).unwrap()).unwrap();
    for (p, q) in a.iter().zip(b.iter()) {
        assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
    }
    assert!(heading_error(-2.0, b.last().unwrap().theta) < 1e-9);
}

#[test]
fn config_rejects_bad_sampling_options() {
    for cfg in [
        MppiConfig {
            noise_correlation: 1.0,
            ..MppiConfig::default()
        },
        MppiConfig {
            aligned_fraction: 1.5,
            ..MppiConfig::default()
        },
    ] {
        assert!(cfg.validate().is_err());
    }
}
