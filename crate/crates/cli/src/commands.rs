use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use geonav::datasetgen::{build_dataset, synthetic_teleop_log, TeleopLog};
use geonav::eval::{evaluate, format_table, generate_cases, reachability_filter, EvalCase};
use geonav::geodesic::compute_gdf;
use geonav::mppi::PlanResult;
use geonav::sim::{
    render_ascii, run_closed_loop, save_trace, MppiReplanner, ObstacleSchedule, StraightLineReplanner, TracePoint,
};
use geonav::worldmodel::{generate_world, WorldScene, WorldSpec};
use geonav::Pose2;
use serde::Serialize;

use crate::config::{PlannerName, RunConfig};
use crate::{DatasetArgs, EvalArgs, PlanArgs, SimArgs, WorldArgs};

pub const RUN_CONFIG_FILE: &str = "run.toml";

fn prepare_out(cfg: &RunConfig) -> Result<&FsPath> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn write_run_config(cfg: &RunConfig, dir: &FsPath) -> Result<()> {
    let path = dir.join(RUN_CONFIG_FILE);
    fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: &FsPath) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_scene(dir: &FsPath) -> Result<WorldScene> {
    WorldScene::load(dir).with_context(|| format!("loading scene {}", dir.display()))
}

pub fn resolve_world(cfg: &mut RunConfig, a: &WorldArgs) -> Result<()> {
    if let Some(name) = &a.spec {
        cfg.world.spec = WorldSpec::from_name(name)?;
    }
    if let Some(s) = a.seed {
        cfg.world.seed = s;
    }
    match &mut cfg.world.spec {
        WorldSpec::Corridor { width, .. } => set(width, a.width),
        WorldSpec::RandomObstacles { count, .. } => set(count, a.count),
        WorldSpec::BoxRoom { door_width, .. } => set(door_width, a.door_width),
        WorldSpec::Stairs { step_height, .. } => set(step_height, a.step_height),
        WorldSpec::Empty => {}
    }
    let given = [
        ("--width", a.width.is_some(), "corridor"),
        ("--count", a.count.is_some(), "random_obstacles"),
        ("--door-width", a.door_width.is_some(), "box_room"),
        ("--step-height", a.step_height.is_some(), "stairs"),
    ];
    for (flag, set, kind) in given {
        if set && cfg.world.spec.name() != kind {
            bail!("{flag} applies to '{kind}' worlds, not '{}'", cfg.world.spec.name());
        }
    }
    Ok(())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

pub fn world(cfg: &RunConfig) -> Result<ExitCode> {
    let scene = generate_world(&cfg.world.spec, cfg.world.seed)?;
    let dir = prepare_out(cfg)?;
    scene
        .save(dir)
        .with_context(|| format!("writing scene to {}", dir.display()))?;
    println!("{} -> {}", scene.id, dir.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PlanRecord<'a> {
    scene_ref: &'a str,
    start: Pose2,
    goal: Pose2,
    /// Final waypoint within the success radius (geodesic) of the goal.
    reached: bool,
    best_effort: bool,
    result: &'a PlanResult,
}

pub fn plan(cfg: &RunConfig, a: &PlanArgs) -> Result<ExitCode> {
    let scene = load_scene(&a.scene)?;
    let result = geonav::mppi::plan(&scene, &a.start, &a.goal, &cfg.planner)?;
    let reached = match (result.retargeted_goal, result.path.last()) {
        (None, Some(last)) => {
            compute_gdf(&scene.obstacles, &a.goal).is_ok_and(|f| f.query(last) <= geonav::eval::SUCCESS_RADIUS)
        }
        _ => false,
    };
    let record = PlanRecord {
        scene_ref: &scene.id,
        start: a.start,
        goal: a.goal,
        reached,
        best_effort: result.is_best_effort(),
        result: &result,
    };
    let dir = prepare_out(cfg)?;
    write_run_config(cfg, dir)?;
    write_json(&record, &dir.join("plan.json"))?;
    println!(
        "reached={} collided={} best_effort={} cost={:.4} final_gd={:.3}",
        reached,
        result.collided,
        result.is_best_effort(),
        result.cost.total,
        result.final_geodesic_distance
    );
    if a.render {
        let trace: Vec<TracePoint> = std::iter::once(a.start)
            .chain(result.path.iter().copied())
            .enumerate()
            .map(|(i, p)| TracePoint {
                time: i as f64 * cfg.planner.dt,
                x: p.x,
                y: p.y,
                theta: p.theta,
            })
            .collect();
        print!("{}", render_ascii(&scene.obstacles, &trace, &a.goal, 4));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn dataset(cfg: &RunConfig, a: &DatasetArgs) -> Result<ExitCode> {
    let mut logs = Vec::new();
    for p in &a.logs {
        logs.push(TeleopLog::load(p).with_context(|| format!("loading teleop log {}", p.display()))?);
    }
    for i in 0..a.synthetic_logs {
        let seed = cfg.dataset.seed.wrapping_add(i as u64);
        logs.push(synthetic_teleop_log(&format!("synthetic-{i}"), 60.0, 10.0, seed)?);
    }
    let scenes = a.scenes.iter().map(|d| load_scene(d)).collect::<Result<Vec<_>>>()?;
    let data = build_dataset(&logs, &scenes, &cfg.dataset)?;
    let dir = prepare_out(cfg)?;
    write_run_config(cfg, dir)?;
    data.write(dir)
        .with_context(|| format!("writing dataset to {}", dir.display()))?;
    print!("{}", data.report.format_table());
    let rejects = data.report.format_rejections();
    if !rejects.is_empty() {
        println!("rejected:");
        print!("{rejects}");
    }
    Ok(ExitCode::SUCCESS)
}

fn read_cases(path: &FsPath) -> Result<Vec<EvalCase>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut cases = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        cases.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(cases)
}

fn write_cases(cases: &[EvalCase], path: &FsPath) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for c in cases {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, a: &EvalArgs) -> Result<ExitCode> {
    let e = &cfg.eval;
    let (cases, scenes) = match &a.cases {
        Some(path) => {
            let scenes = a.scenes.iter().map(|d| load_scene(d)).collect::<Result<Vec<_>>>()?;
            (read_cases(path)?, scenes)
        }
        None => {
            if e.worlds == 0 {
                bail!("eval.worlds must be positive when no case file is given");
            }
            let scenes = (0..e.worlds as u64)
                .map(|i| generate_world(&e.world_spec, e.world_seed.wrapping_add(i)))
                .collect::<geonav::Result<Vec<_>>>()?;
            let cases = generate_cases(&scenes, e.cases_per_world, e.case_seed, &e.footprint);
            (cases, scenes)
        }
    };
    let filtered = reachability_filter(&cases, &scenes);
    if filtered.kept.is_empty() {
        bail!("no reachable cases to evaluate ({} discarded)", filtered.discarded);
    }
    let dir = prepare_out(cfg)?;
    write_run_config(cfg, dir)?;
    write_cases(&filtered.kept, &dir.join("cases.jsonl"))?;
    let mut reports = Vec::new();
    for name in &a.planners {
        let planner = name.build(&cfg.planner);
        let report = evaluate(planner.as_ref(), &filtered.kept, &scenes, &e.footprint, e.execution)?;
        report.write_outcomes(&dir.join(format!("outcomes_{}.jsonl", report.planner)))?;
        reports.push(report);
    }
    write_json(&reports, &dir.join("report.json"))?;
    let table = format_table(&reports);
    fs::write(dir.join("table.txt"), &table)?;
    println!(
        "cases: {} kept, {} discarded as unreachable",
        filtered.kept.len(),
        filtered.discarded
    );
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

pub fn resolve_sim(cfg: &mut RunConfig, a: &SimArgs) -> Result<()> {
    if let Some(s) = a.start {
        cfg.sim.start = s.to_array();
    }
    if let Some(s) = a.seed {
        cfg.sim.replanner.seed = s;
    }
    if let Some(t) = a.max_time {
        cfg.sim.follower.max_sim_time = t;
    }
    if let Some(p) = &a.schedule {
        let text = fs::read_to_string(p).with_context(|| format!("reading schedule {}", p.display()))?;
        cfg.sim.schedule =
            toml::from_str::<ObstacleSchedule>(&text).with_context(|| format!("parsing schedule {}", p.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimRecord<'a> {
    termination: geonav::sim::Termination,
    replans: usize,
    planner_failures: usize,
    applied_events: &'a [f64],
    outcome: &'a geonav::eval::EvalOutcome,
}

pub fn sim(cfg: &RunConfig, a: &SimArgs) -> Result<ExitCode> {
    let scene = load_scene(&a.scene)?;
    let start = Pose2::from_array(cfg.sim.start);
    let run = match a.planner {
        PlannerName::Mppi => {
            let mut p = MppiReplanner::new(cfg.sim.replanner.clone());
            run_closed_loop(&scene, &start, &a.goal, &mut p, &cfg.sim.follower, &cfg.sim.schedule)?
        }
        PlannerName::Straight => run_closed_loop(
            &scene,
            &start,
            &a.goal,
            &mut StraightLineReplanner,
            &cfg.sim.follower,
            &cfg.sim.schedule,
        )?,
    };
    let dir = prepare_out(cfg)?;
    write_run_config(cfg, dir)?;
    save_trace(&run.state.trace, &dir.join("trace.csv"))?;
    let record = SimRecord {
        termination: run.termination,
        replans: run.replans,
        planner_failures: run.planner_failures,
        applied_events: &run.applied_events,
        outcome: &run.outcome.rounded(),
    };
    write_json(&record, &dir.join("outcome.json"))?;
    println!(
        "{:?} at t={:.2}s, driven {:.2} m, final gd {:.3}, {} replans ({} failed)",
        run.termination,
        run.state.time,
        run.outcome.executed_length,
        run.outcome.final_gd,
        run.replans,
        run.planner_failures
    );
    if a.render {
        print!(
            "{}",
            render_ascii(&run.state.scene.obstacles, &run.state.trace, &a.goal, 4)
        );
    }
    Ok(ExitCode::from(run.termination.exit_code() as u8))
}
