//! `geonav`: world generation, planning, dataset building, evaluation and
//! closed-loop simulation from one TOML config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use geonav::Pose2;

use config::{parse_pose, PlannerName, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "geonav", version, about = "Geometric navigation supervision toolkit")]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a world scene directory.
    World(WorldArgs),
    /// Plan once with MPPI on a scene.
    Plan(PlanArgs),
    /// Build D_TEL / D_GEO / D_AUG from teleop logs and scenes.
    Dataset(DatasetArgs),
    /// Evaluate planners on generated or given cases.
    Eval(EvalArgs),
    /// Closed-loop run with replanning and an obstacle schedule.
    Sim(SimArgs),
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    /// One of: empty, corridor, random_obstacles, box_room, stairs.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corridor width.
    #[arg(long)]
    pub width: Option<f64>,
    /// Number of random obstacles.
    #[arg(long)]
    pub count: Option<usize>,
    /// Box room door width (0 closes the room).
    #[arg(long)]
    pub door_width: Option<f64>,
    /// Stair step height.
    #[arg(long)]
    pub step_height: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scene directory.
    #[arg(long)]
    pub scene: PathBuf,
    /// Goal as x,y[,theta] in the scene frame.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pose)]
    pub goal: Pose2,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pose, default_value = "0,0,0")]
    pub start: Pose2,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print an ASCII render of the path over the obstacle grid.
    #[arg(long)]
    pub render: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Teleop log CSV files.
    #[arg(long, num_args = 1..)]
    pub logs: Vec<PathBuf>,
    /// Scene directories for geometric samples.
    #[arg(long, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    /// Add this many synthetic teleop logs (60 s at 10 Hz each).
    #[arg(long, default_value_t = 0)]
    pub synthetic_logs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Case file (JSON Lines); needs `--scenes`. Without it cases are generated.
    #[arg(long, requires = "scenes")]
    pub cases: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    /// Planners to evaluate; repeatable.
    #[arg(long = "planner", value_enum, default_values_t = [PlannerName::Mppi])]
    pub planners: Vec<PlannerName>,
    /// Number of generated worlds (overrides `eval.worlds`).
    #[arg(long)]
    pub worlds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pose)]
    pub goal: Pose2,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pose)]
    pub start: Option<Pose2>,
    /// Obstacle schedule TOML (`[[events]]` with time, region, action).
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mppi")]
    pub planner: PlannerName,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub render: bool,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match cli.command {
        Command::World(a) => {
            commands::resolve_world(&mut cfg, &a)?;
            if cli.print_config {
                return print_config(&cfg);
            }
            commands::world(&cfg)
        }
        Command::Plan(a) => {
            if let Some(s) = a.seed {
                cfg.planner.seed = s;
            }
            if cli.print_config {
                return print_config(&cfg);
            }
            commands::plan(&cfg, &a)
        }
        Command::Dataset(a) => {
            if let Some(s) = a.seed {
                cfg.dataset.seed = s;
            }
            if cli.print_config {
                return print_config(&cfg);
            }
            commands::dataset(&cfg, &a)
        }
        Command::Eval(a) => {
            if let Some(n) = a.worlds {
                cfg.eval.worlds = n;
            }
            if cli.print_config {
                return print_config(&cfg);
            }
            commands::eval(&cfg, &a)
        }
        Command::Sim(a) => {
            commands::resolve_sim(&mut cfg, &a)?;
            if cli.print_config {
                return print_config(&cfg);
            }
            commands::sim(&cfg, &a)
        }
    }
}

fn print_config(cfg: &RunConfig) -> Result<ExitCode> {
    print!("{}", cfg.to_toml()?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
