//! Sequential vs rayon execution for the two data-parallel hot paths:
//! population evaluation inside one MPPI plan, and per-case evaluation.
//! Build with `--no-default-features` to see the fallback (both modes then
//! run on one thread).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geonav::eval::{evaluate, generate_cases, reachability_filter, StraightLinePlanner};
use geonav::mppi::{plan, Footprint, MppiConfig};
use geonav::worldmodel::{generate_world, WorldSpec};
use geonav::{Execution, Pose2};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn mppi_plan(c: &mut Criterion) {
    let scene = generate_world(&WorldSpec::random_obstacles(12), 3).unwrap();
    let goal = Pose2::new(3.0, 1.0, 0.3);
    let mut group = c.benchmark_group("mppi_plan");
    group.sample_size(10);
    for mode in MODES {
        let config = MppiConfig {
            iterations: 6,
            execution: mode,
            ..MppiConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &config, |b, cfg| {
            b.iter(|| plan(&scene, &Pose2::IDENTITY, &goal, cfg).unwrap())
        });
    }
    group.finish();
}

fn eval_cases(c: &mut Criterion) {
    let scenes: Vec<_> = (0..32)
        .map(|s| generate_world(&WorldSpec::random_obstacles(12), s).unwrap())
        .collect();
    let fp = Footprint::default();
    let cases = reachability_filter(&generate_cases(&scenes, 2, 0, &fp), &scenes).kept;
    let mut group = c.benchmark_group("eval_straight");
    group.sample_size(10);
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| evaluate(&StraightLinePlanner::default(), &cases, &scenes, &fp, m).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mppi_plan, eval_cases);
criterion_main!(benches);
