//! Success, collision and SPL metrics, the straight-line baseline, and
//! batch evaluation of path planners.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasetgen::round_sig;
use crate::error::{NavError, Result};
use crate::exec::{self, Execution};
use crate::geodesic::{compute_gdf, DistanceField};
use crate::geometry::{heading_error, path_length, Path, Pose2};
use crate::mppi::{check_collision, plan, Footprint, MppiConfig};
use crate::worldmodel::WorldScene;

/// Final geodesic distance counted as reaching the goal.
pub const SUCCESS_RADIUS: f64 = 1.0;
/// Length cap of the straight-line baseline.
pub const STRAIGHT_LINE_CAP: f64 = 5.0;

/// JSON has no infinity: non-finite values are written as strings.
pub mod float_or_string {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub scene_ref: String,
    pub start: Pose2,
    pub goal: Pose2,
    /// Geodesic start-to-goal distance ℓ; +∞ until the reachability filter ran.
    #[serde(with = "float_or_string")]
    pub geodesic_start_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub case: EvalCase,
    pub path: Path,
    /// p: length from the start through every waypoint.
    pub executed_length: f64,
    pub collided: bool,
    #[serde(with = "float_or_string")]
    pub final_gd: f64,
    pub success: bool,
    /// Diagnostic only; success is position-only.
    pub final_heading_error: f64,
    /// Planner failure message, if the planner did not produce a path.
    pub error: Option<String>,
}

impl EvalOutcome {
    /// SPL term S·ℓ/max(p, ℓ).
    pub fn spl_term(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let l = self.case.geodesic_start_distance;
        let denom = self.executed_length.max(l);
        if denom == 0.0 {
            1.0
        } else {
            l / denom
        }
    }

    /// Copy with every float at the serialized precision.
    pub fn rounded(&self) -> EvalOutcome {
        let r = |p: &Pose2| Pose2::from_array(p.to_array().map(round_sig));
        EvalOutcome {
            case: EvalCase {
                scene_ref: self.case.scene_ref.clone(),
                start: r(&self.case.start),
                goal: r(&self.case.goal),
                geodesic_start_distance: round_sig(self.case.geodesic_start_distance),
            },
            path: Path::new(self.path.iter().map(r).collect()),
            executed_length: round_sig(self.executed_length),
            collided: self.collided,
            final_gd: round_sig(self.final_gd),
            success: self.success,
            final_heading_error: round_sig(self.final_heading_error),
            error: self.error.clone(),
        }
    }
}

/// Something that turns (scene, start, goal) into a world-frame path.
pub trait PathPlanner: Sync {
    fn name(&self) -> &str;
    fn plan_path(&self, scene: &WorldScene, start: &Pose2, goal: &Pose2) -> Result<Path>;
}

/// MPPI with a fixed configuration (seed offset per case is the caller's job).
#[derive(Debug, Clone)]
pub struct MppiPlanner {
    pub config: MppiConfig,
}

impl PathPlanner for MppiPlanner {
    fn name(&self) -> &str {
        "mppi"
    }

    fn plan_path(&self, scene: &WorldScene, start: &Pose2, goal: &Pose2) -> Result<Path> {
        plan(scene, start, goal, &self.config).map(|r| r.path)
    }
}

#[derive(Debug, Clone)]
pub struct StraightLinePlanner {
    pub waypoints: usize,
}

impl Default for StraightLinePlanner {
    fn default() -> Self {
        StraightLinePlanner { waypoints: 50 }
    }
}

impl PathPlanner for StraightLinePlanner {
    fn name(&self) -> &str {
        "straight"
    }

    fn plan_path(&self, _scene: &WorldScene, start: &Pose2, goal: &Pose2) -> Result<Path> {
        Ok(straight_line_baseline(start, goal, self.waypoints))
    }
}

/// `n` evenly spaced waypoints toward the goal, at most 5 m long, facing
/// the goal; the last takes the goal heading when the goal is reached.
pub fn straight_line_baseline(start: &Pose2, goal: &Pose2, n: usize) -> Path {
    let d = start.distance(goal);
    let reached = d <= STRAIGHT_LINE_CAP;
    let len = d.min(STRAIGHT_LINE_CAP);
    let bearing = if d > 0.0 {
        (goal.y - start.y).atan2(goal.x - start.x)
    } else {
        goal.theta
    };
    let (ux, uy) = if d > 0.0 {
        ((goal.x - start.x) / d, (goal.y - start.y) / d)
    } else {
        (0.0, 0.0)
    };
    Path::new(
        (1..=n)
            .map(|i| {
                if i == n && reached {
                    return *goal;
                }
                let s = len * i as f64 / n as f64;
                Pose2::new(start.x + ux * s, start.y + uy * s, bearing)
            })
            .collect(),
    )
}

/// Judges a path against a precomputed field to the case goal.
pub fn judge_with_field(
    case: &EvalCase,
    path: &Path,
    scene: &WorldScene,
    field: &DistanceField,
    footprint: &Footprint,
) -> EvalOutcome {
    let last = path.last().copied().unwrap_or(case.start);
    let final_gd = field.query(&last);
    let collided = check_collision(path, &scene.obstacles, footprint);
    EvalOutcome {
        case: case.clone(),
        path: path.clone(),
        executed_length: path_length(&case.start, path),
        collided,
        final_gd,
        success: final_gd <= SUCCESS_RADIUS && !collided,
        final_heading_error: heading_error(case.goal.theta, last.theta),
        error: None,
    }
}

/// Success iff the final waypoint is within 1 m (geodesic) of the goal and
/// no waypoint collides.
pub fn judge(case: &EvalCase, path: &Path, scene: &WorldScene, footprint: &Footprint) -> Result<EvalOutcome> {
    let field = compute_gdf(&scene.obstacles, &case.goal)
        .map_err(|e| NavError::ContractViolation(format!("case goal not judgeable (filter cases first): {e}")))?;
    Ok(judge_with_field(case, path, scene, &field, footprint))
}

/// Mean SPL term over the outcomes.
pub fn spl(outcomes: &[EvalOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(NavError::invalid("SPL of an empty outcome list"));
    }
    if let Some(o) = outcomes.iter().find(|o| !o.case.geodesic_start_distance.is_finite()) {
        return Err(NavError::invalid(format!(
            "case in {} has non-finite geodesic distance",
            o.case.scene_ref
        )));
    }
    Ok(outcomes.iter().map(EvalOutcome::spl_term).sum::<f64>() / outcomes.len() as f64)
}

/// Cases kept by [`reachability_filter`] and how many were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub kept: Vec<EvalCase>,
    pub discarded: usize,
}

fn scene_index(scenes: &[WorldScene]) -> HashMap<&str, &WorldScene> {
    scenes.iter().map(|s| (s.id.as_str(), s)).collect()
}

/// Keeps cases whose goal is reachable from the start on the geodesic
/// field and fills in ℓ. Cases naming unknown scenes are discarded.
pub fn reachability_filter(cases: &[EvalCase], scenes: &[WorldScene]) -> Filtered {
    let index = scene_index(scenes);
    let mut kept = Vec::new();
    for c in cases {
        let Some(scene) = index.get(c.scene_ref.as_str()) else {
            continue;
        };
        let Ok(field) = compute_gdf(&scene.obstacles, &c.goal) else {
            continue;
        };
        let l = field.query(&c.start);
        if l.is_finite() {
            kept.push(EvalCase {
                geodesic_start_distance: l,
                ..c.clone()
            });
        }
    }
    Filtered {
        discarded: cases.len() - kept.len(),
        kept,
    }
}

/// Goals at 1.5–3.5 m from the scene origin in random directions, heading
/// along the bearing, placed where the footprint fits.
pub fn generate_cases(scenes: &[WorldScene], per_scene: usize, seed: u64, footprint: &Footprint) -> Vec<EvalCase> {
    let mut cases = Vec::new();
    for (i, scene) in scenes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut made = 0;
        let mut attempts = 0;
        while made < per_scene && attempts < 1000 {
            attempts += 1;
            let bearing: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let d: f64 = rng.random_range(1.5..3.5);
            let goal = Pose2::new(d * bearing.cos(), d * bearing.sin(), bearing);
            if check_collision(&Path::new(vec![goal]), &scene.obstacles, footprint) {
                continue;
            }
            cases.push(EvalCase {
                scene_ref: scene.id.clone(),
                start: Pose2::IDENTITY,
                goal,
                geodesic_start_distance: f64::INFINITY,
            });
            made += 1;
        }
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub planner: String,
    pub n_cases: usize,
    pub collision_pct: f64,
    pub success_pct: f64,
    pub spl_pct: f64,
    #[serde(skip)]
    pub outcomes: Vec<EvalOutcome>,
}

impl EvalReport {
    /// Aggregates outcomes exactly as they will be serialized.
    pub fn from_outcomes(planner: &str, outcomes: Vec<EvalOutcome>) -> Result<Self> {
        let outcomes: Vec<EvalOutcome> = outcomes.iter().map(EvalOutcome::rounded).collect();
        let n = outcomes.len();
        let spl = spl(&outcomes)?;
        let pct = |k: usize| 100.0 * k as f64 / n as f64;
        Ok(EvalReport {
            planner: planner.to_string(),
            n_cases: n,
            collision_pct: pct(outcomes.iter().filter(|o| o.collided).count()),
            success_pct: pct(outcomes.iter().filter(|o| o.success).count()),
            spl_pct: 100.0 * spl,
            outcomes,
        })
    }

    pub fn write_outcomes(&self, path: &FsPath) -> Result<()> {
        let f = File::create(path).map_err(|e| NavError::io(path, e))?;
        let mut w = BufWriter::new(f);
        for o in &self.outcomes {
            serde_json::to_writer(&mut w, o).map_err(|e| NavError::format(path, e.to_string()))?;
            w.write_all(b"\n").map_err(|e| NavError::io(path, e))?;
        }
        w.flush().map_err(|e| NavError::io(path, e))
    }

    pub fn read_outcomes(path: &FsPath) -> Result<Vec<EvalOutcome>> {
        let f = File::open(path).map_err(|e| NavError::io(path, e))?;
        BufReader::new(f)
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, l)| {
                let l = l.map_err(|e| NavError::io(path, e))?;
                serde_json::from_str(&l).map_err(|e| NavError::format(path, format!("line {}: {e}", i + 1)))
            })
            .collect()
    }
}

/// Table II layout, rows sorted by SPL (best first).
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| b.spl_pct.total_cmp(&a.spl_pct));
    let width = rows
        .iter()
        .map(|r| r.planner.len())
        .max()
        .unwrap_or(0)
        .max("Method".len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>8}  {:>9}  {:>7}  {:>5}",
        "Method", "Col. (%)", "Succ. (%)", "SPL (%)", "N"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.1}  {:>9.1}  {:>7.1}  {:>5}",
            r.planner, r.collision_pct, r.success_pct, r.spl_pct, r.n_cases
        );
    }
    s
}

/// Runs the planner on every case (in parallel per `mode`) and judges the
/// result. Planner failures count as failed cases.
pub fn evaluate(
    planner: &dyn PathPlanner,
    cases: &[EvalCase],
    scenes: &[WorldScene],
    footprint: &Footprint,
    mode: Execution,
) -> Result<EvalReport> {
    let index = scene_index(scenes);
    let outcomes = exec::map(mode, cases, |case| -> Result<EvalOutcome> {
        let scene = index
            .get(case.scene_ref.as_str())
            .ok_or_else(|| NavError::invalid(format!("unknown scene '{}'", case.scene_ref)))?;
        let field = compute_gdf(&scene.obstacles, &case.goal)
            .map_err(|e| NavError::ContractViolation(format!("case goal not judgeable (filter cases first): {e}")))?;
        Ok(match planner.plan_path(scene, &case.start, &case.goal) {
            Ok(path) => judge_with_field(case, &path, scene, &field, footprint),
            Err(e) => EvalOutcome {
                case: case.clone(),
                path: Path::new(Vec::new()),
                executed_length: 0.0,
                collided: false,
                final_gd: field.query(&case.start),
                success: false,
                final_heading_error: heading_error(case.goal.theta, case.start.theta),
                error: Some(e.to_string()),
            },
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    EvalReport::from_outcomes(planner.name(), outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::{generate_world, WorldSpec};

    fn outcome(success: bool, l: f64, p: f64) -> EvalOutcome {
        EvalOutcome {
            case: EvalCase {
                scene_ref: "s".into(),
                start: Pose2::IDENTITY,
                goal: Pose2::new(l, 0.0, 0.0),
                geodesic_start_distance: l,
            },
            path: Path::new(vec![]),
            executed_length: p,
            collided: false,
            final_gd: 0.0,
            success,
            final_heading_error: 0.0,
            error: None,
        }
    }

    #[test]
    fn infinite_distances_survive_json() {
        let mut o = outcome(false, 2.0, 1.0);
        o.final_gd = f64::INFINITY;
        o.case.geodesic_start_distance = f64::INFINITY;
        let text = serde_json::to_string(&o).unwrap();
        assert!(text.contains("\"final_gd\":\"inf\""));
        let back: EvalOutcome = serde_json::from_str(&text).unwrap();
        assert_eq!(back, o);
    }

    #[test]
    fn spl_hand_cases() {
        assert_eq!(spl(&[outcome(true, 2.0, 2.0), outcome(true, 3.0, 3.0)]).unwrap(), 1.0);
        assert_eq!(spl(&[outcome(false, 2.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(spl(&[outcome(true, 2.0, 4.0), outcome(true, 2.0, 2.0)]).unwrap(), 0.75);
        // shorter than ℓ cannot exceed 1
        assert_eq!(outcome(true, 2.0, 1.0).spl_term(), 1.0);
        assert!(spl(&[]).is_err());
        assert!(spl(&[outcome(true, f64::INFINITY, 1.0)]).is_err());
    }

    #[test]
    fn straight_line_examples() {
        let p = straight_line_baseline(&Pose2::IDENTITY, &Pose2::new(3.0, 0.0, 0.4), 50);
        assert_eq!(p.len(), 50);
        assert!((path_length(&Pose2::IDENTITY, &p) - 3.0).abs() < 1e-12);
        assert_eq!(*p.last().unwrap(), Pose2::new(3.0, 0.0, 0.4));
        let far = straight_line_baseline(&Pose2::IDENTITY, &Pose2::new(8.0, 0.0, 0.0), 50);
        assert!((far.last().unwrap().x - 5.0).abs() < 1e-12);
        let same = straight_line_baseline(&Pose2::IDENTITY, &Pose2::IDENTITY, 50);
        assert_eq!(path_length(&Pose2::IDENTITY, &same), 0.0);
    }

    #[test]
    fn judge_examples() {
        let scene = generate_world(&WorldSpec::corridor(1.2), 0).unwrap();
        let fp = Footprint::default();
        let case = EvalCase {
            scene_ref: scene.id.clone(),
            start: Pose2::IDENTITY,
            goal: Pose2::new(1.5, 0.0, 0.0),
            geodesic_start_distance: 1.5,
        };
        let near = Path::new(vec![Pose2::new(1.0, 0.0, 0.0)]);
        let o = judge(&case, &near, &scene, &fp).unwrap();
        assert!(o.success && !o.collided && (o.final_gd - 0.5).abs() < 0.05);
        let far = Path::new(vec![Pose2::new(-0.0, 0.0, 0.0)]);
        assert!(!judge(&case, &far, &scene, &fp).unwrap().success);
        let through_wall = Path::new(vec![Pose2::new(0.5, 0.7, 0.0), Pose2::new(1.5, 0.0, 0.0)]);
        let o = judge(&case, &through_wall, &scene, &fp).unwrap();
        assert!(o.collided && !o.success && o.final_gd == 0.0);
        let bad = EvalCase {
            // wall face (the wall's flat top is free but enclosed)
            goal: Pose2::new(0.0, 0.61, 0.0),
            ..case
        };
        assert!(matches!(
            judge(&bad, &near, &scene, &fp),
            Err(NavError::ContractViolation(_))
        ));
    }

    #[test]
    fn reachability_drops_enclosed_goals() {
        let open = generate_world(&WorldSpec::Empty, 0).unwrap();
        let mut closed = generate_world(
            &WorldSpec::BoxRoom {
                door_width: 0.0,
                half_size: 0.8,
                center_x: 2.5,
                center_y: 0.0,
                wall_thickness: 0.2,
            },
            0,
        )
        .unwrap();
        closed.id = "closed".into();
        let mut cases = Vec::new();
        for i in 0..100 {
            let enclosed = i % 14 == 0 && i / 14 < 7;
            cases.push(EvalCase {
                scene_ref: if enclosed { "closed".into() } else { open.id.clone() },
                start: Pose2::IDENTITY,
                goal: if enclosed {
                    Pose2::new(2.5, 0.1, 0.0)
                } else {
                    Pose2::new(1.0 + i as f64 * 0.02, 0.3, 0.0)
                },
                geodesic_start_distance: f64::INFINITY,
            });
        }
        let f = reachability_filter(&cases, &[open, closed]);
        assert_eq!(f.kept.len(), 93);
        assert_eq!(f.discarded, 7);
        assert!(f.kept.iter().all(|c| c.geodesic_start_distance.is_finite()));
    }

    #[test]
    fn straight_line_on_empty_world_is_perfect() {
        let scenes: Vec<_> = (0..3)
            .map(|s| {
                let mut w = generate_world(&WorldSpec::Empty, s).unwrap();
                w.id = format!("empty-{s}");
                w
            })
            .collect();
        let fp = Footprint::default();
        let cases = reachability_filter(&generate_cases(&scenes, 5, 1, &fp), &scenes).kept;
        assert_eq!(cases.len(), 15);
        let r = evaluate(
            &StraightLinePlanner::default(),
            &cases,
            &scenes,
            &fp,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(r.success_pct, 100.0);
        assert_eq!(r.collision_pct, 0.0);
        // grid metric vs Euclidean length: within the octile bound
        assert!(r.spl_pct > 97.0 && r.spl_pct <= 100.0, "{}", r.spl_pct);
    }

    #[test]
    fn straight_line_collides_in_corridor_turn() {
        let scene = generate_world(&WorldSpec::corridor(1.2), 0).unwrap();
        let case = EvalCase {
            scene_ref: scene.id.clone(),
            start: Pose2::IDENTITY,
            goal: Pose2::new(3.0, -1.5, 0.0),
            geodesic_start_distance: f64::INFINITY,
        };
        let cases = reachability_filter(&[case], std::slice::from_ref(&scene)).kept;
        let r = evaluate(
            &StraightLinePlanner::default(),
            &cases,
            &[scene],
            &Footprint::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.collision_pct > 0.0);
    }

    #[test]
    fn outcomes_round_trip_to_same_report() {
        let scenes = vec![generate_world(&WorldSpec::random_obstacles(8), 3).unwrap()];
        let fp = Footprint::default();
        let cases = reachability_filter(&generate_cases(&scenes, 6, 2, &fp), &scenes).kept;
        let r = evaluate(
            &StraightLinePlanner::default(),
            &cases,
            &scenes,
            &fp,
            Execution::Sequential,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.jsonl");
        r.write_outcomes(&path).unwrap();
        let back = EvalReport::read_outcomes(&path).unwrap();
        assert_eq!(back, r.outcomes);
        assert_eq!(EvalReport::from_outcomes("straight", back).unwrap(), r);
        assert!(r.spl_pct <= r.success_pct);
        let table = format_table(&[r]);
        let header: Vec<&str> = table
            .lines()
            .next()
            .unwrap()
            .split("  ")
            .filter(|c| !c.is_empty())
            .map(str::trim)
            .collect();
        assert_eq!(header, ["Method", "Col. (%)", "Succ. (%)", "SPL (%)", "N"]);
    }

    #[test]
    fn planner_failures_count_as_failures() {
        struct Broken;
        impl PathPlanner for Broken {
            fn name(&self) -> &str {
                "broken"
            }
            fn plan_path(&self, _: &WorldScene, _: &Pose2, _: &Pose2) -> Result<Path> {
                Err(NavError::invalid("nope"))
            }
        }
        let scenes = vec![generate_world(&WorldSpec::Empty, 0).unwrap()];
        let fp = Footprint::default();
        let cases = reachability_filter(&generate_cases(&scenes, 3, 2, &fp), &scenes).kept;
        let r = evaluate(&Broken, &cases, &scenes, &fp, Execution::Sequential).unwrap();
        assert_eq!(r.success_pct, 0.0);
        assert_eq!(r.n_cases, 3);
        assert!(r.outcomes.iter().all(|o| o.error.is_some()));
    }
}
