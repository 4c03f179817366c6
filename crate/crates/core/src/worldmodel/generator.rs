//! Procedural desk-scale worlds. Every obstacle is an elevation feature so
//! scenes go through the full elevation → traversability → cost chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridMap2D;
use super::scene::WorldScene;
use super::traversability::TraversabilityParams;
use crate::error::{NavError, Result};

/// Obstacles are raised this many `step_max` above the floor.
pub const OBSTACLE_HEIGHT_STEPS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSpec {
    Empty,
    /// Two parallel walls along +x, from the map edge to `exit_x`, with inner
    /// faces `width` apart and centered on y = 0.
    Corridor {
        width: f64,
        #[serde(default = "defaults::exit_x")]
        exit_x: f64,
        #[serde(default = "defaults::wall_thickness")]
        wall_thickness: f64,
    },
    /// Cylindrical pillars placed uniformly, kept `clearance` away from the origin.
    RandomObstacles {
        count: usize,
        #[serde(default = "defaults::radius_min")]
        radius_min: f64,
        #[serde(default = "defaults::radius_max")]
        radius_max: f64,
        #[serde(default = "defaults::clearance")]
        clearance: f64,
    },
    /// Square room with a door in the +x wall; `door_width = 0` closes it.
    BoxRoom {
        door_width: f64,
        #[serde(default = "defaults::half_size")]
        half_size: f64,
        #[serde(default)]
        center_x: f64,
        #[serde(default)]
        center_y: f64,
        #[serde(default = "defaults::wall_thickness")]
        wall_thickness: f64,
    },
    /// Staircase rising along +x from `start_x`.
    Stairs {
        step_height: f64,
        step_depth: f64,
        #[serde(default = "defaults::stairs_start")]
        start_x: f64,
        #[serde(default = "defaults::stairs_count")]
        count: usize,
    },
}

mod defaults {
    pub fn exit_x() -> f64 {
        2.0
    }
    pub fn wall_thickness() -> f64 {
        0.2
    }
    pub fn radius_min() -> f64 {
        0.2
    }
    pub fn radius_max() -> f64 {
        0.5
    }
    pub fn clearance() -> f64 {
        0.8
    }
    pub fn half_size() -> f64 {
        2.0
    }
    pub fn stairs_start() -> f64 {
        1.0
    }
    pub fn stairs_count() -> usize {
        8
    }
}

impl WorldSpec {
    pub const NAMES: [&'static str; 5] = ["empty", "corridor", "random_obstacles", "box_room", "stairs"];

    pub fn name(&self) -> &'static str {
        match self {
            WorldSpec::Empty => "empty",
            WorldSpec::Corridor { .. } => "corridor",
            WorldSpec::RandomObstacles { .. } => "random_obstacles",
            WorldSpec::BoxRoom { .. } => "box_room",
            WorldSpec::Stairs { .. } => "stairs",
        }
    }

    /// The named spec with its default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "empty" => WorldSpec::Empty,
            "corridor" => WorldSpec::corridor(1.2),
            "random_obstacles" => WorldSpec::random_obstacles(12),
            "box_room" => WorldSpec::box_room(1.0),
            "stairs" => WorldSpec::Stairs {
                step_height: 0.03,
                step_depth: 0.3,
                start_x: defaults::stairs_start(),
                count: defaults::stairs_count(),
            },
            other => {
                return Err(NavError::invalid(format!(
                    "unknown world spec '{other}', expected one of: {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn corridor(width: f64) -> Self {
        WorldSpec::Corridor {
            width,
            exit_x: defaults::exit_x(),
            wall_thickness: defaults::wall_thickness(),
        }
    }

    pub fn random_obstacles(count: usize) -> Self {
        WorldSpec::RandomObstacles {
            count,
            radius_min: defaults::radius_min(),
            radius_max: defaults::radius_max(),
            clearance: defaults::clearance(),
        }
    }

    pub fn box_room(door_width: f64) -> Self {
        WorldSpec::BoxRoom {
            door_width,
            half_size: defaults::half_size(),
            center_x: 0.0,
            center_y: 0.0,
            wall_thickness: defaults::wall_thickness(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            WorldSpec::Empty => true,
            WorldSpec::Corridor {
                width, wall_thickness, ..
            } => width > 0.0 && wall_thickness > 0.0,
            WorldSpec::RandomObstacles {
                radius_min,
                radius_max,
                clearance,
                ..
            } => radius_min > 0.0 && radius_max >= radius_min && clearance >= 0.0,
            WorldSpec::BoxRoom {
                door_width,
                half_size,
                wall_thickness,
                ..
            } => door_width >= 0.0 && half_size > 0.0 && wall_thickness > 0.0,
            WorldSpec::Stairs {
                step_height,
                step_depth,
                ..
            } => step_height >= 0.0 && step_depth > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(NavError::invalid(format!("invalid world parameters: {self:?}")))
        }
    }
}

/// Grid geometry and traversability rule used by the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldGeometry {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
}

impl Default for WorldGeometry {
    fn default() -> Self {
        WorldGeometry {
            width_cells: super::grid::DEFAULT_CELLS,
            height_cells: super::grid::DEFAULT_CELLS,
            resolution: super::grid::DEFAULT_RESOLUTION,
        }
    }
}

/// Generates a scene on the default 8 × 8 m robot-centered grid.
pub fn generate_world(spec: &WorldSpec, seed: u64) -> Result<WorldScene> {
    generate_world_with(spec, seed, WorldGeometry::default(), TraversabilityParams::default())
}

pub fn generate_world_with(
    spec: &WorldSpec,
    seed: u64,
    geometry: WorldGeometry,
    params: TraversabilityParams,
) -> Result<WorldScene> {
    spec.validate()?;
    let mut elevation =
        GridMap2D::robot_centered(geometry.width_cells, geometry.height_cells, geometry.resolution, 0.0)?;
    let height = OBSTACLE_HEIGHT_STEPS * params.step_max;
    let raise = |elevation: &mut GridMap2D, inside: &dyn Fn(f64, f64) -> Option<f64>| {
        for cell in elevation.cells().collect::<Vec<_>>() {
            let (x, y) = elevation.cell_center(cell);
            if let Some(z) = inside(x, y) {
                elevation.set(cell, z as f32);
            }
        }
    };

    match *spec {
        WorldSpec::Empty => {}
        WorldSpec::Corridor {
            width,
            exit_x,
            wall_thickness,
        } => {
            let inner = width / 2.0;
            raise(&mut elevation, &|x, y| {
                let a = y.abs();
                (x <= exit_x && a >= inner && a < inner + wall_thickness).then_some(height)
            });
        }
        WorldSpec::RandomObstacles {
            count,
            radius_min,
            radius_max,
            clearance,
        } => {
            let pillars = place_pillars(&elevation, seed, count, radius_min, radius_max, clearance);
            raise(&mut elevation, &|x, y| {
                pillars
                    .iter()
                    .any(|&(cx, cy, r)| (x - cx).hypot(y - cy) <= r)
                    .then_some(height)
            });
        }
        WorldSpec::BoxRoom {
            door_width,
            half_size,
            center_x,
            center_y,
            wall_thickness,
        } => {
            raise(&mut elevation, &|x, y| {
                let dx = x - center_x;
                let dy = y - center_y;
                let m = dx.abs().max(dy.abs());
                let in_wall = m >= half_size && m < half_size + wall_thickness;
                let in_door = dx > 0.0 && dx.abs() >= dy.abs() && dy.abs() < door_width / 2.0;
                (in_wall && !in_door).then_some(height)
            });
        }
        WorldSpec::Stairs {
            step_height,
            step_depth,
            start_x,
            count,
        } => {
            raise(&mut elevation, &|x, _| {
                (x >= start_x).then(|| {
                    let k = (((x - start_x) / step_depth).floor() as usize + 1).min(count);
                    k as f64 * step_height
                })
            });
        }
    }

    let id = format!("{}-s{seed}", spec.name());
    WorldScene::from_elevation(id, spec.clone(), seed, elevation, params)
}

fn place_pillars(
    grid: &GridMap2D,
    seed: u64,
    count: usize,
    radius_min: f64,
    radius_max: f64,
    clearance: f64,
) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = grid.origin();
    let (w, h) = (
        grid.width() as f64 * grid.resolution(),
        grid.height() as f64 * grid.resolution(),
    );
    let mut pillars = Vec::with_capacity(count);
    let mut attempts = 0;
    while pillars.len() < count && attempts < count * 100 {
        attempts += 1;
        let cx = o.x + rng.random::<f64>() * w;
        let cy = o.y + rng.random::<f64>() * h;
        let r = if radius_max > radius_min {
            rng.random_range(radius_min..radius_max)
        } else {
            radius_min
        };
        if cx.hypot(cy) >= r + clearance {
            pillars.push((cx, cy, r));
        }
    }
    pillars
}
