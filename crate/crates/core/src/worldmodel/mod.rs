//! Robot-centered grid maps, the analytic traversability rule and procedural
//! world generation.

mod generator;
mod grid;
mod scene;
mod traversability;

pub use generator::{generate_world, generate_world_with, WorldGeometry, WorldSpec, OBSTACLE_HEIGHT_STEPS};
pub use grid::{CellIndex, GridMap2D, DEFAULT_CELLS, DEFAULT_RESOLUTION, GM2D_MAGIC, GM2D_VERSION};
pub use scene::{Region, WorldScene, COST_FILE, ELEVATION_FILE, METADATA_FILE, OBSTACLES_FILE, TRAVERSABILITY_FILE};
pub use traversability::{
    cost_of_traversability, elevation_to_traversability, is_obstacle_value, threshold_obstacles,
    traversability_to_cost, TraversabilityParams, OBSTACLE_ABOVE, OBSTACLE_COST, RAMP_END, RISKY_COST, SAFE_BELOW,
};
