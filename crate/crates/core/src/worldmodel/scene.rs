use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::generator::{WorldSpec, OBSTACLE_HEIGHT_STEPS};
use super::grid::GridMap2D;
use super::traversability::{
    elevation_to_traversability, threshold_obstacles, traversability_to_cost, TraversabilityParams,
};
use crate::error::{NavError, Result};

pub const ELEVATION_FILE: &str = "elevation.gm2d";
pub const TRAVERSABILITY_FILE: &str = "traversability.gm2d";
pub const COST_FILE: &str = "cost.gm2d";
pub const OBSTACLES_FILE: &str = "obstacles.gm2d";
pub const METADATA_FILE: &str = "scene.toml";

/// The four co-registered layers of one robot-centered map.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldScene {
    pub id: String,
    pub spec: WorldSpec,
    pub generator_seed: u64,
    pub params: TraversabilityParams,
    pub elevation: GridMap2D,
    pub traversability: GridMap2D,
    pub cost: GridMap2D,
    pub obstacles: GridMap2D,
}

/// Axis-aligned world-frame rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Region {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneMetadata {
    id: String,
    spec_name: String,
    seed: u64,
    spec: WorldSpec,
    traversability: TraversabilityParams,
}

impl WorldScene {
    /// Derives traversability, cost and obstacle layers from an elevation map.
    pub fn from_elevation(
        id: impl Into<String>,
        spec: WorldSpec,
        seed: u64,
        elevation: GridMap2D,
        params: TraversabilityParams,
    ) -> Result<Self> {
        let traversability = elevation_to_traversability(&elevation, &params)?;
        Self::from_traversability(id, spec, seed, elevation, traversability, params)
    }

    /// Uses a precomputed traversability layer (e.g. a learned estimate).
    pub fn from_traversability(
        id: impl Into<String>,
        spec: WorldSpec,
        seed: u64,
        elevation: GridMap2D,
        traversability: GridMap2D,
        params: TraversabilityParams,
    ) -> Result<Self> {
        if !elevation.same_geometry(&traversability) {
            return Err(NavError::invalid("elevation and traversability geometry differ"));
        }
        let cost = traversability_to_cost(&traversability)?;
        let obstacles = threshold_obstacles(&traversability);
        Ok(WorldScene {
            id: id.into(),
            spec,
            generator_seed: seed,
            params,
            elevation,
            traversability,
            cost,
            obstacles,
        })
    }

    pub fn spec_name(&self) -> &'static str {
        self.spec.name()
    }

    /// Copy with the region raised into an obstacle (`add`) or flattened to
    /// the floor (`remove`); derived layers are rebuilt.
    pub fn with_region(&self, region: &Region, add: bool) -> Result<WorldScene> {
        let mut elevation = self.elevation.clone();
        let height = if add {
            (OBSTACLE_HEIGHT_STEPS * self.params.step_max) as f32
        } else {
            0.0
        };
        for cell in self.elevation.cells() {
            let (x, y) = self.elevation.cell_center(cell);
            if region.contains(x, y) {
                elevation.set(cell, height);
                elevation.set_valid(cell, true);
            }
        }
        WorldScene::from_elevation(
            self.id.clone(),
            self.spec.clone(),
            self.generator_seed,
            elevation,
            self.params,
        )
    }

    pub fn save(&self, dir: &FsPath) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| NavError::io(dir, e))?;
        self.elevation.save(&dir.join(ELEVATION_FILE))?;
        self.traversability.save(&dir.join(TRAVERSABILITY_FILE))?;
        self.cost.save(&dir.join(COST_FILE))?;
        self.obstacles.save(&dir.join(OBSTACLES_FILE))?;
        let meta = SceneMetadata {
            id: self.id.clone(),
            spec_name: self.spec_name().to_string(),
            seed: self.generator_seed,
            spec: self.spec.clone(),
            traversability: self.params,
        };
        let text = toml::to_string(&meta).map_err(|e| NavError::format(dir.join(METADATA_FILE), e.to_string()))?;
        let path = dir.join(METADATA_FILE);
        fs::write(&path, text).map_err(|e| NavError::io(path, e))
    }

    /// Loads a scene directory and checks that the derived layers agree with
    /// the stored traversability.
    pub fn load(dir: &FsPath) -> Result<Self> {
        let meta_path = dir.join(METADATA_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| NavError::io(&meta_path, e))?;
        let meta: SceneMetadata = toml::from_str(&text).map_err(|e| NavError::format(&meta_path, e.to_string()))?;
        if meta.spec_name != meta.spec.name() {
            return Err(NavError::format(
                &meta_path,
                format!(
                    "spec_name '{}' does not match spec kind '{}'",
                    meta.spec_name,
                    meta.spec.name()
                ),
            ));
        }
        let elevation = GridMap2D::load(&dir.join(ELEVATION_FILE))?;
        let traversability = GridMap2D::load(&dir.join(TRAVERSABILITY_FILE))?;
        let cost = GridMap2D::load(&dir.join(COST_FILE))?;
        let obstacles = GridMap2D::load(&dir.join(OBSTACLES_FILE))?;
        let scene = WorldScene::from_traversability(
            meta.id,
            meta.spec,
            meta.seed,
            elevation,
            traversability,
            meta.traversability,
        )
        .map_err(|e| NavError::format(dir, e.to_string()))?;
        if scene.cost != cost {
            return Err(NavError::format(
                dir.join(COST_FILE),
                "cost layer inconsistent with traversability",
            ));
        }
        if scene.obstacles != obstacles {
            return Err(NavError::format(
                dir.join(OBSTACLES_FILE),
                "obstacle layer inconsistent with traversability",
            ));
        }
        Ok(scene)
    }
}
