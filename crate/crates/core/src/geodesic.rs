//! Geodesic distance fields over binary obstacle grids.
//!
//! Distances are exact shortest paths on the 8-connected free-cell graph
//! with edge weights `resolution · {1, √2}`. A diagonal move is blocked only
//! when both orthogonal cells it passes between are obstacles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{NavError, Result};
use crate::geometry::Pose2;
use crate::worldmodel::{CellIndex, GridMap2D};

/// Distance to a goal cell for every cell of a grid; `+∞` where unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    geometry: GridMap2D,
    distances: Vec<f64>,
    goal_cell: CellIndex,
}

#[inline]
pub(crate) fn is_blocked(obstacles: &GridMap2D, idx: usize) -> bool {
    obstacles.values()[idx] != 0.0
}

/// The 8-neighbor moves allowed from `idx` with their edge weights.
pub fn free_edges(obstacles: &GridMap2D, cell: CellIndex) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
    let res = obstacles.resolution();
    let diag = res * std::f64::consts::SQRT_2;
    let (w, h) = (obstacles.width() as isize, obstacles.height() as isize);
    const MOVES: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    MOVES.iter().filter_map(move |&(dc, dr)| {
        let c = cell.col as isize + dc;
        let r = cell.row as isize + dr;
        if c < 0 || r < 0 || c >= w || r >= h {
            return None;
        }
        let n = CellIndex::new(c as usize, r as usize);
        if is_blocked(obstacles, obstacles.index(n)) {
            return None;
        }
        if dc != 0 && dr != 0 {
            let a = CellIndex::new(c as usize, cell.row);
            let b = CellIndex::new(cell.col, r as usize);
            if is_blocked(obstacles, obstacles.index(a)) && is_blocked(obstacles, obstacles.index(b)) {
                return None;
            }
            Some((n, diag))
        } else {
            Some((n, res))
        }
    })
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source` over the free-cell graph.
pub(crate) fn dijkstra(obstacles: &GridMap2D, source: CellIndex) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; obstacles.len()];
    let src = obstacles.index(source);
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { dist: 0.0, idx: src });
    while let Some(Entry { dist: d, idx }) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let cell = obstacles.cell_of_index(idx);
        for (n, w) in free_edges(obstacles, cell) {
            let ni = obstacles.index(n);
            let nd = d + w;
            if nd < dist[ni] {
                dist[ni] = nd;
                heap.push(Entry { dist: nd, idx: ni });
            }
        }
    }
    dist
}

/// Geodesic distance field to `goal` on the obstacle grid (non-zero = obstacle).
pub fn compute_gdf(obstacles: &GridMap2D, goal: &Pose2) -> Result<DistanceField> {
    let goal_cell = obstacles
        .world_to_cell(goal)
        .ok_or_else(|| NavError::InfeasibleGoal(format!("goal ({:.3}, {:.3}) is outside the map", goal.x, goal.y)))?;
    compute_gdf_to_cell(obstacles, goal_cell)
}

pub fn compute_gdf_to_cell(obstacles: &GridMap2D, goal_cell: CellIndex) -> Result<DistanceField> {
    if goal_cell.col >= obstacles.width() || goal_cell.row >= obstacles.height() {
        return Err(NavError::InfeasibleGoal(format!(
            "goal cell {goal_cell:?} is outside the map"
        )));
    }
    if is_blocked(obstacles, obstacles.index(goal_cell)) {
        return Err(NavError::InfeasibleGoal(format!(
            "goal cell ({}, {}) is an obstacle",
            goal_cell.col, goal_cell.row
        )));
    }
    Ok(DistanceField {
        distances: dijkstra(obstacles, goal_cell),
        geometry: obstacles.like(0.0),
        goal_cell,
    })
}

impl DistanceField {
    pub fn goal_cell(&self) -> CellIndex {
        self.goal_cell
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn geometry(&self) -> &GridMap2D {
        &self.geometry
    }

    pub fn at_cell(&self, cell: CellIndex) -> f64 {
        self.distances[self.geometry.index(cell)]
    }

    /// Distance of the cell containing `p`; `+∞` outside the map.
    #[inline]
    pub fn query(&self, p: &Pose2) -> f64 {
        self.query_xy(p.x, p.y)
    }

    #[inline]
    pub fn query_xy(&self, x: f64, y: f64) -> f64 {
        match self.geometry.point_to_cell(x, y) {
            Some(c) => self.distances[self.geometry.index(c)],
            None => f64::INFINITY,
        }
    }

    /// The field as an `f32` grid (infinity preserved), for GM2D export.
    pub fn to_grid(&self) -> GridMap2D {
        let mut g = self.geometry.clone();
        for (v, d) in g.values_mut().iter_mut().zip(&self.distances) {
            *v = *d as f32;
        }
        g
    }
}

/// `query_distance` over a field.
pub fn query_distance(field: &DistanceField, p: &Pose2) -> f64 {
    field.query(p)
}

/// The free cell reachable from `start` (8-connected) closest in Euclidean
/// distance to `target`. Falls back to the closest free cell anywhere when
/// `start` is itself blocked or outside the map. Ties go to the lower index.
pub fn nearest_reachable_cell(obstacles: &GridMap2D, start: &Pose2, target: &Pose2) -> Option<CellIndex> {
    let reachable: Option<Vec<f64>> = obstacles
        .world_to_cell(start)
        .filter(|c| !is_blocked(obstacles, obstacles.index(*c)))
        .map(|c| dijkstra(obstacles, c));
    let mut best: Option<(f64, usize)> = None;
    for idx in 0..obstacles.len() {
        if is_blocked(obstacles, idx) {
            continue;
        }
        if let Some(r) = &reachable {
            if !r[idx].is_finite() {
                continue;
            }
        }
        let (x, y) = obstacles.cell_center(obstacles.cell_of_index(idx));
        let d = (x - target.x).hypot(y - target.y);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, idx));
        }
    }
    best.map(|(_, idx)| obstacles.cell_of_index(idx))
}
