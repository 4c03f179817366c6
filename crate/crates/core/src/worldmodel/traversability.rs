//! Elevation → traversability → cost / obstacle layers.
//!
//! Traversability comes from an analytic slope/step rule rather than a
//! learned estimator; anything that produces a `[0, 1]` grid can be fed to
//! [`traversability_to_cost`] and [`threshold_obstacles`] instead.

use serde::{Deserialize, Serialize};

use super::grid::{CellIndex, GridMap2D};
use crate::error::{NavError, Result};

/// Below this traversability a cell is safe (cost 0).
pub const SAFE_BELOW: f64 = 0.3;
/// End of the linear cost ramp that starts at [`SAFE_BELOW`].
pub const RAMP_END: f64 = 0.8;
/// Above this a cell is an obstacle.
pub const OBSTACLE_ABOVE: f64 = 0.9;
pub const RISKY_COST: f64 = 2.0;
pub const OBSTACLE_COST: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraversabilityParams {
    /// Gradient magnitude (rise/run) that saturates traversability at 1.
    pub slope_max: f64,
    /// Height difference to any 8-neighbor (m) that saturates traversability at 1.
    pub step_max: f64,
}

impl Default for TraversabilityParams {
    fn default() -> Self {
        TraversabilityParams {
            slope_max: 0.6,
            step_max: 0.25,
        }
    }
}

/// Per-cell traversability in [0, 1] from slope and step height.
///
/// Invalid elevation cells become `t = 1` and stay invalid. Gradients use
/// central differences, falling back to one-sided differences next to the
/// border or invalid cells.
pub fn elevation_to_traversability(elevation: &GridMap2D, params: &TraversabilityParams) -> Result<GridMap2D> {
    if elevation.width() <= 2 || elevation.height() <= 2 {
        return Err(NavError::invalid(format!(
            "elevation grid too small for gradients: {}x{}",
            elevation.width(),
            elevation.height()
        )));
    }
    if !(params.slope_max > 0.0 && params.step_max > 0.0) {
        return Err(NavError::invalid(format!(
            "traversability params must be positive: {params:?}"
        )));
    }
    let res = elevation.resolution();
    let (w, h) = (elevation.width(), elevation.height());
    let z = |c: usize, r: usize| -> Option<f64> {
        let cell = CellIndex::new(c, r);
        elevation.is_valid(cell).then(|| elevation.get(cell) as f64)
    };
    let derivative = |lo: Option<f64>, mid: f64, hi: Option<f64>| -> f64 {
        match (lo, hi) {
            (Some(a), Some(b)) => (b - a) / (2.0 * res),
            (None, Some(b)) => (b - mid) / res,
            (Some(a), None) => (mid - a) / res,
            (None, None) => 0.0,
        }
    };

    let mut out = elevation.like(1.0);
    for r in 0..h {
        for c in 0..w {
            let cell = CellIndex::new(c, r);
            let Some(zc) = z(c, r) else {
                out.set(cell, 1.0);
                out.set_valid(cell, false);
                continue;
            };
            let left = (c > 0).then(|| z(c - 1, r)).flatten();
            let right = (c + 1 < w).then(|| z(c + 1, r)).flatten();
            let down = (r > 0).then(|| z(c, r - 1)).flatten();
            let up = (r + 1 < h).then(|| z(c, r + 1)).flatten();
            let slope = derivative(left, zc, right).hypot(derivative(down, zc, up));
            let step = elevation
                .neighbors8(cell)
                .filter_map(|n| z(n.col, n.row))
                .map(|zn| (zn - zc).abs())
                .fold(0.0, f64::max);
            let t = (slope / params.slope_max).max(step / params.step_max).clamp(0.0, 1.0);
            out.set(cell, t as f32);
        }
    }
    Ok(out)
}

/// Scalar cost mapping: 0 when safe, a linear ramp to [`RISKY_COST`] over
/// `[0.3, 0.8]`, the risky plateau up to 0.9, then [`OBSTACLE_COST`].
pub fn cost_of_traversability(t: f64) -> f64 {
    if t < SAFE_BELOW {
        0.0
    } else if t <= RAMP_END {
        RISKY_COST * (t - SAFE_BELOW) / (RAMP_END - SAFE_BELOW)
    } else if t <= OBSTACLE_ABOVE {
        RISKY_COST
    } else {
        OBSTACLE_COST
    }
}

pub fn is_obstacle_value(t: f64) -> bool {
    t > OBSTACLE_ABOVE
}

/// Maps traversability to per-cell traversal cost. Invalid cells cost
/// [`OBSTACLE_COST`].
pub fn traversability_to_cost(trav: &GridMap2D) -> Result<GridMap2D> {
    let mut out = trav.clone();
    for (i, (v, &valid)) in trav.values().iter().zip(trav.valid_mask()).enumerate() {
        let t = *v as f64;
        let cost = if !valid {
            OBSTACLE_COST
        } else if (0.0..=1.0).contains(&t) {
            cost_of_traversability(t)
        } else {
            let cell = trav.cell_of_index(i);
            return Err(NavError::invalid(format!(
                "traversability {t} out of [0, 1] at cell ({}, {})",
                cell.col, cell.row
            )));
        };
        out.values_mut()[i] = cost as f32;
    }
    Ok(out)
}

/// Binary obstacle layer (1 = obstacle): `t > 0.9` or invalid. The result is
/// fully valid.
pub fn threshold_obstacles(trav: &GridMap2D) -> GridMap2D {
    let mut out = trav.like(0.0);
    for (i, (v, &valid)) in trav.values().iter().zip(trav.valid_mask()).enumerate() {
        if !valid || is_obstacle_value(*v as f64) {
            out.values_mut()[i] = 1.0;
        }
    }
    out
}
