//! Footprint rasterization and per-row prefix sums for fast area queries.
//!
//! A footprint covers the cells whose centers lie inside its dilated,
//! rotated rectangle, plus the cell containing the pose itself. A rectangle
//! is convex, so each grid row intersects it in one contiguous run of
//! columns; area sums then cost two prefix lookups per row.

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Pose2;
use crate::worldmodel::GridMap2D;

/// Planar robot rectangle, centered on the pose, dilated by a margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Footprint {
    pub half_length: f64,
    pub half_width: f64,
    pub safety_margin: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Footprint {
            half_length: 0.45,
            half_width: 0.25,
            safety_margin: 0.05,
        }
    }
}

impl Footprint {
    pub fn new(half_length: f64, half_width: f64, safety_margin: f64) -> Result<Self> {
        let f = Footprint {
            half_length,
            half_width,
            safety_margin,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_length > 0.0 && self.half_width > 0.0 && self.safety_margin >= 0.0 {
            Ok(())
        } else {
            Err(NavError::invalid(format!(
                "footprint half sizes must be positive and the margin non-negative: {self:?}"
            )))
        }
    }

    /// The robot body without the safety margin.
    pub fn body(&self) -> Footprint {
        Footprint {
            safety_margin: 0.0,
            ..*self
        }
    }

    pub fn dilated_half_length(&self) -> f64 {
        self.half_length + self.safety_margin
    }

    pub fn dilated_half_width(&self) -> f64 {
        self.half_width + self.safety_margin
    }

    /// Whether a world point lies inside the dilated rectangle at `pose`.
    pub fn contains(&self, pose: &Pose2, x: f64, y: f64) -> bool {
        let (s, c) = pose.theta.sin_cos();
        let dx = x - pose.x;
        let dy = y - pose.y;
        (dx * c + dy * s).abs() <= self.dilated_half_length() && (-dx * s + dy * c).abs() <= self.dilated_half_width()
    }

    /// Calls `f(row, col_lo, col_hi)` for each covered row span (inclusive,
    /// in grid indices that may fall outside the map).
    pub fn for_each_span<F: FnMut(isize, isize, isize)>(&self, grid: &GridMap2D, pose: &Pose2, mut f: F) {
        let res = grid.resolution();
        let (cx, cy) = grid.to_grid_frame(pose.x, pose.y);
        let phi = pose.theta - grid.origin().theta;
        let (s, c) = phi.sin_cos();
        let hl = self.dilated_half_length();
        let hw = self.dilated_half_width();
        // rectangle axes in the grid frame: u along heading, v lateral
        let (ux, uy) = (c, s);
        let (vx, vy) = (-s, c);
        let ext = hl * uy.abs() + hw * vy.abs();
        let r_lo = ((cy - ext) / res - 0.5).ceil() as isize;
        let r_hi = ((cy + ext) / res - 0.5).floor() as isize;

        let home_col = (cx / res).floor() as isize;
        let home_row = (cy / res).floor() as isize;
        let mut home_covered = false;

        for row in r_lo..=r_hi {
            let dy = (row as f64 + 0.5) * res - cy;
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            let mut empty = false;
            for (ax, ay, half) in [(ux, uy, hl), (vx, vy, hw)] {
                let off = dy * ay;
                if ax == 0.0 {
                    if off.abs() > half {
                        empty = true;
                    }
                } else {
                    let a = (-half - off) / ax;
                    let b = (half - off) / ax;
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
            }
            if empty || lo > hi {
                continue;
            }
            let c_lo = ((cx + lo) / res - 0.5).ceil() as isize;
            let c_hi = ((cx + hi) / res - 0.5).floor() as isize;
            if c_lo > c_hi {
                continue;
            }
            if row == home_row && home_col >= c_lo && home_col <= c_hi {
                home_covered = true;
            }
            f(row, c_lo, c_hi);
        }
        if !home_covered {
            f(home_row, home_col, home_col);
        }
    }
}

/// Per-row prefix sums of a grid's values.
#[derive(Debug, Clone)]
pub struct RowPrefix {
    width: usize,
    height: usize,
    prefix: Vec<f64>,
}

impl RowPrefix {
    pub fn new(grid: &GridMap2D) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut prefix = Vec::with_capacity((w + 1) * h);
        for row in grid.values().chunks(w) {
            let mut acc = 0.0;
            prefix.push(0.0);
            for v in row {
                acc += *v as f64;
                prefix.push(acc);
            }
        }
        RowPrefix {
            width: w,
            height: h,
            prefix,
        }
    }

    /// Sum of in-map values in the span and the number of out-of-map cells.
    #[inline]
    pub fn span(&self, row: isize, lo: isize, hi: isize) -> (f64, usize) {
        let n = (hi - lo + 1) as usize;
        if row < 0 || row >= self.height as isize {
            return (0.0, n);
        }
        let a = lo.max(0);
        let b = hi.min(self.width as isize - 1);
        if a > b {
            return (0.0, n);
        }
        let base = row as usize * (self.width + 1);
        let sum = self.prefix[base + b as usize + 1] - self.prefix[base + a as usize];
        (sum, n - (b - a + 1) as usize)
    }
}

/// A grid paired with its row prefix sums, for footprint area queries.
#[derive(Debug, Clone)]
pub struct FootprintQuery<'a> {
    grid: &'a GridMap2D,
    prefix: RowPrefix,
}

impl<'a> FootprintQuery<'a> {
    pub fn new(grid: &'a GridMap2D) -> Self {
        FootprintQuery {
            grid,
            prefix: RowPrefix::new(grid),
        }
    }

    pub fn grid(&self) -> &GridMap2D {
        self.grid
    }

    /// Sum of covered in-map values and count of covered out-of-map cells.
    #[inline]
    pub fn sum(&self, footprint: &Footprint, pose: &Pose2) -> (f64, usize) {
        let mut total = 0.0;
        let mut outside = 0;
        footprint.for_each_span(self.grid, pose, |row, lo, hi| {
            let (s, o) = self.prefix.span(row, lo, hi);
            total += s;
            outside += o;
        });
        (total, outside)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::CellIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force coverage: every cell center tested against the rectangle,
    /// plus the containing cell.
    fn covered_cells(g: &GridMap2D, fp: &Footprint, pose: &Pose2) -> Vec<CellIndex> {
        let mut cells: Vec<CellIndex> = g
            .cells()
            .filter(|&c| {
                let (x, y) = g.cell_center(c);
                fp.contains(pose, x, y)
            })
            .collect();
        if let Some(home) = g.world_to_cell(pose) {
            if !cells.contains(&home) {
                cells.push(home);
            }
        }
        cells
    }

    #[test]
    fn spans_match_brute_force() {
        let g = GridMap2D::robot_centered(60, 60, 0.04, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let fp = Footprint::new(rng.random_range(0.01..0.5), rng.random_range(0.01..0.4), 0.02).unwrap();
            let pose = Pose2::new(
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(-4.0..4.0),
            );
            let mut from_spans = Vec::new();
            fp.for_each_span(&g, &pose, |row, lo, hi| {
                for c in lo..=hi {
                    from_spans.push(CellIndex::new(c as usize, row as usize));
                }
            });
            let mut oracle = covered_cells(&g, &fp, &pose);
            from_spans.sort();
            oracle.sort();
            assert_eq!(from_spans, oracle, "{fp:?} at {pose:?}");
        }
    }

    #[test]
    fn uniform_cost_sum_counts_cells() {
        let g = GridMap2D::robot_centered(80, 80, 0.04, 2.0).unwrap();
        let q = FootprintQuery::new(&g);
        let fp = Footprint::default();
        let pose = Pose2::new(0.013, -0.021, 0.7);
        let k = covered_cells(&g, &fp, &pose).len();
        let (sum, out) = q.sum(&fp, &pose);
        assert_eq!(out, 0);
        assert_eq!(sum, 2.0 * k as f64);
        // dilated 1.0 x 0.6 m at 4 cm: about 375 cells
        assert!((330..420).contains(&k), "{k}");
    }

    #[test]
    fn out_of_map_cells_counted() {
        let g = GridMap2D::robot_centered(20, 20, 0.04, 0.0).unwrap();
        let q = FootprintQuery::new(&g);
        let fp = Footprint::default();
        let pose = Pose2::new(0.011, 0.007, 0.1);
        let (_, out) = q.sum(&fp, &pose);
        let big = GridMap2D::robot_centered(100, 100, 0.04, 0.0).unwrap();
        let total = covered_cells(&big, &fp, &pose).len();
        let inside = covered_cells(&g, &fp, &pose).len();
        assert!(out > 0);
        assert_eq!(out, total - inside);
    }

    #[test]
    fn tiny_footprint_still_covers_home_cell() {
        let g = GridMap2D::robot_centered(10, 10, 0.04, 0.0).unwrap();
        let fp = Footprint::new(0.001, 0.001, 0.001).unwrap();
        let mut spans = vec![];
        fp.for_each_span(&g, &Pose2::new(0.001, 0.001, 0.3), |r, a, b| spans.push((r, a, b)));
        assert_eq!(spans, vec![(5, 5, 5)]);
    }
}
