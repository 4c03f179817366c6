//! Scalar grid maps and the GM2D binary format.
//!
//! Layout (little-endian): `b"GM2D"`, `u32` version (1), `u32` width,
//! `u32` height, `f64` resolution, `f64` origin x, y, theta, then
//! `width * height` `f32` values row-major, then `width * height` `u8`
//! validity flags.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use crate::error::{NavError, Result};
use crate::geometry::{relative_to, Pose2};

pub const GM2D_MAGIC: &[u8; 4] = b"GM2D";
pub const GM2D_VERSION: u32 = 1;

/// Default map side in cells (8 m at 4 cm).
pub const DEFAULT_CELLS: usize = 200;
pub const DEFAULT_RESOLUTION: f64 = 0.04;

/// Column (`x`) and row (`y`) of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub fn new(col: usize, row: usize) -> Self {
        CellIndex { col, row }
    }
}

/// Row-major scalar field with a per-cell validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap2D {
    width: usize,
    height: usize,
    resolution: f64,
    /// Pose of the (0, 0) cell corner in the world frame.
    origin: Pose2,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl GridMap2D {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2, fill: f32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(NavError::invalid(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(NavError::invalid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !origin.is_finite() {
            return Err(NavError::invalid("grid origin must be finite"));
        }
        let n = width * height;
        Ok(GridMap2D {
            width,
            height,
            resolution,
            origin,
            values: vec![fill; n],
            valid: vec![true; n],
        })
    }

    /// A grid whose center coincides with the world origin.
    pub fn robot_centered(width: usize, height: usize, resolution: f64, fill: f32) -> Result<Self> {
        let origin = Pose2::new(
            -(width as f64) * resolution / 2.0,
            -(height as f64) * resolution / 2.0,
            0.0,
        );
        Self::new(width, height, resolution, origin, fill)
    }

    /// 200 × 200 cells at 4 cm, centered on the robot.
    pub fn default_robot_centered(fill: f32) -> Self {
        Self::robot_centered(DEFAULT_CELLS, DEFAULT_CELLS, DEFAULT_RESOLUTION, fill).expect("default geometry is valid")
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        values: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let mut grid = Self::new(width, height, resolution, origin, 0.0)?;
        if values.len() != grid.len() || valid.len() != grid.len() {
            return Err(NavError::invalid(format!(
                "expected {} values and flags, got {} and {}",
                grid.len(),
                values.len(),
                valid.len()
            )));
        }
        grid.values = values;
        grid.valid = valid;
        Ok(grid)
    }

    /// Same geometry, new fill, all cells valid.
    pub fn like(&self, fill: f32) -> Self {
        GridMap2D {
            values: vec![fill; self.len()],
            valid: vec![true; self.len()],
            ..self.clone()
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_mask_mut(&mut self) -> &mut [bool] {
        &mut self.valid
    }

    pub fn same_geometry(&self, other: &GridMap2D) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && self.origin == other.origin
    }

    #[inline]
    pub fn index(&self, cell: CellIndex) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_of_index(&self, idx: usize) -> CellIndex {
        CellIndex::new(idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn get(&self, cell: CellIndex) -> f32 {
        self.values[self.index(cell)]
    }

    #[inline]
    pub fn set(&mut self, cell: CellIndex, v: f32) {
        let i = self.index(cell);
        self.values[i] = v;
    }

    #[inline]
    pub fn is_valid(&self, cell: CellIndex) -> bool {
        self.valid[self.index(cell)]
    }

    pub fn set_valid(&mut self, cell: CellIndex, valid: bool) {
        let i = self.index(cell);
        self.valid[i] = valid;
    }

    /// Position of `p` in the grid frame, in meters from the (0, 0) corner.
    #[inline]
    pub fn to_grid_frame(&self, x: f64, y: f64) -> (f64, f64) {
        if self.origin.theta == 0.0 {
            (x - self.origin.x, y - self.origin.y)
        } else {
            let local = relative_to(&self.origin, &Pose2 { x, y, theta: 0.0 });
            (local.x, local.y)
        }
    }

    /// Half-open `[low, high)` cell lookup; `None` outside the map.
    pub fn world_to_cell(&self, p: &Pose2) -> Option<CellIndex> {
        self.point_to_cell(p.x, p.y)
    }

    #[inline]
    pub fn point_to_cell(&self, x: f64, y: f64) -> Option<CellIndex> {
        let (gx, gy) = self.to_grid_frame(x, y);
        let fc = (gx / self.resolution).floor();
        let fr = (gy / self.resolution).floor();
        if fc >= 0.0 && fr >= 0.0 && fc < self.width as f64 && fr < self.height as f64 {
            Some(CellIndex::new(fc as usize, fr as usize))
        } else {
            None
        }
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, cell: CellIndex) -> (f64, f64) {
        let lx = (cell.col as f64 + 0.5) * self.resolution;
        let ly = (cell.row as f64 + 0.5) * self.resolution;
        if self.origin.theta == 0.0 {
            (self.origin.x + lx, self.origin.y + ly)
        } else {
            let p = self.origin.compose(&Pose2 {
                x: lx,
                y: ly,
                theta: 0.0,
            });
            (p.x, p.y)
        }
    }

    /// In-bounds 8-neighbors of a cell.
    pub fn neighbors8(&self, cell: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        const OFFSETS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dc, dr)| {
            let c = cell.col as isize + dc;
            let r = cell.row as isize + dr;
            (c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height)
                .then(|| CellIndex::new(c as usize, r as usize))
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| CellIndex::new(col, row)))
    }

    /// Fraction of cells flagged valid.
    pub fn valid_fraction(&self) -> f64 {
        let n = self.valid.iter().filter(|&&v| v).count();
        n as f64 / self.len() as f64
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(GM2D_MAGIC)?;
        w.write_all(&GM2D_VERSION.to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for v in [self.resolution, self.origin.x, self.origin.y, self.origin.theta] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        let flags: Vec<u8> = self.valid.iter().map(|&v| v as u8).collect();
        w.write_all(&flags)
    }

    /// Parses a GM2D stream; `source` only labels errors.
    pub fn read_from<R: Read>(r: &mut R, source: &FsPath) -> Result<Self> {
        let fmt = |m: String| NavError::format(source, m);
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| NavError::io(source, e))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| fmt("truncated header".into()))?;
        if magic != GM2D_MAGIC {
            return Err(fmt(format!("bad magic {magic:?}")));
        }
        let version = cur.u32().ok_or_else(|| fmt("truncated header".into()))?;
        if version != GM2D_VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let width = cur.u32().ok_or_else(|| fmt("truncated header".into()))? as usize;
        let height = cur.u32().ok_or_else(|| fmt("truncated header".into()))? as usize;
        let mut head = [0.0f64; 4];
        for h in head.iter_mut() {
            *h = cur.f64().ok_or_else(|| fmt("truncated header".into()))?;
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| fmt("grid dimensions overflow".into()))?;
        let expected = cur.pos + n * 5;
        if buf.len() != expected {
            return Err(fmt(format!("expected {expected} bytes, found {}", buf.len())));
        }
        let values: Vec<f32> = (0..n).map(|_| cur.f32().unwrap()).collect();
        let valid = cur
            .take(n)
            .unwrap()
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(fmt(format!("validity flag must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let origin = Pose2 {
            x: head[1],
            y: head[2],
            theta: head[3],
        };
        GridMap2D::from_parts(width, height, head[0], origin, values, valid).map_err(|e| fmt(e.to_string()))
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        let file = File::create(path).map_err(|e| NavError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| NavError::io(path, e))
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let file = File::open(path).map_err(|e| NavError::io(path, e))?;
        Self::read_from(&mut BufReader::new(file), path)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let g = GridMap2D::default_robot_centered(0.0);
        assert_eq!((g.width(), g.height()), (200, 200));
        assert_eq!(g.origin(), Pose2::new(-4.0, -4.0, 0.0));
        assert_eq!(g.world_to_cell(&Pose2::IDENTITY), Some(CellIndex::new(100, 100)));
        assert_eq!(
            g.world_to_cell(&Pose2::new(-4.0, -4.0, 0.0)),
            Some(CellIndex::new(0, 0))
        );
        // max corner is excluded
        assert_eq!(g.world_to_cell(&Pose2::new(4.0, 4.0, 0.0)), None);
        assert_eq!(g.world_to_cell(&Pose2::new(4.0, 0.0, 0.0)), None);
        assert_eq!(g.world_to_cell(&Pose2::new(-4.0001, 0.0, 0.0)), None);
        assert_eq!(
            g.world_to_cell(&Pose2::new(3.9999, 3.9999, 0.0)),
            Some(CellIndex::new(199, 199))
        );
    }

    #[test]
    fn rotated_origin_lookup() {
        let g = GridMap2D::new(10, 10, 1.0, Pose2::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), 0.0).unwrap();
        // grid +x points along world +y
        assert_eq!(g.world_to_cell(&Pose2::new(-2.5, 3.5, 0.0)), Some(CellIndex::new(3, 2)));
        let (x, y) = g.cell_center(CellIndex::new(3, 2));
        assert!((x + 2.5).abs() < 1e-12 && (y - 3.5).abs() < 1e-12);
    }

    #[test]
    fn valid_fraction_counts() {
        let mut g = GridMap2D::default_robot_centered(0.0);
        assert_eq!(g.valid_fraction(), 1.0);
        g.valid_mask_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i < 9999);
        assert_eq!(g.valid_fraction(), 0.249975);
        assert!(g.valid_fraction() < 0.25);
        g.valid_mask_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i % 2 == 0);
        assert_eq!(g.valid_fraction(), 0.5);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(GridMap2D::new(0, 3, 0.1, Pose2::IDENTITY, 0.0).is_err());
        assert!(GridMap2D::new(3, 3, 0.0, Pose2::IDENTITY, 0.0).is_err());
        assert!(GridMap2D::from_parts(2, 2, 0.1, Pose2::IDENTITY, vec![0.0; 3], vec![true; 4]).is_err());
    }

    #[test]
    fn gm2d_header_layout() {
        let g = GridMap2D::new(3, 2, 0.5, Pose2::new(1.0, 2.0, 0.25), 7.0).unwrap();
        let mut bytes = Vec::new();
        g.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"GM2D");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 0.25);
        assert_eq!(bytes.len(), 48 + 6 * 4 + 6);
        assert_eq!(f32::from_le_bytes(bytes[48..52].try_into().unwrap()), 7.0);
        assert_eq!(bytes[bytes.len() - 1], 1);
    }

    #[test]
    fn gm2d_rejects_garbage() {
        let p = FsPath::new("mem");
        assert!(GridMap2D::read_from(&mut &b"GM2X"[..], p).is_err());
        let g = GridMap2D::new(2, 2, 0.5, Pose2::IDENTITY, 1.0).unwrap();
        let mut bytes = Vec::new();
        g.write_to(&mut bytes).unwrap();
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(
            GridMap2D::read_from(&mut &truncated[..], p),
            Err(NavError::Format { .. })
        ));
        let mut bad_flag = bytes.clone();
        *bad_flag.last_mut().unwrap() = 3;
        assert!(GridMap2D::read_from(&mut &bad_flag[..], p).is_err());
    }
}
