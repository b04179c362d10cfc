use nalgebra::Vector2;

use super::{Bounds, LidarScan, ObstacleSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Unknown,
    Free,
    Occupied,
}

/// Cell index `(ix, iy)`; `ix` grows with x, `iy` with y.
pub type CellIndex = (usize, usize);

/// Occupancy grid over an axis-aligned rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vector2<f64>,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    pub inflation_radius: f64,
}

impl OccupancyGrid {
    /// All-unknown grid covering `bounds`.
    pub fn new(bounds: &Bounds, resolution: f64, inflation_radius: f64) -> Result<Self> {
        if !(resolution > 0.0) || !(inflation_radius >= 0.0) {
            return Err(Error::Config(format!(
                "grid needs resolution > 0 and inflation >= 0, got {resolution} and {inflation_radius}"
            )));
        }
        let width = (bounds.width() / resolution).ceil().max(1.0) as usize;
        let height = (bounds.height() / resolution).ceil().max(1.0) as usize;
        Ok(Self {
            resolution,
            origin: Vector2::new(bounds.min[0], bounds.min[1]),
            width,
            height,
            cells: vec![Cell::Unknown; width * height],
            inflation_radius,
        })
    }

    /// Grid from full knowledge of the obstacles: a cell is occupied when an
    /// obstacle reaches within half a cell diagonal of its center.
    pub fn from_obstacles(obs: &ObstacleSet, resolution: f64, inflation_radius: f64) -> Result<Self> {
        let mut grid = Self::new(&obs.bounds, resolution, inflation_radius)?;
        let reach = resolution * std::f64::consts::FRAC_1_SQRT_2;
        for iy in 0..grid.height {
            for ix in 0..grid.width {
                let c = grid.cell_center((ix, iy));
                let state = if obs.clearance(&c) <= reach {
                    Cell::Occupied
                } else {
                    Cell::Free
                };
                grid.set((ix, iy), state);
            }
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn get(&self, (ix, iy): CellIndex) -> Cell {
        self.cells[iy * self.width + ix]
    }

    pub fn set(&mut self, (ix, iy): CellIndex, c: Cell) {
        self.cells[iy * self.width + ix] = c;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }

    pub fn cell_of(&self, p: &Vector2<f64>) -> Option<CellIndex> {
        let rel = (p - self.origin) / self.resolution;
        if rel.x < 0.0 || rel.y < 0.0 {
            return None;
        }
        let (ix, iy) = (rel.x.floor() as usize, rel.y.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, (ix, iy): CellIndex) -> Vector2<f64> {
        self.origin + Vector2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.resolution
    }

    /// True if planning may not enter the cell.
    pub fn is_blocked(&self, idx: CellIndex, unknown_is_free: bool) -> bool {
        match self.get(idx) {
            Cell::Occupied => true,
            Cell::Unknown => !unknown_is_free,
            Cell::Free => false,
        }
    }

    /// Marks traversed cells free and hit cells occupied. Occupied cells are
    /// never cleared. Returns cells that became occupied.
    pub fn integrate_scan_in_place(&mut self, scan: &LidarScan) -> Vec<CellIndex> {
        let mut newly = Vec::new();
        let Some(start) = self.cell_of(&scan.origin) else {
            return newly;
        };
        for (&angle, &range) in scan.angles.iter().zip(&scan.ranges) {
            let end = scan.origin + Vector2::new(angle.cos(), angle.sin()) * range;
            let hit = range < scan.range_max;
            let rel = (end - self.origin) / self.resolution;
            let target = (rel.x.floor() as i64, rel.y.floor() as i64);
            let mut last = None;
            for cell in BresenhamLine::new((start.0 as i64, start.1 as i64), target) {
                if cell.0 < 0 || cell.1 < 0 || cell.0 as usize >= self.width || cell.1 as usize >= self.height {
                    break;
                }
                let idx = (cell.0 as usize, cell.1 as usize);
                if let Some(prev) = last.replace(idx) {
                    if self.get(prev) != Cell::Occupied {
                        self.set(prev, Cell::Free);
                    }
                }
            }
            if let Some(idx) = last {
                let reached = idx == (target.0.max(0) as usize, target.1.max(0) as usize);
                match self.get(idx) {
                    Cell::Occupied => {}
                    _ if hit && reached => {
                        self.set(idx, Cell::Occupied);
                        newly.push(idx);
                    }
                    _ => self.set(idx, Cell::Free),
                }
            }
        }
        newly
    }

    pub fn integrate_scan(&self, scan: &LidarScan) -> OccupancyGrid {
        let mut g = self.clone();
        g.integrate_scan_in_place(scan);
        g
    }

    /// Offsets of cells whose centers lie within the inflation radius.
    pub fn inflation_kernel(&self) -> Vec<(i64, i64)> {
        let r = self.inflation_radius / self.resolution;
        let ri = r.floor() as i64;
        let mut k = Vec::new();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if ((dx * dx + dy * dy) as f64) <= r * r + 1e-9 {
                    k.push((dx, dy));
                }
            }
        }
        k
    }

    /// Copy with every cell within `inflation_radius` of an occupied cell
    /// marked occupied. The copy has `inflation_radius = 0`, so inflating it
    /// again changes nothing.
    pub fn inflate(&self) -> OccupancyGrid {
        let mut out = self.clone();
        out.inflation_radius = 0.0;
        let kernel = self.inflation_kernel();
        if kernel.len() <= 1 {
            return out;
        }
        for iy in 0..self.height {
            for ix in 0..self.width {
                if self.get((ix, iy)) != Cell::Occupied {
                    continue;
                }
                for &(dx, dy) in &kernel {
                    let (x, y) = (ix as i64 + dx, iy as i64 + dy);
                    if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
                        out.set((x as usize, y as usize), Cell::Occupied);
                    }
                }
            }
        }
        out
    }

    /// Plain PGM (P2): 0 occupied, 128 unknown, 255 free; top row is max y.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for iy in (0..self.height).rev() {
            let row: Vec<&str> = (0..self.width)
                .map(|ix| match self.get((ix, iy)) {
                    Cell::Occupied => "0",
                    Cell::Unknown => "128",
                    Cell::Free => "255",
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Integer Bresenham line including both endpoints.
#[derive(Debug, Clone)]
pub struct BresenhamLine {
    x: i64,
    y: i64,
    end: (i64, i64),
    dx: i64,
    dy: i64,
    sx: i64,
    sy: i64,
    err: i64,
    done: bool,
}

impl BresenhamLine {
    pub fn new(start: (i64, i64), end: (i64, i64)) -> Self {
        let dx = (end.0 - start.0).abs();
        let dy = -(end.1 - start.1).abs();
        Self {
            x: start.0,
            y: start.1,
            end,
            dx,
            dy,
            sx: if start.0 < end.0 { 1 } else { -1 },
            sy: if start.1 < end.1 { 1 } else { -1 },
            err: dx + dy,
            done: false,
        }
    }
}

impl Iterator for BresenhamLine {
    type Item = (i64, i64);

    fn next(&mut self) -> Option<(i64, i64)> {
        if self.done {
            return None;
        }
        let cur = (self.x, self.y);
        if cur == self.end {
            self.done = true;
            return Some(cur);
        }
        let e2 = 2 * self.err;
        if e2 >= self.dy {
            self.err += self.dy;
            self.x += self.sx;
        }
        if e2 <= self.dx {
            self.err += self.dx;
            self.y += self.sy;
        }
        Some(cur)
    }
}
