//! A* on an inflated occupancy grid and the replanning rule.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};
use crate::path::PathPolyline;
use crate::world::{CellIndex, OccupancyGrid};

const SQRT2: f64 = std::f64::consts::SQRT_2;

// dx, dy; straight moves first so expansion order is fixed
const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)];

#[derive(Debug, Clone)]
pub struct PlanRequest<'a> {
    pub start: Vector2<f64>,
    pub goal: Vector2<f64>,
    /// Already inflated.
    pub grid: &'a OccupancyGrid,
    /// Plan through unexplored cells.
    pub unknown_is_free: bool,
}

/// Cost of a cell path as a count of straight and diagonal moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridCost {
    pub fn value(&self) -> f64 {
        self.straight as f64 + SQRT2 * self.diagonal as f64
    }

    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self {
                diagonal: self.diagonal + 1,
                ..self
            }
        } else {
            Self {
                straight: self.straight + 1,
                ..self
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub path: PathPolyline,
    /// Raw A* cell sequence before shortcutting.
    pub cells: Vec<CellIndex>,
    pub cost: GridCost,
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Open {
    // max-heap: smallest f, then largest g, then smallest index
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

fn octile(a: CellIndex, b: CellIndex) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) - dx.min(dy) + SQRT2 * dx.min(dy)
}

/// Grid moves from `c`: 8-connected, diagonals only when both adjacent straight cells are open.
pub fn grid_neighbors(grid: &OccupancyGrid, c: CellIndex, unknown_is_free: bool) -> Vec<(CellIndex, bool)> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let open = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w && y < h && !grid.is_blocked((x as usize, y as usize), unknown_is_free)
    };
    let (cx, cy) = (c.0 as i64, c.1 as i64);
    NEIGHBORS
        .iter()
        .filter(|&&(dx, dy)| open(cx + dx, cy + dy) && (dx == 0 || dy == 0 || (open(cx + dx, cy) && open(cx, cy + dy))))
        .map(|&(dx, dy)| (((cx + dx) as usize, (cy + dy) as usize), dx != 0 && dy != 0))
        .collect()
}

/// Shortest 8-connected cell path between two open cells.
pub fn astar_cells(
    grid: &OccupancyGrid,
    start: CellIndex,
    goal: CellIndex,
    unknown_is_free: bool,
) -> Option<(Vec<CellIndex>, GridCost)> {
    let w = grid.width();
    let n = w * grid.height();
    let flat = |c: CellIndex| c.1 * w + c.0;
    let mut cost: Vec<Option<GridCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[flat(start)] = Some(GridCost::default());
    heap.push(Open {
        f: octile(start, goal),
        g: 0.0,
        idx: flat(start),
    });
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let c = (idx % w, idx / w);
        let gc = cost[idx].expect("popped cells have a cost");
        if c == goal {
            let mut cells = vec![c];
            let mut k = idx;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k % w, k / w));
            }
            cells.reverse();
            return Some((cells, gc));
        }
        for (nb, diag) in grid_neighbors(grid, c, unknown_is_free) {
            let j = flat(nb);
            if closed[j] {
                continue;
            }
            let cand = gc.step(diag);
            if cost[j].is_none_or(|old| cand.value() < old.value()) {
                cost[j] = Some(cand);
                parent[j] = idx;
                heap.push(Open {
                    f: cand.value() + octile(nb, goal),
                    g: cand.value(),
                    idx: j,
                });
            }
        }
    }
    None
}

/// Nearest open cell by 8-connected breadth-first search.
fn nearest_open(grid: &OccupancyGrid, from: CellIndex, unknown_is_free: bool) -> Option<CellIndex> {
    let w = grid.width();
    let mut seen = vec![false; w * grid.height()];
    let mut queue = std::collections::VecDeque::from([from]);
    seen[from.1 * w + from.0] = true;
    let (gw, gh) = (grid.width() as i64, grid.height() as i64);
    while let Some(c) = queue.pop_front() {
        if !grid.is_blocked(c, unknown_is_free) {
            return Some(c);
        }
        for (dx, dy) in NEIGHBORS {
            let (x, y) = (c.0 as i64 + dx, c.1 as i64 + dy);
            if x >= 0 && y >= 0 && x < gw && y < gh && !seen[y as usize * w + x as usize] {
                seen[y as usize * w + x as usize] = true;
                queue.push_back((x as usize, y as usize));
            }
        }
    }
    None
}

/// True if every cell touched by the straight segment `a → b` is open.
pub fn segment_is_clear(grid: &OccupancyGrid, a: &Vector2<f64>, b: &Vector2<f64>, unknown_is_free: bool) -> bool {
    let step = grid.resolution() / 8.0;
    let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
    (0..=n).all(|i| {
        let p = a + (b - a) * (i as f64 / n as f64);
        grid.cell_of(&p).is_some_and(|c| !grid.is_blocked(c, unknown_is_free))
    })
}

fn to_dv(p: &Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(p.as_slice())
}

/// Plans from the exact start position to the exact goal.
///
/// A blocked start cell is snapped to the nearest open cell; the returned
/// path still begins at `start`. Waypoints between the ends are cell centers
/// thinned by line-of-sight shortcutting.
pub fn astar_plan(req: &PlanRequest<'_>) -> Result<Plan> {
    let grid = req.grid;
    let start_cell = grid
        .cell_of(&req.start)
        .ok_or_else(|| Error::Planning(format!("start ({}, {}) outside the grid", req.start.x, req.start.y)))?;
    let goal_cell = grid
        .cell_of(&req.goal)
        .ok_or_else(|| Error::Planning(format!("goal ({}, {}) outside the grid", req.goal.x, req.goal.y)))?;
    if grid.is_blocked(goal_cell, req.unknown_is_free) {
        return Err(Error::Planning(format!("goal cell {goal_cell:?} is blocked")));
    }
    let from = if grid.is_blocked(start_cell, req.unknown_is_free) {
        let snapped = nearest_open(grid, start_cell, req.unknown_is_free)
            .ok_or_else(|| Error::Planning("no open cell to start from".into()))?;
        log::debug!("start cell {start_cell:?} blocked, snapped to {snapped:?}");
        snapped
    } else {
        start_cell
    };
    let (cells, cost) = astar_cells(grid, from, goal_cell, req.unknown_is_free)
        .ok_or_else(|| Error::Planning(format!("no path from cell {from:?} to {goal_cell:?}")))?;

    let mut raw = vec![req.start];
    raw.extend(cells.iter().skip(1).map(|&c| grid.cell_center(c)));
    if from != start_cell {
        raw.insert(1, grid.cell_center(from));
    }
    if raw.len() > 1 {
        raw.pop();
    }
    raw.push(req.goal);

    let mut pts = vec![raw[0]];
    let mut i = 0;
    while i + 1 < raw.len() {
        let mut j = i + 1;
        for k in (i + 2..raw.len()).rev() {
            if segment_is_clear(grid, &raw[i], &raw[k], req.unknown_is_free) {
                j = k;
                break;
            }
        }
        pts.push(raw[j]);
        i = j;
    }
    let path = PathPolyline::new(pts.iter().map(to_dv).collect())?;
    Ok(Plan { path, cells, cost })
}

/// Replans every `period` control ticks, or at once when the path is blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplanPolicy {
    pub period: u64,
}

impl Default for ReplanPolicy {
    fn default() -> Self {
        Self { period: 20 }
    }
}

impl ReplanPolicy {
    pub fn should_replan(&self, tick: u64, path_blocked: bool) -> bool {
        path_blocked || tick.is_multiple_of(self.period.max(1))
    }
}

/// True if the part of `path` from `alpha` onward enters any cell within the
/// inflation radius of a newly occupied cell.
pub fn path_hits_new_obstacles(path: &PathPolyline, alpha: f64, grid: &OccupancyGrid, newly: &[CellIndex]) -> bool {
    if newly.is_empty() {
        return false;
    }
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let kernel = grid.inflation_kernel();
    let mut hit: HashSet<CellIndex> = HashSet::new();
    for &(cx, cy) in newly {
        for &(dx, dy) in &kernel {
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                hit.insert((x as usize, y as usize));
            }
        }
    }
    let step = grid.resolution() / 4.0;
    let n = ((1.0 - alpha).max(0.0) * path.length() / step).ceil() as usize;
    (0..=n).any(|i| {
        let a = alpha + (1.0 - alpha) * i as f64 / n.max(1) as f64;
        let p = path.point(a);
        grid.cell_of(&Vector2::new(p[0], p[1]))
            .is_some_and(|c| hit.contains(&c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Bounds, Cell};

    fn free_grid(w: f64, h: f64) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(
            &Bounds {
                min: [0.0, 0.0],
                max: [w, h],
            },
            1.0,
            0.0,
        )
        .unwrap();
        for iy in 0..g.height() {
            for ix in 0..g.width() {
                g.set((ix, iy), Cell::Free);
            }
        }
        g
    }

    #[test]
    fn straight_line_on_empty_grid() {
        let g = free_grid(10.0, 10.0);
        let req = PlanRequest {
            start: Vector2::new(0.5, 0.5),
            goal: Vector2::new(5.5, 0.5),
            grid: &g,
            unknown_is_free: false,
        };
        let plan = astar_plan(&req).unwrap();
        assert_eq!(plan.path.waypoints().len(), 2);
        assert_eq!(
            plan.cost,
            GridCost {
                straight: 5,
                diagonal: 0
            }
        );
        assert_eq!(plan.path.start()[0], 0.5);
    }

    #[test]
    fn passes_through_gap() {
        let mut g = free_grid(10.0, 10.0);
        for iy in 0..10 {
            if iy != 7 {
                g.set((5, iy), Cell::Occupied);
            }
        }
        let req = PlanRequest {
            start: Vector2::new(1.5, 1.5),
            goal: Vector2::new(8.5, 1.5),
            grid: &g,
            unknown_is_free: false,
        };
        let plan = astar_plan(&req).unwrap();
        assert!(plan.cells.contains(&(5, 7)));
        assert!(plan.cells.iter().all(|&c| !g.is_blocked(c, false)));
        for w in plan.path.waypoints().windows(2) {
            let a = Vector2::new(w[0][0], w[0][1]);
            let b = Vector2::new(w[1][0], w[1][1]);
            assert!(segment_is_clear(&g, &a, &b, false));
        }
    }

    #[test]
    fn blocked_goal_fails() {
        let mut g = free_grid(10.0, 10.0);
        g.set((5, 5), Cell::Occupied);
        let req = PlanRequest {
            start: Vector2::new(1.5, 1.5),
            goal: Vector2::new(5.5, 5.5),
            grid: &g,
            unknown_is_free: false,
        };
        assert!(matches!(astar_plan(&req), Err(Error::Planning(_))));
    }

    #[test]
    fn blocked_start_is_snapped_but_kept() {
        let mut g = free_grid(10.0, 10.0);
        g.set((1, 1), Cell::Occupied);
        let req = PlanRequest {
            start: Vector2::new(1.5, 1.5),
            goal: Vector2::new(8.5, 1.5),
            grid: &g,
            unknown_is_free: false,
        };
        let plan = astar_plan(&req).unwrap();
        assert_eq!(plan.path.start()[0], 1.5);
        assert_eq!(plan.path.start()[1], 1.5);
    }

    #[test]
    fn unknown_cells_respect_flag() {
        let g = OccupancyGrid::new(
            &Bounds {
                min: [0.0, 0.0],
                max: [5.0, 5.0],
            },
            1.0,
            0.0,
        )
        .unwrap();
        let mut req = PlanRequest {
            start: Vector2::new(0.5, 0.5),
            goal: Vector2::new(4.5, 4.5),
            grid: &g,
            unknown_is_free: false,
        };
        assert!(astar_plan(&req).is_err());
        req.unknown_is_free = true;
        assert_eq!(
            astar_plan(&req).unwrap().cost,
            GridCost {
                straight: 0,
                diagonal: 4
            }
        );
    }

    #[test]
    fn no_corner_cutting() {
        let mut g = free_grid(3.0, 3.0);
        g.set((1, 0), Cell::Occupied);
        let nbs = grid_neighbors(&g, (0, 0), false);
        assert!(!nbs.iter().any(|&(c, _)| c == (1, 1)));
    }

    #[test]
    fn replan_rule() {
        let p = ReplanPolicy::default();
        assert!(p.should_replan(20, false));
        assert!(p.should_replan(3, true));
        assert!(!p.should_replan(3, false));
    }

    #[test]
    fn new_obstacle_on_path_is_detected() {
        let g = free_grid(10.0, 10.0);
        let path = PathPolyline::new(vec![
            DVector::from_vec(vec![0.5, 0.5]),
            DVector::from_vec(vec![9.5, 0.5]),
        ])
        .unwrap();
        assert!(path_hits_new_obstacles(&path, 0.0, &g, &[(5, 0)]));
        assert!(!path_hits_new_obstacles(&path, 0.0, &g, &[(5, 5)]));
        assert!(!path_hits_new_obstacles(&path, 0.8, &g, &[(5, 0)]));
    }
}
